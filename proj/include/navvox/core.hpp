#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace navvox {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
    bool operator==(const Vec3&) const = default;

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm_xy() const { return std::hypot(x, y); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }
inline double distance_xy(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Aabb {
    Vec3 min;
    Vec3 max;
};

// Integer grid coordinate of a voxel. Ordering is lexicographic (x, y, z).
struct VoxelIndex {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    auto operator<=>(const VoxelIndex&) const = default;
};

// Packs an index into 64 bits (21 bits per axis, offset-biased). Valid for |coord| < 2^20.
inline std::uint64_t pack(const VoxelIndex& v) {
    constexpr std::int64_t bias = 1 << 20;
    constexpr std::uint64_t mask = (1u << 21) - 1;
    return (static_cast<std::uint64_t>(v.x + bias) & mask) << 42 |
           (static_cast<std::uint64_t>(v.y + bias) & mask) << 21 |
           (static_cast<std::uint64_t>(v.z + bias) & mask);
}

inline std::uint64_t pack_column(std::int32_t x, std::int32_t y) { return pack({x, y, 0}); }

struct VoxelIndexHash {
    std::size_t operator()(const VoxelIndex& v) const noexcept { return std::hash<std::uint64_t>{}(pack(v)); }
};

/// Base class for all recoverable toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace navvox
