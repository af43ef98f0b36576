#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace navvox {

// Static balanced KD-tree over a fixed point set with optional point removal.
//
// Points are identified by their position in the input span. Among equidistant
// points the lowest id wins, so callers that sort their points get a
// deterministic lexicographic tie-break for free.
template <int Dim>
class KdTree {
public:
    using Point = std::array<double, Dim>;

    KdTree() = default;

    explicit KdTree(std::span<const Point> points)
        : points_(points.begin(), points.end()), order_(points.size()), alive_count_(points.size()),
          alive_(points.size(), 1), slot_of_(points.size()) {
        std::iota(order_.begin(), order_.end(), std::uint32_t{0});
        build(0, order_.size(), 0);
        for (std::size_t slot = 0; slot < order_.size(); ++slot) slot_of_[order_[slot]] = static_cast<std::uint32_t>(slot);
    }

    std::size_t size() const { return points_.size(); }
    std::size_t alive() const { return order_.empty() ? 0 : alive_count_[order_.size() / 2]; }
    bool is_alive(std::uint32_t id) const { return alive_[id] != 0; }

    // Removes a point from future queries. No-op if already removed.
    void remove(std::uint32_t id) {
        if (!alive_[id]) return;
        alive_[id] = 0;
        const std::size_t target = slot_of_[id];
        std::size_t lo = 0;
        std::size_t hi = order_.size();
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            --alive_count_[mid];
            if (mid == target) break;
            if (target < mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }

    struct Hit {
        std::uint32_t id;
        double dist2;
    };

    std::optional<Hit> nearest(const Point& q) const {
        Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
        if (!order_.empty()) search(q, 0, order_.size(), 0, best);
        if (best.id == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
        return best;
    }

    // Appends ids of all alive points within `radius` (inclusive) to `out`, unordered.
    void within(const Point& q, double radius, std::vector<std::uint32_t>& out) const {
        if (!order_.empty()) collect(q, radius * radius, 0, order_.size(), 0, out);
    }

private:
    static double dist2(const Point& a, const Point& b) {
        double d = 0.0;
        for (int k = 0; k < Dim; ++k) {
            const double t = a[k] - b[k];
            d += t * t;
        }
        return d;
    }

    void build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return;
        const int axis = depth % Dim;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::uint32_t a, std::uint32_t b) {
                             if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                             return a < b;
                         });
        alive_count_[mid] = hi - lo;
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    void search(const Point& q, std::size_t lo, std::size_t hi, int depth, Hit& best) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        if (alive_count_[mid] == 0) return;
        const std::uint32_t id = order_[mid];
        if (alive_[id]) {
            const double d = dist2(q, points_[id]);
            if (d < best.dist2 || (d == best.dist2 && id < best.id)) best = {id, d};
        }
        const int axis = depth % Dim;
        const double diff = q[axis] - points_[id][axis];
        const bool left_first = diff <= 0.0;
        if (left_first) {
            search(q, lo, mid, depth + 1, best);
            if (diff * diff <= best.dist2) search(q, mid + 1, hi, depth + 1, best);
        } else {
            search(q, mid + 1, hi, depth + 1, best);
            if (diff * diff <= best.dist2) search(q, lo, mid, depth + 1, best);
        }
    }

    void collect(const Point& q, double r2, std::size_t lo, std::size_t hi, int depth, std::vector<std::uint32_t>& out) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        if (alive_count_[mid] == 0) return;
        const std::uint32_t id = order_[mid];
        if (alive_[id] && dist2(q, points_[id]) <= r2) out.push_back(id);
        const int axis = depth % Dim;
        const double diff = q[axis] - points_[id][axis];
        if (diff <= 0.0 || diff * diff <= r2) collect(q, r2, lo, mid, depth + 1, out);
        if (diff >= 0.0 || diff * diff <= r2) collect(q, r2, mid + 1, hi, depth + 1, out);
    }

    std::vector<Point> points_;
    std::vector<std::uint32_t> order_;
    std::vector<std::size_t> alive_count_;
    std::vector<std::uint8_t> alive_;
    std::vector<std::uint32_t> slot_of_;
};

}  // namespace navvox
