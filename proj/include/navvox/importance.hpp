#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "navvox/core.hpp"
#include "navvox/walk.hpp"

namespace navvox {

enum class MarkerKind : std::uint8_t { PatrolPath, SpawnPoint, InteractionZone, Custom };

std::string to_string(MarkerKind kind);
/// Accepts "patrol_path", "spawn_point", "interaction_zone" and "custom"
/// (case-insensitive, '-' or '_'). Throws navvox::Error otherwise.
MarkerKind parse_marker_kind(const std::string& text);

struct GameplayMarker {
    Vec3 position;
    MarkerKind kind = MarkerKind::Custom;
    std::string label;  // only meaningful for Custom markers
    double weight = 0.0;
    double radius = 5.0;

    void validate() const;
};

/// Per-kind default weights plus command-line overrides.
class KindWeights {
public:
    KindWeights();

    /// Weight for a marker that does not state its own.
    double default_for(MarkerKind kind, const std::string& label = {}) const;
    /// Applies "kind=value" (or "custom:label=value"). Overrides beat per-marker weights.
    void set_override(const std::string& assignment);
    std::optional<double> override_for(MarkerKind kind, const std::string& label = {}) const;

private:
    std::map<std::string, double> defaults_;
    std::map<std::string, double> overrides_;
};

/// Parses a JSON array of {kind, position:[x,y,z], weight?, radius?, label?}.
std::vector<GameplayMarker> parse_markers(const std::string& json_text, const KindWeights& weights = {},
                                          const std::string& source = "<markers>");
std::vector<GameplayMarker> load_markers(const std::filesystem::path& path, const KindWeights& weights = {});
std::string format_markers(std::span<const GameplayMarker> markers);

/// Importance I(v) per walk-graph node over a domain of nodes (all of V_w, or
/// a restriction such as the reachable set). Nodes outside the domain hold 0.
class ImportanceField {
public:
    ImportanceField() = default;
    ImportanceField(std::vector<double> values, std::vector<std::uint8_t> domain);

    std::size_t size() const { return values_.size(); }
    double at(std::uint32_t node) const { return values_[node]; }
    const std::vector<double>& values() const { return values_; }
    bool in_domain(std::uint32_t node) const { return domain_[node] != 0; }
    std::size_t domain_size() const { return domain_size_; }
    double total() const { return total_; }
    double max_value() const { return max_; }

    /// Same field with values outside `keep` zeroed and the domain narrowed to it.
    ImportanceField restricted(std::span<const std::uint8_t> keep) const;
    /// Values multiplied by k (k > 0).
    ImportanceField scaled(double k) const;

private:
    std::vector<double> values_;
    std::vector<std::uint8_t> domain_;
    std::size_t domain_size_ = 0;
    double total_ = 0.0;
    double max_ = 0.0;
};

/// I(v) = sum of weights of markers whose radius ball contains v's center.
/// Nodes are evaluated in parallel; per-node summation order is the marker order.
ImportanceField compute_importance(const WalkGraph& graph, std::span<const GameplayMarker> markers);

/// Single-threaded reference for compute_importance.
ImportanceField compute_importance_serial(const WalkGraph& graph, std::span<const GameplayMarker> markers);

/// Importance-weighted fraction of the field covered by `visited` (a node
/// mask). When the field total is 0 this is the fraction of domain nodes visited.
double coverage(const ImportanceField& field, std::span<const std::uint8_t> visited);

/// Largest marker weight, or 1 when there are no positive weights. Used to put
/// rewards and features on a scale independent of the weight units.
double importance_scale(std::span<const GameplayMarker> markers);

}  // namespace navvox
