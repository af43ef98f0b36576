#include "navvox/importance.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace navvox {

namespace {

std::string normalize_kind(std::string s) {
    for (auto& c : s) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string weight_key(MarkerKind kind, const std::string& label) {
    return kind == MarkerKind::Custom ? "custom:" + label : to_string(kind);
}

}  // namespace

std::string to_string(MarkerKind kind) {
    switch (kind) {
        case MarkerKind::PatrolPath: return "patrol_path";
        case MarkerKind::SpawnPoint: return "spawn_point";
        case MarkerKind::InteractionZone: return "interaction_zone";
        case MarkerKind::Custom: return "custom";
    }
    return "custom";
}

MarkerKind parse_marker_kind(const std::string& text) {
    const std::string k = normalize_kind(text);
    if (k == "patrol_path" || k == "patrolpath") return MarkerKind::PatrolPath;
    if (k == "spawn_point" || k == "spawnpoint") return MarkerKind::SpawnPoint;
    if (k == "interaction_zone" || k == "interactionzone") return MarkerKind::InteractionZone;
    if (k == "custom") return MarkerKind::Custom;
    throw Error("unknown marker kind '" + text + "'");
}

void GameplayMarker::validate() const {
    if (!std::isfinite(position.x) || !std::isfinite(position.y) || !std::isfinite(position.z)) {
        throw Error("marker position must be finite");
    }
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw Error("marker weight must be finite and >= 0");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw Error("marker radius must be positive");
}

KindWeights::KindWeights()
    : defaults_{{"interaction_zone", 1.0}, {"spawn_point", 0.8}, {"patrol_path", 0.6}} {}

double KindWeights::default_for(MarkerKind kind, const std::string& label) const {
    if (auto o = override_for(kind, label)) return *o;
    const auto it = defaults_.find(weight_key(kind, label));
    return it == defaults_.end() ? 1.0 : it->second;
}

void KindWeights::set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error("weight override must look like kind=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    double w = 0.0;
    try {
        std::size_t used = 0;
        w = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw Error("invalid weight value '" + value + "'");
    }
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("weight override must be finite and >= 0");
    if (normalize_kind(key).rfind("custom:", 0) == 0) {
        key = "custom:" + key.substr(7);
    } else {
        key = to_string(parse_marker_kind(key));
    }
    overrides_[key] = w;
}

std::optional<double> KindWeights::override_for(MarkerKind kind, const std::string& label) const {
    const auto it = overrides_.find(weight_key(kind, label));
    if (it == overrides_.end()) return std::nullopt;
    return it->second;
}

std::vector<GameplayMarker> parse_markers(const std::string& json_text, const KindWeights& weights,
                                          const std::string& source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(source + ": " + e.what());
    }
    if (!doc.is_array()) throw Error(source + ": markers file must be a JSON array");
    std::vector<GameplayMarker> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& m = doc[i];
        const std::string where = source + ": marker " + std::to_string(i);
        try {
            GameplayMarker g;
            g.kind = parse_marker_kind(m.at("kind").get<std::string>());
            if (m.contains("label")) g.label = m.at("label").get<std::string>();
            const auto& p = m.at("position");
            if (!p.is_array() || p.size() != 3) throw Error("position must be [x, y, z]");
            g.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
            if (auto o = weights.override_for(g.kind, g.label)) {
                g.weight = *o;
            } else if (m.contains("weight")) {
                g.weight = m.at("weight").get<double>();
            } else {
                g.weight = weights.default_for(g.kind, g.label);
            }
            if (m.contains("radius")) g.radius = m.at("radius").get<double>();
            g.validate();
            out.push_back(std::move(g));
        } catch (const nlohmann::json::exception& e) {
            throw Error(where + ": " + e.what());
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    return out;
}

std::vector<GameplayMarker> load_markers(const std::filesystem::path& path, const KindWeights& weights) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open markers '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_markers(ss.str(), weights, path.string());
}

std::string format_markers(std::span<const GameplayMarker> markers) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& m : markers) {
        nlohmann::json j{{"kind", to_string(m.kind)},
                         {"position", {m.position.x, m.position.y, m.position.z}},
                         {"weight", m.weight},
                         {"radius", m.radius}};
        if (m.kind == MarkerKind::Custom) j["label"] = m.label;
        doc.push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

ImportanceField::ImportanceField(std::vector<double> values, std::vector<std::uint8_t> domain)
    : values_(std::move(values)), domain_(std::move(domain)) {
    if (values_.size() != domain_.size()) throw Error("importance values and domain differ in size");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!domain_[i]) {
            values_[i] = 0.0;
            continue;
        }
        if (!(values_[i] >= 0.0)) throw Error("importance must be non-negative");
        ++domain_size_;
        total_ += values_[i];
        max_ = std::max(max_, values_[i]);
    }
}

ImportanceField ImportanceField::restricted(std::span<const std::uint8_t> keep) const {
    if (keep.size() != values_.size()) throw Error("restriction mask size mismatch");
    std::vector<std::uint8_t> dom(domain_.size());
    for (std::size_t i = 0; i < dom.size(); ++i) dom[i] = domain_[i] && keep[i];
    return {values_, std::move(dom)};
}

ImportanceField ImportanceField::scaled(double k) const {
    if (!(k > 0.0)) throw Error("importance scale must be positive");
    auto v = values_;
    for (auto& x : v) x *= k;
    return {std::move(v), domain_};
}

namespace {

double importance_at(const Vec3& p, std::span<const GameplayMarker> markers) {
    double sum = 0.0;
    for (const auto& m : markers) {
        if (distance(p, m.position) <= m.radius) sum += m.weight;
    }
    return sum;
}

}  // namespace

ImportanceField compute_importance(const WalkGraph& graph, std::span<const GameplayMarker> markers) {
    for (const auto& m : markers) m.validate();
    std::vector<double> values(graph.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(graph.size()); ++i) {
        values[static_cast<std::size_t>(i)] = importance_at(graph.voxel(static_cast<std::uint32_t>(i)).center, markers);
    }
    return {std::move(values), std::vector<std::uint8_t>(graph.size(), 1)};
}

ImportanceField compute_importance_serial(const WalkGraph& graph, std::span<const GameplayMarker> markers) {
    for (const auto& m : markers) m.validate();
    std::vector<double> values;
    values.reserve(graph.size());
    for (const auto& v : graph.voxels()) values.push_back(importance_at(v.center, markers));
    return {std::move(values), std::vector<std::uint8_t>(graph.size(), 1)};
}

double coverage(const ImportanceField& field, std::span<const std::uint8_t> visited) {
    if (visited.size() != field.size()) throw Error("visited mask size mismatch");
    if (field.total() > 0.0) {
        double got = 0.0;
        for (std::uint32_t i = 0; i < visited.size(); ++i) {
            if (visited[i]) got += field.at(i);
        }
        return std::min(got / field.total(), 1.0);
    }
    if (field.domain_size() == 0) return 0.0;
    std::size_t n = 0;
    for (std::uint32_t i = 0; i < visited.size(); ++i) n += visited[i] && field.in_domain(i);
    return static_cast<double>(n) / static_cast<double>(field.domain_size());
}

double importance_scale(std::span<const GameplayMarker> markers) {
    double w = 0.0;
    for (const auto& m : markers) w = std::max(w, m.weight);
    return w > 0.0 ? w : 1.0;
}

}  // namespace navvox
