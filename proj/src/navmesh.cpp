#include "navvox/navmesh.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "text_io.hpp"

namespace navvox {

void NavQueryConfig::validate() const {
    if (!(proj_radius >= 0.0)) throw Error("projection radius must be non-negative");
    if (!(height_tol >= 0.0)) throw Error("height tolerance must be non-negative");
}

namespace {

double cross_xy(const Vec3& o, const Vec3& a, const Vec3& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double segment_distance_xy(double px, double py, const Vec3& a, const Vec3& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
}

}  // namespace

NavMesh NavMesh::from_polygons(std::vector<Vec3> vertices, std::vector<std::vector<std::uint32_t>> polygons) {
    NavMesh m;
    m.vertices_ = std::move(vertices);
    m.polygons_ = std::move(polygons);
    const auto nv = m.vertices_.size();
    const auto np = m.polygons_.size();

    for (const auto& v : m.vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) throw Error("non-finite navmesh vertex");
    }

    m.planes_.resize(np);
    m.bounds_.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
        const auto& poly = m.polygons_[p];
        const std::string tag = "polygon " + std::to_string(p);
        if (poly.size() < 3) throw Error(tag + " has fewer than 3 vertices");
        for (auto i : poly) {
            if (i >= nv) throw Error(tag + " references vertex " + std::to_string(i) + " out of range");
        }
        auto sorted = poly;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error(tag + " repeats a vertex");

        // Newell normal and centroid.
        Vec3 n;
        Vec3 c;
        Aabb box{m.vertices_[poly[0]], m.vertices_[poly[0]]};
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const Vec3& a = m.vertices_[poly[k]];
            const Vec3& b = m.vertices_[poly[(k + 1) % poly.size()]];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
            c = c + a;
            box.min = {std::min(box.min.x, a.x), std::min(box.min.y, a.y), std::min(box.min.z, a.z)};
            box.max = {std::max(box.max.x, a.x), std::max(box.max.y, a.y), std::max(box.max.z, a.z)};
        }
        c = c * (1.0 / static_cast<double>(poly.size()));
        if (!(n.z > 1e-12)) throw Error(tag + " is not counter-clockwise seen from above or has no area");
        n = n * (1.0 / n.norm());
        for (auto i : poly) {
            if (std::abs(n.dot(m.vertices_[i] - c)) > kPlanarityTolerance) throw Error(tag + " is not planar");
        }
        const double scale = std::max(box.max.x - box.min.x, box.max.y - box.min.y);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const Vec3& a = m.vertices_[poly[k]];
            const Vec3& b = m.vertices_[poly[(k + 1) % poly.size()]];
            const Vec3& d = m.vertices_[poly[(k + 2) % poly.size()]];
            if (cross_xy(a, b, d) < -1e-9 * scale * scale) throw Error(tag + " is not convex");
        }
        m.planes_[p] = {n, n.dot(c)};
        m.bounds_[p] = box;
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> edges;
    for (std::uint32_t p = 0; p < np; ++p) {
        const auto& poly = m.polygons_[p];
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const auto a = poly[k];
            const auto b = poly[(k + 1) % poly.size()];
            edges[{std::min(a, b), std::max(a, b)}].push_back(p);
        }
    }
    m.adjacency_.assign(np, {});
    for (const auto& [e, owners] : edges) {
        if (owners.size() > 2) {
            throw Error("non-manifold edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) + ") shared by " +
                        std::to_string(owners.size()) + " polygons");
        }
        if (owners.size() == 2 && owners[0] != owners[1]) {
            m.adjacency_[owners[0]].push_back(owners[1]);
            m.adjacency_[owners[1]].push_back(owners[0]);
        }
    }
    for (auto& adj : m.adjacency_) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }

    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    m.component_.assign(np, unset);
    for (std::uint32_t p = 0; p < np; ++p) {
        if (m.component_[p] != unset) continue;
        const auto label = m.component_count_++;
        std::deque<std::uint32_t> queue{p};
        m.component_[p] = label;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto w : m.adjacency_[u]) {
                if (m.component_[w] == unset) {
                    m.component_[w] = label;
                    queue.push_back(w);
                }
            }
        }
    }

    m.build_buckets();
    return m;
}

void NavMesh::build_buckets() {
    buckets_.clear();
    bucket_nx_ = bucket_ny_ = 0;
    if (polygons_.empty()) return;
    double x0 = bounds_[0].min.x, y0 = bounds_[0].min.y, x1 = bounds_[0].max.x, y1 = bounds_[0].max.y;
    double extent = 0.0;
    for (const auto& b : bounds_) {
        x0 = std::min(x0, b.min.x);
        y0 = std::min(y0, b.min.y);
        x1 = std::max(x1, b.max.x);
        y1 = std::max(y1, b.max.y);
        extent += std::max(b.max.x - b.min.x, b.max.y - b.min.y);
    }
    bucket_size_ = std::max(extent / static_cast<double>(bounds_.size()), 1e-6);
    // Cap the bucket count for degenerate layouts.
    while ((x1 - x0) / bucket_size_ * (y1 - y0) / bucket_size_ > 4.0e6) bucket_size_ *= 2.0;
    bucket_x0_ = x0;
    bucket_y0_ = y0;
    bucket_nx_ = static_cast<std::int64_t>(std::floor((x1 - x0) / bucket_size_)) + 1;
    bucket_ny_ = static_cast<std::int64_t>(std::floor((y1 - y0) / bucket_size_)) + 1;
    buckets_.assign(static_cast<std::size_t>(bucket_nx_ * bucket_ny_), {});
    for (std::uint32_t p = 0; p < bounds_.size(); ++p) {
        const auto& b = bounds_[p];
        const auto bx0 = static_cast<std::int64_t>(std::floor((b.min.x - x0) / bucket_size_));
        const auto bx1 = static_cast<std::int64_t>(std::floor((b.max.x - x0) / bucket_size_));
        const auto by0 = static_cast<std::int64_t>(std::floor((b.min.y - y0) / bucket_size_));
        const auto by1 = static_cast<std::int64_t>(std::floor((b.max.y - y0) / bucket_size_));
        for (auto bx = bx0; bx <= bx1; ++bx) {
            for (auto by = by0; by <= by1; ++by) buckets_[static_cast<std::size_t>(by * bucket_nx_ + bx)].push_back(p);
        }
    }
}

double NavMesh::height_at(std::uint32_t poly, double x, double y) const {
    const Plane& pl = planes_[poly];
    return (pl.offset - pl.normal.x * x - pl.normal.y * y) / pl.normal.z;
}

double NavMesh::footprint_distance(std::uint32_t poly, double x, double y) const {
    const auto& ids = polygons_[poly];
    const Vec3 q{x, y, 0.0};
    bool inside = true;
    for (std::size_t k = 0; k < ids.size() && inside; ++k) {
        if (cross_xy(vertices_[ids[k]], vertices_[ids[(k + 1) % ids.size()]], q) < 0.0) inside = false;
    }
    if (inside) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ids.size(); ++k) {
        best = std::min(best, segment_distance_xy(x, y, vertices_[ids[k]], vertices_[ids[(k + 1) % ids.size()]]));
    }
    return best;
}

void NavMesh::candidates(double x, double y, double radius, std::vector<std::uint32_t>& out) const {
    out.clear();
    if (buckets_.empty()) return;
    const auto clampx = [&](double v) {
        return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - bucket_x0_) / bucket_size_)), 0, bucket_nx_ - 1);
    };
    const auto clampy = [&](double v) {
        return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - bucket_y0_) / bucket_size_)), 0, bucket_ny_ - 1);
    };
    const double max_x = bucket_x0_ + static_cast<double>(bucket_nx_) * bucket_size_;
    const double max_y = bucket_y0_ + static_cast<double>(bucket_ny_) * bucket_size_;
    if (x + radius < bucket_x0_ || y + radius < bucket_y0_ || x - radius > max_x || y - radius > max_y) return;
    for (auto bx = clampx(x - radius); bx <= clampx(x + radius); ++bx) {
        for (auto by = clampy(y - radius); by <= clampy(y + radius); ++by) {
            for (auto p : buckets_[static_cast<std::size_t>(by * bucket_nx_ + bx)]) {
                const auto& b = bounds_[p];
                if (x + radius >= b.min.x && x - radius <= b.max.x && y + radius >= b.min.y && y - radius <= b.max.y) {
                    out.push_back(p);
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

double NavMesh::distance_to_component(double x, double y, std::uint32_t comp) const {
    const double inf = std::numeric_limits<double>::infinity();
    if (buckets_.empty() || comp >= component_count_) return inf;
    const double far_x = std::max(std::abs(x - bucket_x0_), std::abs(x - (bucket_x0_ + bucket_nx_ * bucket_size_)));
    const double far_y = std::max(std::abs(y - bucket_y0_), std::abs(y - (bucket_y0_ + bucket_ny_ * bucket_size_)));
    const double span = std::hypot(far_x, far_y);
    std::vector<std::uint32_t> cand;
    for (double r = bucket_size_;; r *= 2.0) {
        candidates(x, y, r, cand);
        double best = inf;
        for (auto p : cand) {
            if (component_[p] == comp) best = std::min(best, footprint_distance(p, x, y));
        }
        // Any polygon within r has bounds within r, so it is a candidate.
        if (best <= r) return best;
        if (r > span) return best;
    }
}

namespace {

void expect_header(detail::LineReader& rd, std::string& line) {
    if (!rd.next(line)) rd.fail("empty navmesh file");
    const auto tok = detail::split_ws(line);
    if (tok.size() != 2 || tok[0] != "NAVVOX-NM" || tok[1] != "v1") rd.fail("expected header 'NAVVOX-NM v1'");
}

}  // namespace

NavMesh parse_navmesh(std::istream& in, const std::string& source) {
    detail::LineReader rd(in, source);
    std::string line;
    expect_header(rd, line);
    std::vector<Vec3> vertices;
    std::vector<std::vector<std::uint32_t>> polygons;
    std::vector<std::size_t> poly_lines;
    while (rd.next(line)) {
        const auto tok = detail::split_ws(line);
        if (tok[0] == "v") {
            if (tok.size() != 4) rd.fail("vertex needs 3 coordinates");
            const Vec3 v{rd.to_double(tok[1]), rd.to_double(tok[2]), rd.to_double(tok[3])};
            if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) rd.fail("non-finite vertex coordinate");
            vertices.push_back(v);
        } else if (tok[0] == "p") {
            if (tok.size() < 4) rd.fail("polygon needs at least 3 vertices");
            std::vector<std::uint32_t> poly;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const auto i = rd.to_int(tok[k]);
                if (i < 1 || static_cast<std::size_t>(i) > vertices.size()) rd.fail("vertex index out of range");
                poly.push_back(static_cast<std::uint32_t>(i - 1));
            }
            polygons.push_back(std::move(poly));
            poly_lines.push_back(rd.line());
        } else {
            rd.fail("unknown record '" + std::string(tok[0]) + "'");
        }
    }
    try {
        return NavMesh::from_polygons(std::move(vertices), std::move(polygons));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        // Point at the offending polygon line when the message names one.
        const std::string msg = e.what();
        std::size_t line_no = 0;
        if (msg.rfind("polygon ", 0) == 0) {
            const auto idx = std::stoul(msg.substr(8));
            if (idx < poly_lines.size()) line_no = poly_lines[idx];
        }
        throw ParseError(source, line_no, msg);
    }
}

NavMesh load_navmesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open navmesh '" + path.string() + "'");
    return parse_navmesh(in, path.string());
}

std::string format_navmesh(const NavMesh& mesh) {
    std::string out = "NAVVOX-NM v1\n";
    for (const auto& v : mesh.vertices()) {
        out += "v ";
        detail::append_double(out, v.x);
        out += ' ';
        detail::append_double(out, v.y);
        out += ' ';
        detail::append_double(out, v.z);
        out += '\n';
    }
    for (const auto& p : mesh.polygons()) {
        out += 'p';
        for (auto i : p) {
            out += ' ';
            out += std::to_string(i + 1);
        }
        out += '\n';
    }
    return out;
}

void save_navmesh(const NavMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write navmesh '" + path.string() + "'");
    out << format_navmesh(mesh);
}

std::optional<std::uint32_t> project_point(const NavMesh& mesh, const Vec3& p, const NavQueryConfig& cfg) {
    thread_local std::vector<std::uint32_t> cand;
    mesh.candidates(p.x, p.y, cfg.proj_radius, cand);
    std::optional<std::uint32_t> best;
    double best_dz = std::numeric_limits<double>::infinity();
    for (auto poly : cand) {
        if (mesh.footprint_distance(poly, p.x, p.y) > cfg.proj_radius) continue;
        const double dz = std::abs(p.z - mesh.height_at(poly, p.x, p.y));
        if (dz > cfg.height_tol) continue;
        if (dz < best_dz) {
            best_dz = dz;
            best = poly;
        }
    }
    return best;
}

bool nav_reachable(const NavMesh& mesh, const Vec3& seed, const Vec3& query, const NavQueryConfig& cfg) {
    return NavReachability(mesh, seed, cfg).reachable(query);
}

NavReachability::NavReachability(const NavMesh& mesh, const Vec3& seed, const NavQueryConfig& cfg) : mesh_(&mesh), cfg_(cfg) {
    cfg.validate();
    const auto s = project_point(mesh, seed, cfg);
    if (!s) throw Error("navmesh seed point does not project onto any polygon");
    seed_polygon_ = *s;
}

bool NavReachability::reachable(const Vec3& query) const {
    const auto q = project_point(*mesh_, query, cfg_);
    return q && mesh_->component(*q) == seed_component();
}

}  // namespace navvox
