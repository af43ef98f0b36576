#include "navvox/geom.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "text_io.hpp"

namespace navvox {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

double HeightField::sample(double x, double y) const {
    if (!contains(x, y)) throw Error("height query outside heightfield footprint");
    const double fx = (x - origin.x) / cell_size;
    const double fy = (y - origin.y) / cell_size;
    const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, width - 2);
    const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, depth - 2);
    const double tx = fx - i0;
    const double ty = fy - j0;
    const double h00 = at(i0, j0);
    const double h10 = at(i0 + 1, j0);
    const double h01 = at(i0, j0 + 1);
    const double h11 = at(i0 + 1, j0 + 1);
    return (h00 * (1.0 - tx) + h10 * tx) * (1.0 - ty) + (h01 * (1.0 - tx) + h11 * tx) * ty;
}

void HeightField::validate() const {
    if (width < 2 || depth < 2) throw Error("heightfield needs at least 2x2 samples");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw Error("heightfield cell_size must be positive");
    if (heights.size() != static_cast<std::size_t>(width) * depth) throw Error("heightfield sample count mismatch");
    for (double h : heights) {
        if (!std::isfinite(h)) throw Error("non-finite height in heightfield");
    }
}

HeightField parse_heightfield(std::istream& in, const std::string& source) {
    detail::LineReader reader(in, source);
    std::string line;
    if (!reader.next(line) || detail::split_ws(line) != std::vector<std::string_view>{"NAVVOX-HF", "v1"}) {
        reader.fail("expected header 'NAVVOX-HF v1'");
    }

    HeightField hf;
    if (!reader.next(line)) reader.fail("missing 'origin' line");
    auto tok = detail::split_ws(line);
    if (tok.size() != 4 || tok[0] != "origin") reader.fail("expected 'origin x y z'");
    hf.origin = {reader.to_double(tok[1]), reader.to_double(tok[2]), reader.to_double(tok[3])};

    if (!reader.next(line)) reader.fail("missing 'cell_size' line");
    tok = detail::split_ws(line);
    if (tok.size() != 2 || tok[0] != "cell_size") reader.fail("expected 'cell_size c'");
    hf.cell_size = reader.to_double(tok[1]);
    if (!(hf.cell_size > 0.0)) reader.fail("cell_size must be positive");

    if (!reader.next(line)) reader.fail("missing 'size' line");
    tok = detail::split_ws(line);
    if (tok.size() != 3 || tok[0] != "size") reader.fail("expected 'size width depth'");
    const long long w = reader.to_int(tok[1]);
    const long long d = reader.to_int(tok[2]);
    if (w < 2 || d < 2 || w > 1'000'000 || d > 1'000'000) reader.fail("width and depth must be >= 2");
    hf.width = static_cast<int>(w);
    hf.depth = static_cast<int>(d);

    const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(d);
    hf.heights.reserve(expected);
    while (hf.heights.size() < expected && reader.next(line)) {
        for (auto t : detail::split_ws(line)) {
            if (hf.heights.size() == expected) reader.fail("too many height samples");
            const double h = reader.to_double(t);
            if (!std::isfinite(h)) reader.fail("non-finite height '" + std::string(t) + "'");
            hf.heights.push_back(h);
        }
    }
    if (hf.heights.size() != expected) {
        reader.fail("expected " + std::to_string(expected) + " heights, got " + std::to_string(hf.heights.size()));
    }
    if (reader.next(line)) reader.fail("trailing data after height samples");
    return hf;
}

HeightField load_heightfield(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_heightfield(in, path.string());
}

std::string format_heightfield(const HeightField& hf) {
    std::string out = "NAVVOX-HF v1\norigin ";
    detail::append_double(out, hf.origin.x);
    out += ' ';
    detail::append_double(out, hf.origin.y);
    out += ' ';
    detail::append_double(out, hf.origin.z);
    out += "\ncell_size ";
    detail::append_double(out, hf.cell_size);
    out += "\nsize " + std::to_string(hf.width) + ' ' + std::to_string(hf.depth) + '\n';
    for (int j = 0; j < hf.depth; ++j) {
        for (int i = 0; i < hf.width; ++i) {
            if (i) out += ' ';
            detail::append_double(out, hf.heights[static_cast<std::size_t>(j) * hf.width + i]);
        }
        out += '\n';
    }
    return out;
}

void save_heightfield(const HeightField& hf, const std::filesystem::path& path) { write_text(path, format_heightfield(hf)); }

std::size_t drop_degenerate_triangles(CollisionMesh& mesh) {
    const auto before = mesh.triangles.size();
    std::erase_if(mesh.triangles, [&](const std::array<std::uint32_t, 3>& t) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        return 0.5 * n.norm() < 1e-12;
    });
    return before - mesh.triangles.size();
}

CollisionMesh parse_mesh(std::istream& in, const std::string& source, std::size_t* dropped) {
    detail::LineReader reader(in, source);
    CollisionMesh mesh;
    std::string line;
    std::vector<std::array<long long, 3>> faces;
    std::vector<std::size_t> face_lines;
    while (reader.next(line, true)) {
        const auto tok = detail::split_ws(line);
        if (tok[0].front() == '#') {
            if (line.find("navvox:") != std::string::npos && line.find("nav_excluded") != std::string::npos) {
                mesh.nav_excluded = true;
            }
            continue;
        }
        if (tok[0] == "v") {
            if (tok.size() != 4) reader.fail("expected 'v x y z'");
            const Vec3 p{reader.to_double(tok[1]), reader.to_double(tok[2]), reader.to_double(tok[3])};
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) reader.fail("non-finite vertex");
            mesh.vertices.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() != 4) reader.fail("only triangular faces are supported");
            std::array<long long, 3> f{};
            for (int k = 0; k < 3; ++k) {
                // Accept "i/t/n" corner syntax; only the position index matters.
                const auto slash = tok[k + 1].find('/');
                f[k] = reader.to_int(tok[k + 1].substr(0, slash));
            }
            faces.push_back(f);
            face_lines.push_back(reader.line());
        }
        // Other OBJ statements (o, g, s, vn, vt, usemtl, ...) carry nothing we use.
    }
    for (std::size_t i = 0; i < faces.size(); ++i) {
        std::array<std::uint32_t, 3> t{};
        for (int k = 0; k < 3; ++k) {
            const long long idx = faces[i][k];
            if (idx < 1 || idx > static_cast<long long>(mesh.vertices.size())) {
                throw ParseError(source, face_lines[i], "face index " + std::to_string(idx) + " out of range");
            }
            t[k] = static_cast<std::uint32_t>(idx - 1);
        }
        mesh.triangles.push_back(t);
    }
    const std::size_t removed = drop_degenerate_triangles(mesh);
    if (dropped) *dropped = removed;
    return mesh;
}

CollisionMesh load_mesh(const std::filesystem::path& path, std::size_t* dropped) {
    auto in = open_input(path);
    return parse_mesh(in, path.string(), dropped);
}

std::string format_mesh(const CollisionMesh& mesh) {
    std::string out;
    if (mesh.nav_excluded) out += "# navvox: nav_excluded\n";
    for (const Vec3& v : mesh.vertices) {
        out += "v ";
        detail::append_double(out, v.x);
        out += ' ';
        detail::append_double(out, v.y);
        out += ' ';
        detail::append_double(out, v.z);
        out += '\n';
    }
    for (const auto& t : mesh.triangles) {
        out += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' + std::to_string(t[2] + 1) + '\n';
    }
    return out;
}

void save_mesh(const CollisionMesh& mesh, const std::filesystem::path& path) { write_text(path, format_mesh(mesh)); }

Region Region::around(const Vec3& seed, double half_extent) {
    if (!(half_extent > 0.0)) throw Error("region half_extent must be positive");
    const Vec3 h{half_extent, half_extent, half_extent};
    return {seed - h, seed + h};
}

Region Region::from_corners(const Vec3& a, const Vec3& b) {
    Region r{{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
             {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
    if (!(r.max.x > r.min.x && r.max.y > r.min.y && r.max.z > r.min.z)) throw Error("region must have positive extent");
    return r;
}

GridFrame GridFrame::for_region(const Region& region, double resolution) {
    if (!(resolution > 0.0)) throw Error("voxel resolution must be positive");
    auto snap = [&](double v) { return std::floor(v / resolution) * resolution; };
    return {{snap(region.min.x), snap(region.min.y), snap(region.min.z)}, resolution};
}

IndexRange region_cells(const GridFrame& f, const Region& region) {
    auto lo = [&](double mn, double o) { return static_cast<std::int32_t>(std::ceil((mn - o) / f.resolution - 0.5)); };
    return {{lo(region.min.x, f.origin.x), lo(region.min.y, f.origin.y), lo(region.min.z, f.origin.z)},
            {lo(region.max.x, f.origin.x), lo(region.max.y, f.origin.y), lo(region.max.z, f.origin.z)}};
}

const Voxel* VoxelGrid::terrain_at(std::int32_t x, std::int32_t y) const {
    const auto it = terrain_column_.find(pack_column(x, y));
    return it == terrain_column_.end() ? nullptr : &terrain_[it->second];
}

std::span<const std::int32_t> VoxelGrid::occupied_column(std::int32_t x, std::int32_t y) const {
    const auto it = occupied_columns_.find(pack_column(x, y));
    if (it == occupied_columns_.end()) return {};
    return it->second;
}

const Voxel& VoxelGrid::nearest(const Vec3& p) const {
    if (cells_.empty()) throw Error("nearest-voxel query on an empty grid");
    const auto hit = index_.nearest({p.x, p.y, p.z});
    return cells_[hit->id];
}

VoxelGrid build_grid(VoxelSet terrain, VoxelSet occupied) {
    if (!(terrain.frame == occupied.frame)) throw Error("terrain and occupancy voxels use different grid frames/resolutions");
    VoxelGrid g;
    g.frame_ = terrain.frame;
    g.terrain_ = std::move(terrain.voxels);
    g.occupied_ = std::move(occupied.voxels);
    auto by_index = [](const Voxel& a, const Voxel& b) { return a.index < b.index; };
    std::sort(g.terrain_.begin(), g.terrain_.end(), by_index);
    std::sort(g.occupied_.begin(), g.occupied_.end(), by_index);

    for (std::uint32_t i = 0; i < g.terrain_.size(); ++i) {
        const auto& v = g.terrain_[i];
        if (!g.terrain_column_.emplace(pack_column(v.index.x, v.index.y), i).second) {
            throw Error("more than one terrain voxel in a column");
        }
    }
    g.occupied_keys_.reserve(g.occupied_.size());
    for (const auto& v : g.occupied_) {
        g.occupied_keys_.insert(pack(v.index));
        g.occupied_columns_[pack_column(v.index.x, v.index.y)].push_back(v.index.z);
    }

    g.cells_.reserve(g.terrain_.size() + g.occupied_.size());
    std::merge(g.terrain_.begin(), g.terrain_.end(), g.occupied_.begin(), g.occupied_.end(), std::back_inserter(g.cells_),
               by_index);
    // Stable merge keeps the terrain copy first among equal indices.
    g.cells_.erase(std::unique(g.cells_.begin(), g.cells_.end(),
                               [](const Voxel& a, const Voxel& b) { return a.index == b.index; }),
                   g.cells_.end());

    std::vector<KdTree<3>::Point> pts;
    pts.reserve(g.cells_.size());
    for (const auto& v : g.cells_) pts.push_back({v.center.x, v.center.y, v.center.z});
    g.index_ = KdTree<3>(pts);
    return g;
}

Voxel nearest_voxel(const VoxelGrid& grid, const Vec3& p) { return grid.nearest(p); }

}  // namespace navvox
