#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbem/errors.hpp"
#include "pbem/geometry.hpp"

namespace pbem {

using TriIndex = std::array<int, 3>;

/// Closed triangulated interface. Normals (from vertex order) point out of the solute.
/// Optionally records, for every triangle, the triangle of a coarser mesh it came from.
class SurfaceMesh {
public:
    SurfaceMesh() = default;
    SurfaceMesh(std::vector<Vec3> vertices, std::vector<TriIndex> triangles, std::vector<int> parent_map = {})
        : vertices_(std::move(vertices)), triangles_(std::move(triangles)), parent_(std::move(parent_map)) {
        if (!parent_.empty() && parent_.size() != triangles_.size())
            throw MeshError("parent map size does not match triangle count");
    }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<TriIndex>& triangles() const { return triangles_; }
    const std::vector<int>& parent_map() const { return parent_; }
    bool has_parent_map() const { return !parent_.empty(); }

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_triangles() const { return triangles_.size(); }

    Triangle triangle(std::size_t i) const {
        const auto& t = triangles_[i];
        return Triangle(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
    }

    std::vector<Triangle> panels() const {
        std::vector<Triangle> out;
        out.reserve(triangles_.size());
        for (std::size_t i = 0; i < triangles_.size(); ++i) out.push_back(triangle(i));
        return out;
    }

    double area() const {
        double s = 0.0;
        for (std::size_t i = 0; i < triangles_.size(); ++i) s += triangle(i).area;
        return s;
    }

    /// Sum of det[a b c] / 6; positive for outward orientation.
    double signed_volume() const {
        double s = 0.0;
        for (const auto& t : triangles_)
            s += vertices_[t[0]].dot(vertices_[t[1]].cross(vertices_[t[2]]));
        return s / 6.0;
    }

    double mean_edge_length() const {
        double s = 0.0;
        for (const auto& t : triangles_)
            for (int k = 0; k < 3; ++k) s += (vertices_[t[k]] - vertices_[t[(k + 1) % 3]]).norm();
        return triangles_.empty() ? 0.0 : s / (3.0 * triangles_.size());
    }

    SurfaceMesh with_parent_map(std::vector<int> parent_map) const {
        return SurfaceMesh(vertices_, triangles_, std::move(parent_map));
    }

    SurfaceMesh flipped() const {
        auto tris = triangles_;
        for (auto& t : tris) std::swap(t[1], t[2]);
        return SurfaceMesh(vertices_, std::move(tris), parent_);
    }

private:
    std::vector<Vec3> vertices_;
    std::vector<TriIndex> triangles_;
    std::vector<int> parent_;
};

inline std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

/// For every triangle the neighbour across local edge k = (v_k, v_{k+1}).
/// Throws MeshError unless every edge has exactly two consistently oriented triangles.
inline std::vector<std::array<int, 3>> triangle_neighbors(const SurfaceMesh& mesh) {
    const auto& tris = mesh.triangles();
    std::unordered_map<std::uint64_t, std::array<int, 2>> edges;
    edges.reserve(tris.size() * 2);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int a = tris[t][k], b = tris[t][(k + 1) % 3];
            if (a == b) throw MeshError("triangle " + std::to_string(t) + " has a repeated vertex");
            auto [it, inserted] = edges.try_emplace(edge_key(a, b), std::array<int, 2>{-1, -1});
            auto& slot = it->second;
            const int code = static_cast<int>(t) * 3 + k;
            if (slot[0] < 0) slot[0] = code;
            else if (slot[1] < 0) slot[1] = code;
            else throw MeshError("edge shared by more than two triangles");
        }
    }
    std::vector<std::array<int, 3>> nbr(tris.size(), {-1, -1, -1});
    for (const auto& [key, slot] : edges) {
        if (slot[1] < 0) throw MeshError("open surface: boundary edge found");
        const int t0 = slot[0] / 3, k0 = slot[0] % 3, t1 = slot[1] / 3, k1 = slot[1] % 3;
        if (tris[t0][k0] == tris[t1][k1])
            throw MeshError("inconsistent orientation between triangles " + std::to_string(t0) + " and " +
                            std::to_string(t1));
        nbr[t0][k0] = t1;
        nbr[t1][k1] = t0;
    }
    return nbr;
}

/// Checks every SurfaceMesh invariant; throws MeshError on the first violation.
inline void validate(const SurfaceMesh& mesh, double duplicate_tol = 1e-10) {
    if (mesh.num_triangles() < 4) throw MeshError("a closed surface needs at least four triangles");
    for (const auto& t : mesh.triangles())
        for (int v : t)
            if (v < 0 || static_cast<std::size_t>(v) >= mesh.num_vertices())
                throw MeshError("triangle references a missing vertex");
    triangle_neighbors(mesh);
    const double scale = mesh.mean_edge_length();
    for (std::size_t i = 0; i < mesh.num_triangles(); ++i)
        if (!(mesh.triangle(i).area > 1e-14 * scale * scale))
            throw MeshError("triangle " + std::to_string(i) + " has zero area");
    if (!(mesh.signed_volume() > 0.0)) throw MeshError("mesh is not outward oriented (signed volume <= 0)");

    // Duplicate vertices: sort along x and compare within the tolerance window.
    const auto& v = mesh.vertices();
    std::vector<int> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a].x() < v[b].x(); });
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size() && v[order[j]].x() - v[order[i]].x() <= duplicate_tol; ++j)
            if ((v[order[i]] - v[order[j]]).norm() <= duplicate_tol)
                throw MeshError("duplicate vertices " + std::to_string(order[i]) + " and " + std::to_string(order[j]));
}

/// Icosahedron subdivided `level` times with every vertex projected on the sphere.
inline SurfaceMesh icosphere(double radius, int level, const Vec3& center = Vec3::Zero()) {
    if (level < 0) throw ConfigError("icosphere level must be non-negative");
    if (!(radius > 0.0)) throw ConfigError("icosphere radius must be positive");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<TriIndex> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::unordered_map<std::uint64_t, int> mid;
        auto midpoint = [&](int a, int b) {
            auto [it, inserted] = mid.try_emplace(edge_key(a, b), static_cast<int>(v.size()));
            if (inserted) v.push_back((0.5 * (v[a] + v[b])).normalized());
            return it->second;
        };
        std::vector<TriIndex> nf;
        nf.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
            nf.push_back({tri[0], ab, ca});
            nf.push_back({ab, tri[1], bc});
            nf.push_back({ca, bc, tri[2]});
            nf.push_back({ab, bc, ca});
        }
        f = std::move(nf);
    }
    for (auto& p : v) p = center + radius * p;
    SurfaceMesh m(std::move(v), std::move(f));
    return m.signed_volume() < 0.0 ? m.flipped() : m;
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(s, &pos);
        if (pos != s.size()) throw ParseError("bad number '" + s + "'", line);
        return d;
    } catch (const std::logic_error&) {
        throw ParseError("bad number '" + s + "'", line);
    }
}

inline long parse_int(const std::string& s, std::size_t line) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw ParseError("bad integer '" + s + "'", line);
        return v;
    } catch (const std::logic_error&) {
        throw ParseError("bad integer '" + s + "'", line);
    }
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

} // namespace detail

/// Reads an MSMS .vert/.face pair. The first three lines of each file are headers; later
/// lines starting with '#' and blank lines are ignored. Face indices are 1-based.
inline SurfaceMesh load_msms(const std::string& vert_path, const std::string& face_path) {
    constexpr std::size_t header_lines = 3;
    std::vector<Vec3> verts;
    {
        auto in = detail::open_input(vert_path);
        std::string line;
        for (std::size_t no = 1; std::getline(in, line); ++no) {
            if (no <= header_lines) continue;
            auto tok = detail::split_ws(line);
            if (tok.empty() || tok[0][0] == '#') continue;
            if (tok.size() < 3) throw ParseError(vert_path + ": vertex line needs at least 3 columns", no);
            verts.emplace_back(detail::parse_double(tok[0], no), detail::parse_double(tok[1], no),
                               detail::parse_double(tok[2], no));
        }
    }
    std::vector<TriIndex> tris;
    {
        auto in = detail::open_input(face_path);
        std::string line;
        for (std::size_t no = 1; std::getline(in, line); ++no) {
            if (no <= header_lines) continue;
            auto tok = detail::split_ws(line);
            if (tok.empty() || tok[0][0] == '#') continue;
            if (tok.size() < 3) throw ParseError(face_path + ": face line needs at least 3 columns", no);
            TriIndex t{};
            for (int k = 0; k < 3; ++k) {
                const long idx = detail::parse_int(tok[k], no);
                if (idx < 1 || static_cast<std::size_t>(idx) > verts.size())
                    throw ParseError(face_path + ": vertex index " + tok[k] + " out of range (1-based)", no);
                t[k] = static_cast<int>(idx - 1);
            }
            tris.push_back(t);
        }
    }
    if (verts.empty() || tris.empty()) throw ParseError("MSMS files contain no vertices or faces");
    SurfaceMesh mesh(std::move(verts), std::move(tris));
    triangle_neighbors(mesh);
    if (mesh.signed_volume() < 0.0) mesh = mesh.flipped();
    validate(mesh);
    return mesh;
}

inline void save_off(const SurfaceMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << std::setprecision(17);
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << " 0\n";
    for (const auto& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

/// Per-panel scalar export: panel_index, cx, cy, cz, area, value.
inline void write_panel_csv(const SurfaceMesh& mesh, std::span<const double> values, const std::string& path) {
    if (values.size() != mesh.num_triangles()) throw Error("panel CSV: value count does not match panels");
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << std::setprecision(17);
    out << "panel_index,cx,cy,cz,area,value\n";
    for (std::size_t i = 0; i < mesh.num_triangles(); ++i) {
        const Triangle t = mesh.triangle(i);
        out << i << ',' << t.centroid.x() << ',' << t.centroid.y() << ',' << t.centroid.z() << ',' << t.area << ','
            << values[i] << '\n';
    }
}

/// fine -> coarse given fine -> mid and mid -> coarse.
inline std::vector<int> compose_parent_maps(const std::vector<int>& fine_to_mid, const std::vector<int>& mid_to_coarse) {
    std::vector<int> out(fine_to_mid.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mid_to_coarse.at(fine_to_mid[i]);
    return out;
}

} // namespace pbem
