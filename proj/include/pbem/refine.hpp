#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pbem/errors.hpp"
#include "pbem/mesh.hpp"

namespace pbem {

/// Red-green refinement plan: triangles split in four and (triangle, local edge) pairs bisected.
struct MarkedSet {
    std::vector<int> refine4;                 // ascending
    std::vector<std::pair<int, int>> bisect;  // ascending by triangle

    bool operator==(const MarkedSet&) const = default;
};

/// Largest-first marking: sorts panels by error (ties by index) and returns the shortest
/// prefix whose cumulative error reaches `fraction` of the total.
inline std::vector<int> mark_elements(std::span<const double> errors, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("marking fraction must lie in (0, 1]");
    double total = 0.0;
    for (double e : errors) {
        if (!std::isfinite(e) || e < 0.0) throw NumericError("marking requires finite non-negative errors");
        total += e;
    }
    std::vector<int> order(errors.size());
    std::iota(order.begin(), order.end(), 0);
    if (total == 0.0) return {};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return errors[a] > errors[b]; });
    const double target = fraction * total;
    double cum = 0.0;
    std::vector<int> out;
    if (fraction == 1.0) {
        // Every positive entry is needed; avoid a rounding-dependent early stop.
        for (int i : order)
            if (errors[i] > 0.0) out.push_back(i);
        return out;
    }
    for (int i : order) {
        out.push_back(i);
        cum += errors[i];
        if (cum >= target * (1.0 - 1e-14)) break;
    }
    return out;
}

/// Closure to a conforming plan: an unmarked triangle touching >= 2 four-split triangles is
/// promoted to a four-split (until nothing changes); one touching exactly one is bisected.
inline MarkedSet close_marking(const SurfaceMesh& mesh, std::span<const int> marked) {
    const auto nbr = triangle_neighbors(mesh);
    const std::size_t n = mesh.num_triangles();
    std::vector<char> red(n, 0);
    for (int t : marked) {
        if (t < 0 || static_cast<std::size_t>(t) >= n) throw ConfigError("marked triangle index out of range");
        red[t] = 1;
    }
    auto red_edges = [&](std::size_t t) { return int(red[nbr[t][0]]) + int(red[nbr[t][1]]) + int(red[nbr[t][2]]); };
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t t = 0; t < n; ++t)
            if (!red[t] && red_edges(t) >= 2) {
                red[t] = 1;
                changed = true;
            }
    }
    MarkedSet plan;
    for (std::size_t t = 0; t < n; ++t) {
        if (red[t]) {
            plan.refine4.push_back(static_cast<int>(t));
        } else if (red_edges(t) == 1) {
            for (int k = 0; k < 3; ++k)
                if (red[nbr[t][k]]) plan.bisect.emplace_back(static_cast<int>(t), k);
        }
    }
    return plan;
}

inline MarkedSet mark_all(const SurfaceMesh& mesh) {
    MarkedSet plan;
    plan.refine4.resize(mesh.num_triangles());
    std::iota(plan.refine4.begin(), plan.refine4.end(), 0);
    return plan;
}

/// Splits according to a closed plan with new vertices at edge midpoints. New vertices are
/// appended after the existing ones; children of a parent are contiguous and the parent map
/// points into `mesh`.
inline SurfaceMesh refine_flat(const SurfaceMesh& mesh, const MarkedSet& plan) {
    const auto nbr = triangle_neighbors(mesh);
    const auto& tris = mesh.triangles();
    const std::size_t n = tris.size();
    std::vector<char> red(n, 0);
    std::vector<int> green_edge(n, -1);
    for (int t : plan.refine4) red.at(t) = 1;
    for (auto [t, k] : plan.bisect) {
        if (red.at(t) || k < 0 || k > 2) throw MeshError("refinement plan is not closed");
        green_edge[t] = k;
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (red[t]) continue;
        int count = 0, edge = -1;
        for (int k = 0; k < 3; ++k)
            if (red[nbr[t][k]]) { ++count; edge = k; }
        if (count != (green_edge[t] >= 0 ? 1 : 0) || (count == 1 && edge != green_edge[t]))
            throw MeshError("refinement plan is not closed");
    }

    std::vector<Vec3> verts = mesh.vertices();
    std::unordered_map<std::uint64_t, int> mid;
    auto midpoint = [&](int a, int b) {
        auto [it, inserted] = mid.try_emplace(edge_key(a, b), static_cast<int>(verts.size()));
        if (inserted) verts.push_back(0.5 * (verts[a] + verts[b]));
        return it->second;
    };
    std::vector<TriIndex> out;
    std::vector<int> parent;
    out.reserve(n + 3 * plan.refine4.size() + plan.bisect.size());
    for (std::size_t t = 0; t < n; ++t) {
        const auto& tri = tris[t];
        const int p = static_cast<int>(t);
        if (red[t]) {
            const int ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
            out.push_back({tri[0], ab, ca});
            out.push_back({ab, tri[1], bc});
            out.push_back({ca, bc, tri[2]});
            out.push_back({ab, bc, ca});
            parent.insert(parent.end(), 4, p);
        } else if (green_edge[t] >= 0) {
            const int k = green_edge[t];
            const int a = tri[k], b = tri[(k + 1) % 3], o = tri[(k + 2) % 3];
            const int m = midpoint(a, b);
            out.push_back({a, m, o});
            out.push_back({m, b, o});
            parent.insert(parent.end(), 2, p);
        } else {
            out.push_back(tri);
            parent.push_back(p);
        }
    }
    return SurfaceMesh(std::move(verts), std::move(out), std::move(parent));
}

/// Uniform flat refinement applied `levels` times; the parent map points into `mesh`.
inline SurfaceMesh refine_uniform_flat(const SurfaceMesh& mesh, int levels) {
    std::vector<int> parent(mesh.num_triangles());
    std::iota(parent.begin(), parent.end(), 0);
    SurfaceMesh cur = mesh.with_parent_map(parent);
    for (int l = 0; l < levels; ++l) {
        SurfaceMesh next = refine_flat(cur, mark_all(cur));
        cur = next.with_parent_map(compose_parent_maps(next.parent_map(), cur.parent_map()));
    }
    return cur;
}

/// Nearest-vertex queries on a uniform grid with cell size twice the mean edge length.
class NearestVertexGrid {
public:
    explicit NearestVertexGrid(const SurfaceMesh& background) : points_(background.vertices()) {
        if (points_.empty()) throw MeshError("background mesh has no vertices");
        lo_ = hi_ = points_[0];
        for (const auto& p : points_) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        cell_ = 2.0 * background.mean_edge_length();
        if (!(cell_ > 0.0)) cell_ = std::max((hi_ - lo_).maxCoeff(), 1.0);
        for (int k = 0; k < 3; ++k) dims_[k] = std::max(1, static_cast<int>(std::floor((hi_[k] - lo_[k]) / cell_)) + 1);
        const std::size_t ncell = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
        start_.assign(ncell + 1, 0);
        std::vector<std::size_t> cell_of(points_.size());
        for (std::size_t i = 0; i < points_.size(); ++i) {
            cell_of[i] = flat(cell_coords(points_[i]));
            ++start_[cell_of[i] + 1];
        }
        for (std::size_t c = 0; c < ncell; ++c) start_[c + 1] += start_[c];
        items_.resize(points_.size());
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < points_.size(); ++i) items_[fill[cell_of[i]]++] = static_cast<int>(i);
    }

    const std::vector<Vec3>& points() const { return points_; }
    double cell_size() const { return cell_; }

    /// Index of the nearest background vertex (smallest index on exact ties).
    int nearest(const Vec3& q) const {
        const auto c = cell_coords(q);
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
        for (int r = 0; r <= max_ring; ++r) {
            for (int i = c[0] - r; i <= c[0] + r; ++i) {
                if (i < 0 || i >= dims_[0]) continue;
                for (int j = c[1] - r; j <= c[1] + r; ++j) {
                    if (j < 0 || j >= dims_[1]) continue;
                    for (int k = c[2] - r; k <= c[2] + r; ++k) {
                        if (k < 0 || k >= dims_[2]) continue;
                        if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != r) continue;
                        const std::size_t cell = flat({i, j, k});
                        for (std::size_t s = start_[cell]; s < start_[cell + 1]; ++s) {
                            const int idx = items_[s];
                            const double d2 = (points_[idx] - q).squaredNorm();
                            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                                best_d2 = d2;
                                best = idx;
                            }
                        }
                    }
                }
            }
            if (best >= 0 && std::sqrt(best_d2) <= r * cell_) break;
        }
        return best;
    }

private:
    std::array<int, 3> cell_coords(const Vec3& p) const {
        std::array<int, 3> c{};
        for (int k = 0; k < 3; ++k)
            c[k] = std::clamp(static_cast<int>(std::floor((p[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
        return c;
    }
    std::size_t flat(const std::array<int, 3>& c) const {
        return (static_cast<std::size_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
    }

    std::vector<Vec3> points_;
    Vec3 lo_, hi_;
    double cell_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<std::size_t> start_;
    std::vector<int> items_;
};

struct ConformingStats {
    int snapped = 0;
    int collisions = 0;      // new vertices left at their midpoint (target taken, or snapping would flip a panel)
    int smoothing_moves = 0; // accepted smoothing relocations
};

struct ConformingOptions {
    int smoothing_passes = 3;
};

namespace detail {

// Radius ratio 2 r_in / r_circ: 1 for equilateral, 0 for degenerate.
inline double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double s = 0.5 * (la + lb + lc);
    const double area2 = (b - a).cross(c - a).norm();
    if (area2 <= 0.0) return 0.0;
    const double area = 0.5 * area2;
    const double r_in = area / s;
    const double r_circ = la * lb * lc / (4.0 * area);
    return 2.0 * r_in / r_circ;
}

} // namespace detail

/// As refine_flat, but every new vertex is moved to the nearest free background vertex,
/// followed by Laplacian smoothing passes of the new vertices (each smoothed position re-snapped).
inline SurfaceMesh refine_conforming(const SurfaceMesh& mesh, const MarkedSet& plan, const NearestVertexGrid& background,
                                     const ConformingOptions& opts = {}, ConformingStats* stats = nullptr) {
    SurfaceMesh flat = refine_flat(mesh, plan);
    std::vector<Vec3> verts = flat.vertices();
    const auto& bg = background.points();
    const std::size_t first_new = mesh.num_vertices();
    ConformingStats st;

    const auto& tris = flat.triangles();
    std::vector<std::vector<int>> incident(verts.size());
    for (std::size_t t = 0; t < tris.size(); ++t)
        for (int v : tris[t]) incident[v].push_back(static_cast<int>(t));
    // Flat children share the parent normal; no move may turn a triangle against it.
    auto local_ok = [&](std::size_t v, const Vec3& cand, double& min_q) {
        min_q = 1.0;
        for (int t : incident[v]) {
            std::array<Vec3, 3> p;
            for (int k = 0; k < 3; ++k) p[k] = verts[tris[t][k]];
            for (int k = 0; k < 3; ++k)
                if (tris[t][k] == static_cast<int>(v)) p[k] = cand;
            if ((p[1] - p[0]).cross(p[2] - p[0]).dot(flat.triangle(t).normal) <= 0.0) return false;
            min_q = std::min(min_q, detail::triangle_quality(p[0], p[1], p[2]));
        }
        return true;
    };

    std::vector<int> owner(bg.size(), -1);
    std::vector<int> claim(verts.size(), -1);
    for (std::size_t v = 0; v < first_new; ++v) {
        const int j = background.nearest(verts[v]);
        if (owner[j] < 0) {
            owner[j] = static_cast<int>(v);
            claim[v] = j;
        }
    }
    double q = 0.0;
    for (std::size_t v = first_new; v < verts.size(); ++v) {
        const int j = background.nearest(verts[v]);
        if (owner[j] < 0 && local_ok(v, bg[j], q)) {
            owner[j] = static_cast<int>(v);
            claim[v] = j;
            verts[v] = bg[j];
            ++st.snapped;
        } else {
            ++st.collisions;
        }
    }

    if (opts.smoothing_passes > 0 && first_new < verts.size()) {
        std::vector<std::vector<int>> ring(verts.size());
        for (std::size_t v = first_new; v < verts.size(); ++v) {
            for (int t : incident[v])
                for (int w : tris[t])
                    if (w != static_cast<int>(v)) ring[v].push_back(w);
            std::sort(ring[v].begin(), ring[v].end());
            ring[v].erase(std::unique(ring[v].begin(), ring[v].end()), ring[v].end());
        }
        for (int pass = 0; pass < opts.smoothing_passes; ++pass) {
            for (std::size_t v = first_new; v < verts.size(); ++v) {
                Vec3 avg = Vec3::Zero();
                for (int w : ring[v]) avg += verts[w];
                avg /= static_cast<double>(ring[v].size());
                const int j = background.nearest(avg);
                if (j == claim[v] || owner[j] >= 0) continue;
                double q_old = 0.0, q_new = 0.0;
                local_ok(v, verts[v], q_old);
                if (!local_ok(v, bg[j], q_new) || q_new <= q_old) continue;
                if (claim[v] >= 0) owner[claim[v]] = -1;
                else ++st.snapped, --st.collisions;
                owner[j] = static_cast<int>(v);
                claim[v] = j;
                verts[v] = bg[j];
                ++st.smoothing_moves;
            }
        }
    }
    if (stats) *stats = st;
    return SurfaceMesh(std::move(verts), flat.triangles(), flat.parent_map());
}

} // namespace pbem
