#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pbem;

namespace {

std::vector<double> spd(std::initializer_list<double> v) { return std::vector<double>(v); }

} // namespace

TEST(MarkElements, SpecExamples) {
    EXPECT_EQ(mark_elements(spd({5, 3, 1, 1}), 0.10), (std::vector<int>{0}));
    EXPECT_EQ(mark_elements(std::vector<double>(10, 1.0), 0.10), (std::vector<int>{0}));
    EXPECT_EQ(mark_elements(spd({1, 2, 3, 4}), 0.50), (std::vector<int>{3, 2}));
}

TEST(MarkElements, ZeroTotalGivesEmptySet) { EXPECT_TRUE(mark_elements(spd({0, 0, 0}), 0.5).empty()); }

TEST(MarkElements, RejectsBadInput) {
    EXPECT_THROW(mark_elements(spd({1, std::nan(""), 2}), 0.1), NumericError);
    EXPECT_THROW(mark_elements(spd({1, -1}), 0.1), NumericError);
    EXPECT_THROW(mark_elements(spd({1, 2}), 0.0), ConfigError);
    EXPECT_THROW(mark_elements(spd({1, 2}), 1.5), ConfigError);
}

TEST(MarkElements, FractionOneMarksEveryPositivePanel) {
    EXPECT_EQ(mark_elements(spd({0.1, 0.3, 0.2}), 1.0).size(), 3u);
}

TEST(CloseMarking, AllMarkedIsUniform) {
    const SurfaceMesh m = icosphere(1.0, 1);
    std::vector<int> all(m.num_triangles());
    std::iota(all.begin(), all.end(), 0);
    const MarkedSet p = close_marking(m, all);
    EXPECT_EQ(p.refine4.size(), m.num_triangles());
    EXPECT_TRUE(p.bisect.empty());
}

TEST(CloseMarking, OneMarkedBisectsItsNeighbours) {
    const SurfaceMesh m = icosphere(1.0, 0);
    const auto nbr = triangle_neighbors(m);
    const std::vector<int> marked{0};
    const MarkedSet p = close_marking(m, marked);
    EXPECT_EQ(p.refine4, marked);
    ASSERT_EQ(p.bisect.size(), 3u);
    for (auto [t, k] : p.bisect) EXPECT_EQ(nbr[t][k], 0);
}

TEST(CloseMarking, TriangleTouchingTwoRedIsPromoted) {
    // Fig. 4: a triangle with two marked edge-neighbours becomes red; its other neighbour is green.
    const SurfaceMesh m = icosphere(1.0, 0);
    const auto nbr = triangle_neighbors(m);
    const int middle = 0;
    const std::vector<int> marked{nbr[middle][0], nbr[middle][1]};
    const MarkedSet p = close_marking(m, marked);
    EXPECT_TRUE(std::binary_search(p.refine4.begin(), p.refine4.end(), middle));
    const int fresh = nbr[middle][2];
    bool fresh_bisected = false;
    for (auto [t, k] : p.bisect)
        if (t == fresh && nbr[t][k] == middle) fresh_bisected = true;
    EXPECT_TRUE(fresh_bisected || std::binary_search(p.refine4.begin(), p.refine4.end(), fresh));
}

TEST(CloseMarking, Invariants) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const auto nbr = triangle_neighbors(m);
    const std::vector<int> marked{3, 17, 18, 90, 200, 201, 202};
    const MarkedSet p = close_marking(m, marked);
    std::set<int> red(p.refine4.begin(), p.refine4.end());
    for (int t : marked) EXPECT_TRUE(red.count(t));
    std::set<int> green;
    for (auto [t, k] : p.bisect) {
        EXPECT_FALSE(red.count(t));
        EXPECT_TRUE(red.count(nbr[t][k]));
        int count = 0;
        for (int j = 0; j < 3; ++j) count += red.count(nbr[t][j]);
        EXPECT_EQ(count, 1);
        EXPECT_TRUE(green.insert(t).second);
    }
    EXPECT_EQ(close_marking(m, p.refine4), p); // idempotent
}

TEST(CloseMarking, RejectsOutOfRange) {
    const SurfaceMesh m = icosphere(1.0, 0);
    const std::vector<int> bad{25};
    EXPECT_THROW(close_marking(m, bad), ConfigError);
}

TEST(RefineFlat, UniformIcosahedron) {
    const SurfaceMesh m = icosphere(1.0, 0);
    const SurfaceMesh r = refine_flat(m, mark_all(m));
    EXPECT_EQ(r.num_triangles(), 80u);
    EXPECT_NEAR(r.area(), m.area(), 1e-13);
    EXPECT_NEAR(r.signed_volume(), m.signed_volume(), 1e-13);
    EXPECT_NO_THROW(validate(r));
}

TEST(RefineFlat, ChildAreasQuarterParent) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const SurfaceMesh r = refine_flat(m, mark_all(m));
    for (std::size_t t = 0; t < r.num_triangles(); ++t)
        EXPECT_NEAR(r.triangle(t).area, m.triangle(r.parent_map()[t]).area / 4.0, 1e-14);
}

TEST(RefineFlat, OneRedTriangleWithGreenNeighbours) {
    const SurfaceMesh m = icosphere(1.0, 0);
    const std::vector<int> marked{5};
    const SurfaceMesh r = refine_flat(m, close_marking(m, marked));
    EXPECT_EQ(r.num_triangles(), 20u - 4u + 4u + 6u);
    EXPECT_NEAR(r.area(), m.area(), 1e-13);
    EXPECT_NO_THROW(validate(r));
    // Children of each parent tile it exactly.
    std::vector<double> child_area(m.num_triangles(), 0.0);
    for (std::size_t t = 0; t < r.num_triangles(); ++t) child_area[r.parent_map()[t]] += r.triangle(t).area;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) EXPECT_NEAR(child_area[t], m.triangle(t).area, 1e-14);
}

TEST(RefineFlat, RejectsUnclosedPlan) {
    const SurfaceMesh m = icosphere(1.0, 0);
    MarkedSet plan;
    plan.refine4 = {0};
    EXPECT_THROW(refine_flat(m, plan), MeshError);
}

TEST(RefineFlat, ComposedParentMapTilesAncestors) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const SurfaceMesh r = refine_uniform_flat(m, 2);
    EXPECT_EQ(r.num_triangles(), 16 * m.num_triangles());
    std::vector<double> child_area(m.num_triangles(), 0.0);
    for (std::size_t t = 0; t < r.num_triangles(); ++t) child_area[r.parent_map()[t]] += r.triangle(t).area;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) EXPECT_NEAR(child_area[t], m.triangle(t).area, 1e-14);
}

TEST(NearestVertexGrid, MatchesBruteForce) {
    const SurfaceMesh bg = icosphere(1.0, 4);
    const NearestVertexGrid grid(bg);
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 200; ++i) {
        const Vec3 q = Vec3(g(rng), g(rng), g(rng)) * 0.8;
        int best = 0;
        for (std::size_t j = 1; j < bg.num_vertices(); ++j)
            if ((bg.vertices()[j] - q).squaredNorm() < (bg.vertices()[best] - q).squaredNorm()) best = int(j);
        EXPECT_EQ((bg.vertices()[grid.nearest(q)] - q).norm(), (bg.vertices()[best] - q).norm());
    }
}

TEST(RefineConforming, SnappedVerticesLieNearSphere) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const SurfaceMesh bg = icosphere(1.0, 5);
    const NearestVertexGrid grid(bg);
    ConformingStats st;
    const SurfaceMesh r = refine_conforming(m, mark_all(m), grid, {}, &st);
    EXPECT_NO_THROW(validate(r));
    const double h = bg.mean_edge_length();
    for (std::size_t v = m.num_vertices(); v < r.num_vertices(); ++v)
        EXPECT_LE(std::abs(r.vertices()[v].norm() - 1.0), h);
    EXPECT_EQ(st.snapped + st.collisions, int(r.num_vertices() - m.num_vertices()));
}

TEST(RefineConforming, OwnFlatRefinementAsBackgroundEqualsFlat) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const SurfaceMesh flat = refine_flat(m, mark_all(m));
    const NearestVertexGrid grid(flat);
    const SurfaceMesh r = refine_conforming(m, mark_all(m), grid);
    ASSERT_EQ(r.num_vertices(), flat.num_vertices());
    for (std::size_t v = 0; v < r.num_vertices(); ++v) EXPECT_TRUE(r.vertices()[v].isApprox(flat.vertices()[v], 1e-15));
    EXPECT_EQ(r.triangles(), flat.triangles());
}

TEST(RefineConforming, AreaCloserToSphereThanFlat) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const NearestVertexGrid grid(icosphere(1.0, 6));
    const double sphere = 4.0 * kPi;
    const double a_flat = refine_flat(m, mark_all(m)).area();
    const double a_conf = refine_conforming(m, mark_all(m), grid).area();
    EXPECT_LT(std::abs(a_conf - sphere), std::abs(a_flat - sphere));
}

TEST(RefineConforming, CollisionKeepsMidpoint) {
    // Background = the mesh itself: every background vertex is owned by an old vertex.
    const SurfaceMesh m = icosphere(1.0, 0);
    const NearestVertexGrid grid(m);
    ConformingStats st;
    const SurfaceMesh r = refine_conforming(m, mark_all(m), grid, {}, &st);
    EXPECT_EQ(st.snapped, 0);
    EXPECT_EQ(st.collisions, 30);
    const SurfaceMesh flat = refine_flat(m, mark_all(m));
    for (std::size_t v = 0; v < r.num_vertices(); ++v) EXPECT_TRUE(r.vertices()[v].isApprox(flat.vertices()[v]));
}

TEST(RefineConforming, LocalRefinementStaysManifold) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const NearestVertexGrid grid(icosphere(1.0, 6));
    SurfaceMesh cur = m;
    for (int it = 0; it < 4; ++it) {
        std::vector<int> marked;
        for (std::size_t t = 0; t < cur.num_triangles(); ++t)
            if (cur.triangle(t).centroid.z() > 0.7) marked.push_back(int(t));
        cur = refine_conforming(cur, close_marking(cur, marked), grid);
        EXPECT_NO_THROW(validate(cur));
        EXPECT_GT(cur.signed_volume(), 0.0);
    }
}

TEST(RefineConforming, SnappingNeverFlipsAChild) {
    // Alternating flat and conforming steps; before the snap guard, step 3 flipped two slivers.
    const SurfaceMesh bg = icosphere(1.0, 5);
    const NearestVertexGrid grid(bg);
    std::mt19937 rng(1);
    SurfaceMesh m = icosphere(1.0, 1);
    for (int step = 0; step < 4; ++step) {
        std::vector<int> marked;
        for (std::size_t t = 0; t < m.num_triangles(); ++t)
            if (rng() % 5 == 0) marked.push_back(int(t));
        const MarkedSet plan = close_marking(m, marked);
        const SurfaceMesh r = step % 2 ? refine_conforming(m, plan, grid) : refine_flat(m, plan);
        for (std::size_t t = 0; t < r.num_triangles(); ++t)
            EXPECT_GT(r.triangle(t).normal.dot(m.triangle(r.parent_map()[t]).normal), 0.0) << "step " << step << " t " << t;
        m = r;
    }
}
