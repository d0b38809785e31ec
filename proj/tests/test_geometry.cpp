#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pbem;

TEST(Triangle, DerivedQuantities) {
    const Triangle t(Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 1, 0));
    EXPECT_DOUBLE_EQ(t.area, 1.0);
    EXPECT_TRUE(t.normal.isApprox(Vec3(0, 0, 1)));
    EXPECT_TRUE(t.centroid.isApprox(Vec3(2.0 / 3, 1.0 / 3, 0)));
    EXPECT_DOUBLE_EQ(t.diameter, std::sqrt(5.0));
    EXPECT_TRUE(t.at(Vec3(0, 1, 0)).isApprox(t.b));
}

TEST(SolidAngle, ClosedSurfaceSumsToFourPiInsideAndZeroOutside) {
    const SurfaceMesh m = icosphere(1.0, 1);
    for (const Vec3& p : {Vec3(0, 0, 0), Vec3(0.3, -0.2, 0.5)}) {
        double s = 0.0;
        for (const auto& t : m.triangles()) s += solid_angle(p, m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]);
        EXPECT_NEAR(s, kFourPi, 1e-10);
    }
    double s = 0.0;
    for (const auto& t : m.triangles())
        s += solid_angle(Vec3(2, 1, 0), m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]);
    EXPECT_NEAR(s, 0.0, 1e-10);
}

TEST(PointTriangleDistance, MatchesDenseSampling) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const Triangle t(Vec3(0, 0, 0), Vec3(1, 0.2, 0), Vec3(0.3, 1, 0.1));
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p(u(rng), u(rng), u(rng));
        double best = 1e300;
        const int n = 300;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                const double a = double(i) / n, b = double(j) / n;
                best = std::min(best, (p - t.at(Vec3(1 - a - b, a, b))).norm());
            }
        const double d = point_triangle_distance(p, t);
        EXPECT_LE(d, best + 1e-12);
        EXPECT_NEAR(d, best, 1e-2);
    }
}
