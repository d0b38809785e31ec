#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pbem;

namespace {

ChargeSet unit_at(const Vec3& r) {
    ChargeSet c;
    c.add(r, 1.0);
    return c;
}

BiePhysics born_physics() {
    BiePhysics p;
    p.eps_m = 1.0;
    p.eps_w = 80.0;
    p.kappa = 0.0;
    return p;
}

} // namespace

TEST(Gmres, MatchesDirectSolve) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd A(30, 30);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j) A(i, j) = u(rng) * 0.1 + (i == j ? 2.0 : 0.0);
    Eigen::VectorXd b(30);
    for (int i = 0; i < 30; ++i) b[i] = u(rng);
    const auto r = gmres([&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out = A * v; }, b, 1e-12, 100);
    ASSERT_TRUE(r.converged);
    EXPECT_LT((r.x - A.partialPivLu().solve(b)).norm(), 1e-10);
    EXPECT_LE(r.relative_residual, 1e-12);
}

TEST(Gmres, ZeroRightHandSide) {
    const auto r = gmres([](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out = v; }, Eigen::VectorXd::Zero(5), 1e-8, 10);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Assembly, ShapeAndRightHandSide) {
    const SurfaceMesh m = icosphere(1.0, 1);
    ChargeSet c;
    c.add(Vec3(0.1, 0.2, 0.3), 1.0);
    c.add(Vec3(-0.2, 0.0, -0.1), -0.5);
    BiePhysics p;
    const LinearSystem sys = assemble_system(m, p, c, Space::P0);
    const Eigen::Index n = 80;
    ASSERT_EQ(sys.matrix.rows(), 2 * n);
    ASSERT_EQ(sys.matrix.cols(), 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 x = m.triangle(i).centroid;
        double ref = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) ref += c.charges[k] / (4.0 * kPi * p.eps_m * (x - c.positions[k]).norm());
        EXPECT_NEAR(sys.rhs[i], ref, 1e-14);
        EXPECT_EQ(sys.rhs[n + i], 0.0);
    }
}

TEST(Assembly, BlocksCoincideForEqualDielectricsWithoutSalt) {
    const SurfaceMesh m = icosphere(1.0, 1);
    BiePhysics p;
    p.eps_m = p.eps_w = 2.0;
    p.kappa = 0.0;
    const LinearSystem sys = assemble_system(m, p, unit_at(Vec3::Zero()), Space::P0);
    const Eigen::Index n = 80;
    const Eigen::MatrixXd V1 = -sys.matrix.block(0, n, n, n), V2 = sys.matrix.block(n, n, n, n);
    EXPECT_LT((V1 - V2).norm(), 1e-12 * V1.norm());
    const Eigen::MatrixXd S = sys.matrix.block(0, 0, n, n) + sys.matrix.block(n, 0, n, n);
    EXPECT_LT((S - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-12);
}

// Collocation at centroids is not a Galerkin scheme, so V is only symmetric after weighting
// each row by its panel area (a one-point outer quadrature), and then only to O(h).
TEST(Assembly, SingleLayerNearlySymmetricAfterAreaWeighting) {
    const SurfaceMesh m = icosphere(1.0, 3);
    const LinearSystem sys = assemble_system(m, BiePhysics{}, unit_at(Vec3::Zero()), Space::P0);
    const Eigen::Index n = static_cast<Eigen::Index>(m.num_triangles());
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) a[i] = m.triangle(i).area;
    const Eigen::MatrixXd W = a.asDiagonal() * (-sys.matrix.block(0, n, n, n));
    EXPECT_LT((W - W.transpose()).norm() / W.norm(), 1e-2);
}

TEST(Solve, BornTraceIsConstant) {
    const SurfaceMesh m = icosphere(1.0, 3);
    const PanelSolution s = solve_forward(m, born_physics(), unit_at(Vec3::Zero()));
    const double exact = 1.0 / (4.0 * kPi * 80.0);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) EXPECT_NEAR(s.u[i], exact, 0.01 * exact);
    EXPECT_EQ(s.space, Space::P0);
    EXPECT_EQ(s.dofs(), m.num_triangles());
    EXPECT_LE(s.gmres_residual, 1e-8);
}

TEST(Solve, MirrorSymmetry) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const PanelSolution s = solve_forward(m, BiePhysics{}, unit_at(Vec3(0.0, 0.0, 0.4)));
    const std::size_t n = m.num_triangles();
    // x -> -x maps the icosphere onto itself and leaves the charge fixed.
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 c = m.triangle(i).centroid;
        c.x() = -c.x();
        std::size_t j = 0;
        double best = 1e300;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = (m.triangle(k).centroid - c).norm();
            if (d < best) best = d, j = k;
        }
        ASSERT_LT(best, 1e-12);
        EXPECT_NEAR(s.u[i], s.u[j], 1e-8 * s.u.cwiseAbs().maxCoeff());
        EXPECT_NEAR(s.dudn[i], s.dudn[j], 1e-8 * s.dudn.cwiseAbs().maxCoeff());
    }
}

TEST(Solve, PanelPermutationInvariance) {
    const SurfaceMesh m = icosphere(1.0, 2);
    std::vector<int> perm(m.num_triangles());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(11));
    std::vector<TriIndex> tris;
    for (int p : perm) tris.push_back(m.triangles()[p]);
    const SurfaceMesh mp(m.vertices(), tris);
    SolverOptions o;
    o.gmres_tol = 1e-13;
    const ChargeSet c = unit_at(Vec3(0.2, -0.1, 0.3));
    const PanelSolution a = solve_forward(m, BiePhysics{}, c, o), b = solve_forward(mp, BiePhysics{}, c, o);
    for (std::size_t k = 0; k < perm.size(); ++k) {
        EXPECT_NEAR(b.u[k], a.u[perm[k]], 1e-10 * a.u.cwiseAbs().maxCoeff());
        EXPECT_NEAR(b.dudn[k], a.dudn[perm[k]], 1e-10 * a.dudn.cwiseAbs().maxCoeff());
    }
}

TEST(Solve, LooserToleranceStaysBelowDiscretizationError) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const ChargeSet c = unit_at(Vec3::Zero());
    SolverOptions lo, hi;
    lo.gmres_tol = 1e-4;
    hi.gmres_tol = 1e-8;
    const auto a = solvation_energy(solve_forward(m, born_physics(), c, lo), c, born_physics());
    const auto b = solvation_energy(solve_forward(m, born_physics(), c, hi), c, born_physics());
    const double exact = oracle::born(1.0, 1.0, 1.0, 80.0);
    EXPECT_LT(std::abs(a.dG - b.dG), std::abs(b.dG - exact));
    EXPECT_LE(a.gmres_iterations, b.gmres_iterations);
}

TEST(Solve, DiagonalScalingGivesSameSolution) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const ChargeSet c = unit_at(Vec3(0.0, 0.3, 0.0));
    SolverOptions o;
    o.gmres_tol = 1e-12;
    const PanelSolution a = solve_forward(m, BiePhysics{}, c, o);
    o.diagonal_scaling = true;
    const PanelSolution b = solve_forward(m, BiePhysics{}, c, o);
    EXPECT_LT((a.u - b.u).norm(), 1e-9 * a.u.norm());
    EXPECT_LT((a.dudn - b.dudn).norm(), 1e-9 * a.dudn.norm());
}

TEST(Solve, ThrowsWhenIterationBudgetIsTooSmall) {
    const SurfaceMesh m = icosphere(1.0, 2);
    SolverOptions o;
    o.max_iterations = 2;
    o.gmres_tol = 1e-12;
    EXPECT_THROW(solve_forward(m, BiePhysics{}, unit_at(Vec3(0, 0, 0.5)), o), SolverError);
}

TEST(Solve, ChargeOutsideIsRejected) {
    const SurfaceMesh m = icosphere(1.0, 1);
    EXPECT_THROW(solve_forward(m, BiePhysics{}, unit_at(Vec3(0, 0, 1.5))), DomainError);
    EXPECT_THROW(solve_adjoint(m, BiePhysics{}, unit_at(Vec3(0, 0, 1.5)), 1), DomainError);
}

TEST(Adjoint, DofsAndGenealogy) {
    const SurfaceMesh m = icosphere(1.0, 1);
    const ChargeSet c = unit_at(Vec3(0, 0, 0.5));
    EXPECT_THROW(solve_adjoint(m, BiePhysics{}, c, -1), ConfigError);
    for (int l = 0; l <= 2; ++l) {
        const PanelSolution a = solve_adjoint(m, BiePhysics{}, c, l);
        EXPECT_EQ(a.space, Space::P1);
        ASSERT_TRUE(a.mesh);
        EXPECT_EQ(a.mesh->num_triangles(), m.num_triangles() << (2 * l));
        EXPECT_EQ(a.dofs(), a.mesh->num_vertices());
        ASSERT_EQ(a.mesh->parent_map().size(), a.mesh->num_triangles());
        for (int p : a.mesh->parent_map()) {
            EXPECT_GE(p, 0);
            EXPECT_LT(p, 80);
        }
    }
}

TEST(Adjoint, AgreesWithForwardTraces) {
    const SurfaceMesh m = icosphere(1.0, 3);
    const ChargeSet c = unit_at(Vec3(0, 0, 0.5));
    const PanelSolution f = solve_forward(m, BiePhysics{}, c);
    const PanelSolution a = solve_adjoint(m, BiePhysics{}, c, 0);
    const double scale_u = f.u.cwiseAbs().maxCoeff(), scale_q = f.dudn.cwiseAbs().maxCoeff();
    double worst_u = 0.0, worst_q = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const TriIndex& v = m.triangles()[t];
        const double u = (a.u[v[0]] + a.u[v[1]] + a.u[v[2]]) / 3.0;
        const double q = (a.dudn[v[0]] + a.dudn[v[1]] + a.dudn[v[2]]) / 3.0;
        worst_u = std::max(worst_u, std::abs(u - f.u[t]) / scale_u);
        worst_q = std::max(worst_q, std::abs(q - f.dudn[t]) / scale_q);
    }
    EXPECT_LT(worst_u, 0.05);
    EXPECT_LT(worst_q, 0.05);
}

TEST(Adjoint, BornTraceIsConstant) {
    const SurfaceMesh m = icosphere(1.0, 2);
    const PanelSolution a = solve_adjoint(m, born_physics(), unit_at(Vec3::Zero()), 1);
    const double exact = 1.0 / (4.0 * kPi * 80.0);
    for (Eigen::Index i = 0; i < a.u.size(); ++i) EXPECT_NEAR(a.u[i], exact, 0.02 * exact);
}
