#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "pbem/errors.hpp"
#include "pbem/gmres.hpp"
#include "pbem/kernels.hpp"
#include "pbem/mesh.hpp"
#include "pbem/physics.hpp"
#include "pbem/refine.hpp"

namespace pbem {

enum class Space { P0, P1 };

struct SolverOptions {
    double gmres_tol = 1e-8;
    int max_iterations = 1000;
    bool diagonal_scaling = false;
    NearField near;
};

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Eq. 8 discretized: unknowns [u; du/dn], rows [interior Laplace; exterior Yukawa].
struct LinearSystem {
    DenseMatrix matrix;
    Eigen::VectorXd rhs;
    std::vector<Vec3> collocation;
};

struct PanelSolution {
    Space space = Space::P0;
    Eigen::VectorXd u;    // U^- on panels (P0) or vertices (P1)
    Eigen::VectorXd dudn; // dU^-/dn, same layout
    std::shared_ptr<const SurfaceMesh> mesh;
    double gmres_residual = 0.0;
    int gmres_iterations = 0;

    std::size_t dofs() const { return static_cast<std::size_t>(u.size()); }
};

namespace detail {

inline void fill_p0(const SurfaceMesh& mesh, const BiePhysics& phys, const NearField& near, LinearSystem& sys) {
    const auto panels = mesh.panels();
    const Eigen::Index n = static_cast<Eigen::Index>(panels.size());
    const double ratio = phys.eps_m / phys.eps_w;
    const QuadratureRule& rule = rules::seven_point();
    DenseMatrix& A = sys.matrix;
#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& x = panels[i].centroid;
        for (Eigen::Index j = 0; j < n; ++j) {
            KernelQuad k;
            if (i == j) {
                k.sl_laplace = laplace_self_moments(panels[j], x)[0];
                k.sl_yukawa = k.sl_laplace + yukawa_self_correction_moments(panels[j], x, phys.kappa)[0];
            } else {
                const Vec3& nrm = panels[j].normal;
                visit_panel_quadrature(x, panels[j], rule, near,
                                       [&](const Vec3& y, double w, const Vec3&) { k.accumulate(x, y, nrm, phys.kappa, w); });
            }
            const double half = i == j ? 0.5 : 0.0;
            A(i, j) = half + k.dl_laplace;
            A(i, n + j) = -k.sl_laplace;
            A(n + i, j) = half - k.dl_yukawa;
            A(n + i, n + j) = ratio * k.sl_yukawa;
        }
    }
}

inline void fill_p1(const SurfaceMesh& mesh, const BiePhysics& phys, const NearField& near, LinearSystem& sys) {
    const auto panels = mesh.panels();
    const auto& tris = mesh.triangles();
    const auto& verts = mesh.vertices();
    const Eigen::Index n = static_cast<Eigen::Index>(verts.size());
    const double ratio = phys.eps_m / phys.eps_w;
    const QuadratureRule& rule = rules::seven_point();
    DenseMatrix& A = sys.matrix;
#pragma omp parallel
    {
        std::vector<double> kl(n), kyw(n), vl(n), vy(n);
#pragma omp for schedule(dynamic, 4)
        for (Eigen::Index i = 0; i < n; ++i) {
            std::fill(kl.begin(), kl.end(), 0.0);
            std::fill(kyw.begin(), kyw.end(), 0.0);
            std::fill(vl.begin(), vl.end(), 0.0);
            std::fill(vy.begin(), vy.end(), 0.0);
            const Vec3& x = verts[i];
            for (std::size_t t = 0; t < tris.size(); ++t) {
                const TriIndex& tri = tris[t];
                if (tri[0] == i || tri[1] == i || tri[2] == i) {
                    // Flat panel through the target: no double layer, singular single layer.
                    const PanelMoments ml = laplace_self_moments(panels[t], x);
                    const PanelMoments my = yukawa_self_correction_moments(panels[t], x, phys.kappa);
                    for (int a = 0; a < 3; ++a) {
                        vl[tri[a]] += ml[a + 1];
                        vy[tri[a]] += ml[a + 1] + my[a + 1];
                    }
                    continue;
                }
                const Vec3& nrm = panels[t].normal;
                visit_panel_quadrature(x, panels[t], rule, near, [&](const Vec3& y, double w, const Vec3& bary) {
                    const KernelValues kv = kernel_values(x, y, nrm, phys.kappa);
                    for (int a = 0; a < 3; ++a) {
                        const double wb = w * bary[a];
                        vl[tri[a]] += wb * kv[0];
                        kl[tri[a]] += wb * kv[1];
                        vy[tri[a]] += wb * kv[2];
                        kyw[tri[a]] += wb * kv[3];
                    }
                });
            }
            // Jump coefficient from the discrete rigid-mode identity c + sum_j K_L(i, j) = 0.
            double c = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) c -= kl[j];
            for (Eigen::Index j = 0; j < n; ++j) {
                A(i, j) = kl[j];
                A(i, n + j) = -vl[j];
                A(n + i, j) = -kyw[j];
                A(n + i, n + j) = ratio * vy[j];
            }
            A(i, i) += c;
            A(n + i, i) += 1.0 - c;
        }
    }
}

} // namespace detail

/// Collocation points: panel centroids (P0) or mesh vertices (P1).
inline std::vector<Vec3> collocation_points(const SurfaceMesh& mesh, Space space) {
    if (space == Space::P1) return mesh.vertices();
    std::vector<Vec3> pts;
    pts.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) pts.push_back(mesh.triangle(t).centroid);
    return pts;
}

inline LinearSystem assemble_system(const SurfaceMesh& mesh, const BiePhysics& physics, const ChargeSet& charges,
                                    Space space, const SolverOptions& opts = {}) {
    physics.validate();
    require_inside(mesh, charges);
    LinearSystem sys;
    sys.collocation = collocation_points(mesh, space);
    const Eigen::Index n = static_cast<Eigen::Index>(sys.collocation.size());
    sys.matrix.resize(2 * n, 2 * n);
    if (space == Space::P0)
        detail::fill_p0(mesh, physics, opts.near, sys);
    else
        detail::fill_p1(mesh, physics, opts.near, sys);
    const std::vector<Vec3> dummy(sys.collocation.size(), Vec3::UnitZ());
    sys.rhs = Eigen::VectorXd::Zero(2 * n);
    sys.rhs.head(n) = coulomb_trace(charges, physics, sys.collocation, dummy).value;
    return sys;
}

/// Dense mat-vec split over rows.
inline void dense_apply(const DenseMatrix& A, const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    out.resize(A.rows());
    const Eigen::Index rows = A.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < rows; ++i) out[i] = A.row(i).dot(v);
}

inline PanelSolution solve_system(LinearSystem& sys, const SolverOptions& opts) {
    if (opts.diagonal_scaling) {
        for (Eigen::Index i = 0; i < sys.matrix.rows(); ++i) {
            const double d = sys.matrix(i, i);
            if (d != 0.0) {
                sys.matrix.row(i) /= d;
                sys.rhs[i] /= d;
            }
        }
    }
    const GmresResult r = gmres([&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { dense_apply(sys.matrix, v, out); },
                                sys.rhs, opts.gmres_tol, opts.max_iterations);
    if (!r.converged)
        throw SolverError("GMRES did not reach the requested tolerance", r.relative_residual, r.iterations);
    const Eigen::Index n = sys.rhs.size() / 2;
    PanelSolution s;
    s.u = r.x.head(n);
    s.dudn = r.x.tail(n);
    s.gmres_residual = r.relative_residual;
    s.gmres_iterations = r.iterations;
    return s;
}

/// Piecewise-constant collocation solve of Eq. 8 on the given mesh.
inline PanelSolution solve_forward(const SurfaceMesh& mesh, const BiePhysics& physics, const ChargeSet& charges,
                                   const SolverOptions& opts = {}) {
    LinearSystem sys = assemble_system(mesh, physics, charges, Space::P0, opts);
    PanelSolution s = solve_system(sys, opts);
    s.space = Space::P0;
    s.mesh = std::make_shared<const SurfaceMesh>(mesh);
    return s;
}

/// Adjoint with psi = rho: the same BIE on a mesh flat-refined `refine_levels` times, P1 ansatz.
/// The returned mesh carries a parent map to `mesh`.
inline PanelSolution solve_adjoint(const SurfaceMesh& mesh, const BiePhysics& physics, const ChargeSet& charges,
                                   int refine_levels, const SolverOptions& opts = {}) {
    if (refine_levels < 0) throw ConfigError("adjoint refinement levels must be non-negative");
    SurfaceMesh fine = refine_uniform_flat(mesh, refine_levels);
    LinearSystem sys = assemble_system(fine, physics, charges, Space::P1, opts);
    PanelSolution s = solve_system(sys, opts);
    s.space = Space::P1;
    s.mesh = std::make_shared<const SurfaceMesh>(std::move(fine));
    return s;
}

} // namespace pbem
