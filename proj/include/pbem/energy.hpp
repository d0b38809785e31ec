#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pbem/errors.hpp"
#include "pbem/kernels.hpp"
#include "pbem/physics.hpp"
#include "pbem/solver.hpp"

namespace pbem {

struct EnergyResult {
    double dG = 0.0;                 // kcal/mol
    std::vector<double> per_charge;  // (1/2) q_k U_r(r_k), kcal/mol
    double gmres_residual = 0.0;
    int gmres_iterations = 0;
};

/// Eq. 9: u_r(x) = -int u dG/dn' + int (du/dn) G over the solution's mesh, for x inside.
inline std::vector<double> reaction_potential(const PanelSolution& sol, const std::vector<Vec3>& targets,
                                              const NearField& near = {}) {
    if (!sol.mesh) throw Error("reaction_potential: solution has no mesh");
    const SurfaceMesh& mesh = *sol.mesh;
    for (const auto& x : targets)
        if (winding_number(mesh, x) < 0.5) throw DomainError("reaction potential target lies outside the surface");
    const auto panels = mesh.panels();
    const auto& tris = mesh.triangles();
    const QuadratureRule& rule = rules::seven_point();
    const bool p1 = sol.space == Space::P1;
    const long np = static_cast<long>(panels.size());
    std::vector<double> out(targets.size(), 0.0);
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const Vec3& x = targets[k];
        double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(static)
        for (long t = 0; t < np; ++t) {
            const Triangle& p = panels[t];
            const TriIndex& tri = tris[t];
            double s = 0.0;
            visit_panel_quadrature(x, p, rule, near, [&](const Vec3& y, double w, const Vec3& bary) {
                double u, q;
                if (p1) {
                    u = bary[0] * sol.u[tri[0]] + bary[1] * sol.u[tri[1]] + bary[2] * sol.u[tri[2]];
                    q = bary[0] * sol.dudn[tri[0]] + bary[1] * sol.dudn[tri[1]] + bary[2] * sol.dudn[tri[2]];
                } else {
                    u = sol.u[t];
                    q = sol.dudn[t];
                }
                const KernelValues kv = kernel_values(x, y, p.normal, 0.0);
                s += w * (q * kv[0] - u * kv[1]);
            });
            acc += s;
        }
        out[k] = acc;
    }
    return out;
}

/// Eq. 3 / Eq. 12 with the 1/2: dG = energy_unit * (1/2) sum_k q_k u_r(r_k).
inline EnergyResult solvation_energy(const PanelSolution& sol, const ChargeSet& charges, const BiePhysics& physics,
                                     const NearField& near = {}) {
    const std::vector<double> ur = reaction_potential(sol, charges.positions, near);
    EnergyResult r;
    r.per_charge.resize(charges.size());
    for (std::size_t k = 0; k < charges.size(); ++k) {
        r.per_charge[k] = physics.energy_unit * 0.5 * charges.charges[k] * ur[k];
        r.dG += r.per_charge[k];
    }
    r.gmres_residual = sol.gmres_residual;
    r.gmres_iterations = sol.gmres_iterations;
    return r;
}

} // namespace pbem
