#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pbem/errors.hpp"
#include "pbem/physics.hpp"
#include "pbem/quadrature.hpp"
#include "pbem/solver.hpp"

namespace pbem {

enum class EstimatorTag { Ephi, Eu };

inline std::string to_string(EstimatorTag t) { return t == EstimatorTag::Ephi ? "Ephi" : "Eu"; }

inline EstimatorTag parse_estimator(const std::string& s) {
    if (s == "Ephi" || s == "E_phi" || s == "phi") return EstimatorTag::Ephi;
    if (s == "Eu" || s == "E_u" || s == "u") return EstimatorTag::Eu;
    throw ConfigError("unknown estimator '" + s + "' (expected Ephi or Eu)");
}

/// Per-panel goal-oriented error estimate on the forward mesh (kcal/mol).
struct ErrorMap {
    EstimatorTag tag = EstimatorTag::Ephi;
    std::vector<double> per_panel;        // |E^i|
    std::vector<double> signed_per_panel; // E^i before the absolute value
    double signed_total = 0.0;
    std::shared_ptr<const SurfaceMesh> mesh;

    double sum_per_panel() const { return std::accumulate(per_panel.begin(), per_panel.end(), 0.0); }
};

/// Surface integrand of Eq. 19 (E_phi) or of Theorem 2 (E_u) at one point, in internal units.
struct EstimatorTraces {
    double phi, dphi; // adjoint
    double U, dU;     // forward interior traces
    double uc, duc;   // Coulomb potential and normal derivative
};

inline double estimator_integrand(EstimatorTag tag, double eps_m, const EstimatorTraces& t) {
    const double coulomb = 0.5 * eps_m * (t.dphi * t.uc - t.phi * t.duc);
    if (tag == EstimatorTag::Ephi) {
        const double Ur = t.U - t.uc, dUr = t.dU - t.duc;
        return coulomb + 0.5 * eps_m * (t.dphi * Ur - t.phi * dUr);
    }
    return coulomb - 0.5 * eps_m * (t.uc * t.dU - t.duc * t.U);
}

/// Integrates the estimator over the fine adjoint triangles (3-point rule) and groups by
/// the coarse forward panel they descend from.
inline ErrorMap estimate(EstimatorTag tag, const PanelSolution& forward, const PanelSolution& adjoint,
                         const ChargeSet& charges, const BiePhysics& physics) {
    if (forward.space != Space::P0 || adjoint.space != Space::P1)
        throw Error("estimate: expected a P0 forward and a P1 adjoint solution");
    if (!forward.mesh || !adjoint.mesh) throw Error("estimate: solutions carry no mesh");
    const SurfaceMesh& coarse = *forward.mesh;
    const SurfaceMesh& fine = *adjoint.mesh;
    const auto& parent = fine.parent_map();
    if (parent.size() != fine.num_triangles()) throw Error("estimate: adjoint mesh has no genealogy");
    const int nc = static_cast<int>(coarse.num_triangles());
    for (int p : parent)
        if (p < 0 || p >= nc) throw Error("estimate: adjoint genealogy does not match the forward mesh");

    const QuadratureRule& rule = rules::three_point();
    const auto& tris = fine.triangles();
    const long nf = static_cast<long>(tris.size());
    std::vector<double> fine_sum(nf, 0.0);
#pragma omp parallel for schedule(static)
    for (long t = 0; t < nf; ++t) {
        const Triangle p = fine.triangle(t);
        const TriIndex& v = tris[t];
        const int c = parent[t];
        double s = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec3& l = rule.points[q];
            const Vec3 x = p.at(l);
            const auto [uc, duc] = coulomb_at(charges, physics.eps_m, x, p.normal);
            EstimatorTraces tr;
            tr.phi = l[0] * adjoint.u[v[0]] + l[1] * adjoint.u[v[1]] + l[2] * adjoint.u[v[2]];
            tr.dphi = l[0] * adjoint.dudn[v[0]] + l[1] * adjoint.dudn[v[1]] + l[2] * adjoint.dudn[v[2]];
            tr.U = forward.u[c];
            tr.dU = forward.dudn[c];
            tr.uc = uc;
            tr.duc = duc;
            s += rule.weights[q] * estimator_integrand(tag, physics.eps_m, tr);
        }
        fine_sum[t] = s * p.area * physics.energy_unit;
    }

    ErrorMap m;
    m.tag = tag;
    m.mesh = forward.mesh;
    m.signed_per_panel.assign(nc, 0.0);
    for (long t = 0; t < nf; ++t) m.signed_per_panel[parent[t]] += fine_sum[t];
    m.per_panel.resize(nc);
    for (int i = 0; i < nc; ++i) {
        m.per_panel[i] = std::abs(m.signed_per_panel[i]);
        m.signed_total += m.signed_per_panel[i];
    }
    return m;
}

inline ErrorMap estimate_Ephi(const PanelSolution& forward, const PanelSolution& adjoint, const ChargeSet& charges,
                              const BiePhysics& physics) {
    return estimate(EstimatorTag::Ephi, forward, adjoint, charges, physics);
}

inline ErrorMap estimate_Eu(const PanelSolution& forward, const PanelSolution& adjoint, const ChargeSet& charges,
                            const BiePhysics& physics) {
    return estimate(EstimatorTag::Eu, forward, adjoint, charges, physics);
}

/// Eq. 22: gamma = E / (dG_exact - dG_numeric).
inline double effectivity(double estimate, double dG_numeric, double dG_exact) {
    const double err = dG_exact - dG_numeric;
    if (err == 0.0) throw NumericError("effectivity undefined: numerical energy equals the reference");
    return estimate / err;
}

namespace detail {

inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<int> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * (double(i) + double(j));
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

} // namespace detail

/// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw Error("spearman: need two samples of equal length >= 2");
    const auto ra = detail::average_ranks(a), rb = detail::average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericError("spearman: constant sample");
    return sab / std::sqrt(saa * sbb);
}

} // namespace pbem
