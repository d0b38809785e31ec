#pragma once

#include <array>
#include <cmath>

#include "pbem/errors.hpp"
#include "pbem/geometry.hpp"
#include "pbem/quadrature.hpp"

namespace pbem {

// Free-space Green's functions of -Laplace and -Laplace + kappa^2, and their derivatives
// with respect to the source point r' along the source normal n'. With this sign the
// double layer of a constant density is -1 inside a closed outward-oriented surface.

inline double checked_distance(const Vec3& r, const Vec3& rp) {
    const double d = (r - rp).norm();
    if (!(d > 0.0)) throw DomainError("kernel evaluated at coincident points");
    return d;
}

inline double g_laplace(const Vec3& r, const Vec3& rp) { return 1.0 / (kFourPi * checked_distance(r, rp)); }

inline double g_yukawa(const Vec3& r, const Vec3& rp, double kappa) {
    const double d = checked_distance(r, rp);
    return std::exp(-kappa * d) / (kFourPi * d);
}

inline double dgdn_laplace(const Vec3& r, const Vec3& rp, const Vec3& np) {
    const double d = checked_distance(r, rp);
    return (r - rp).dot(np) / (kFourPi * d * d * d);
}

inline double dgdn_yukawa(const Vec3& r, const Vec3& rp, const Vec3& np, double kappa) {
    const double d = checked_distance(r, rp);
    return (1.0 + kappa * d) * std::exp(-kappa * d) * (r - rp).dot(np) / (kFourPi * d * d * d);
}

// Callable kernel objects: k(target, source, source_normal).

struct LaplaceSingleLayer {
    double operator()(const Vec3& r, const Vec3& rp, const Vec3&) const { return g_laplace(r, rp); }
};

struct LaplaceDoubleLayer {
    double operator()(const Vec3& r, const Vec3& rp, const Vec3& np) const { return dgdn_laplace(r, rp, np); }
};

struct YukawaSingleLayer {
    double kappa = 0.0;
    double operator()(const Vec3& r, const Vec3& rp, const Vec3&) const { return g_yukawa(r, rp, kappa); }
};

struct YukawaDoubleLayer {
    double kappa = 0.0;
    double operator()(const Vec3& r, const Vec3& rp, const Vec3& np) const { return dgdn_yukawa(r, rp, np, kappa); }
};

/// Laplace single, Laplace double, Yukawa single, Yukawa double layer kernels at one point.
using KernelValues = std::array<double, 4>;

inline KernelValues kernel_values(const Vec3& r, const Vec3& x, const Vec3& n, double kappa) {
    const Vec3 diff = r - x;
    const double d2 = diff.squaredNorm();
    const double inv = 1.0 / std::sqrt(d2);
    const double g = inv / kFourPi;
    const double dg = diff.dot(n) * inv * inv * g;
    if (kappa == 0.0) return {g, dg, g, dg};
    const double d = d2 * inv;
    const double e = std::exp(-kappa * d);
    return {g, dg, e * g, (1.0 + kappa * d) * e * dg};
}

/// The four kernels of the interface system evaluated together (they share |r - r'|).
struct KernelQuad {
    double sl_laplace = 0.0, dl_laplace = 0.0, sl_yukawa = 0.0, dl_yukawa = 0.0;

    void accumulate(const Vec3& r, const Vec3& x, const Vec3& n, double kappa, double w) {
        const KernelValues k = kernel_values(r, x, n, kappa);
        sl_laplace += w * k[0];
        dl_laplace += w * k[1];
        sl_yukawa += w * k[2];
        dl_yukawa += w * k[3];
    }
};

/// Regular panel quadrature: sum_q w_q k(target, x_q) * area.
template <class Kernel>
double panel_integral(const Kernel& kernel, const Vec3& target, const Triangle& panel, const QuadratureRule& rule) {
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
        sum += rule.weights[q] * kernel(target, panel.at(rule.points[q]), panel.normal);
    return sum * panel.area;
}

/// Subdivision policy for targets close to a panel: a (sub)panel whose centroid is within
/// `distance_factor` diameters of the target is split into four, up to `max_depth` levels.
struct NearField {
    double distance_factor = 2.0;
    int max_depth = 3;
};

namespace detail {

template <class F>
void visit_recursive(const Vec3& target, const Vec3& pa, const Vec3& pb, const Vec3& pc, const Vec3& ba,
                     const Vec3& bb, const Vec3& bc, double area, const QuadratureRule& rule, const NearField& near,
                     int depth, F& f) {
    if (depth < near.max_depth) {
        const Vec3 cen = (pa + pb + pc) / 3.0;
        const double diam2 = std::max({(pb - pa).squaredNorm(), (pc - pb).squaredNorm(), (pa - pc).squaredNorm()});
        const double lim = near.distance_factor * near.distance_factor * diam2;
        if ((target - cen).squaredNorm() < lim) {
            const Vec3 pab = 0.5 * (pa + pb), pbc = 0.5 * (pb + pc), pca = 0.5 * (pc + pa);
            const Vec3 bab = 0.5 * (ba + bb), bbc = 0.5 * (bb + bc), bca = 0.5 * (bc + ba);
            const double qa = 0.25 * area;
            visit_recursive(target, pa, pab, pca, ba, bab, bca, qa, rule, near, depth + 1, f);
            visit_recursive(target, pab, pb, pbc, bab, bb, bbc, qa, rule, near, depth + 1, f);
            visit_recursive(target, pca, pbc, pc, bca, bbc, bc, qa, rule, near, depth + 1, f);
            visit_recursive(target, pab, pbc, pca, bab, bbc, bca, qa, rule, near, depth + 1, f);
            return;
        }
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vec3& l = rule.points[q];
        const Vec3 x = l[0] * pa + l[1] * pb + l[2] * pc;
        const Vec3 bary = l[0] * ba + l[1] * bb + l[2] * bc;
        f(x, rule.weights[q] * area, bary);
    }
}

} // namespace detail

/// Calls f(x, weight, bary) for every quadrature point of the panel, subdividing near the
/// target. `weight` already includes the (sub)panel area; `bary` refers to the whole panel.
template <class F>
void visit_panel_quadrature(const Vec3& target, const Triangle& panel, const QuadratureRule& rule,
                            const NearField& near, F&& f) {
    static const Vec3 e0(1, 0, 0), e1(0, 1, 0), e2(0, 0, 1);
    detail::visit_recursive(target, panel.a, panel.b, panel.c, e0, e1, e2, panel.area, rule, near, 0, f);
}

/// Integral of a kernel times {1, l_a, l_b, l_c} (l = barycentric hat functions).
using PanelMoments = std::array<double, 4>;

namespace detail {

inline Vec3 barycentric_of(const Triangle& t, const Vec3& p) {
    const Vec3 n2 = (t.b - t.a).cross(t.c - t.a);
    const double inv = 1.0 / n2.squaredNorm();
    const double la = (t.b - p).cross(t.c - p).dot(n2) * inv;
    const double lb = (t.c - p).cross(t.a - p).dot(n2) * inv;
    return Vec3(la, lb, 1.0 - la - lb);
}

// Sub-triangle (T, A, B) in polar coordinates around T. Edge AB is at distance h from T;
// phi is measured from the foot of the perpendicular, so the ray length is h / cos(phi).
struct PolarWedge {
    double h = 0.0, phi_a = 0.0, phi_b = 0.0;
    Vec3 m, t; // unit vectors: towards the foot, along A->B
    bool valid = false;

    PolarWedge(const Vec3& T, const Vec3& A, const Vec3& B) {
        const Vec3 ab = B - A;
        const double len = ab.norm();
        t = ab / len;
        const Vec3 foot = A + (T - A).dot(t) * t;
        const Vec3 tf = foot - T;
        h = tf.norm();
        if (h <= 1e-13 * len) return;
        m = tf / h;
        phi_a = std::atan2((A - T).dot(t), h);
        phi_b = std::atan2((B - T).dot(t), h);
        valid = true;
    }
};

} // namespace detail

/// Laplace single layer over a flat panel against {1, l_a, l_b, l_c} with the target in the
/// closed panel. Radial and angular integrals are both closed form.
inline PanelMoments laplace_self_moments(const Triangle& panel, const Vec3& target) {
    const Vec3 lam_t = detail::barycentric_of(panel, target);
    const double tol = 1e-9;
    const double off_plane = std::abs((target - panel.a).dot(panel.normal));
    if (off_plane > tol * panel.diameter || lam_t.minCoeff() < -tol)
        throw DomainError("singular self integral requested for a target outside the panel");

    std::array<Vec3, 3> grad;
    for (int k = 0; k < 3; ++k) {
        const Vec3& p = panel.vertex((k + 1) % 3);
        const Vec3& q = panel.vertex((k + 2) % 3);
        grad[k] = panel.normal.cross(q - p) / (2.0 * panel.area);
    }

    PanelMoments out{0.0, 0.0, 0.0, 0.0};
    for (int e = 0; e < 3; ++e) {
        const detail::PolarWedge w(target, panel.vertex(e), panel.vertex((e + 1) % 3));
        if (!w.valid) continue;
        const double S = std::atanh(std::sin(w.phi_b)) - std::atanh(std::sin(w.phi_a));
        const double dsec = 1.0 / std::cos(w.phi_b) - 1.0 / std::cos(w.phi_a);
        out[0] += w.h * S;
        for (int k = 0; k < 3; ++k) {
            const double a = grad[k].dot(w.m), b = grad[k].dot(w.t);
            out[k + 1] += lam_t[k] * w.h * S + 0.5 * w.h * w.h * (a * S + b * dsec);
        }
    }
    for (double& v : out) v /= kFourPi;
    return out;
}

/// Moments of the bounded difference (e^{-kappa r} - 1) / (4 pi r) over a panel containing the
/// target: closed-form radial integrals, Gauss-Legendre in angle.
inline PanelMoments yukawa_self_correction_moments(const Triangle& panel, const Vec3& target, double kappa) {
    PanelMoments out{0.0, 0.0, 0.0, 0.0};
    if (kappa == 0.0) return out;
    const Vec3 lam_t = detail::barycentric_of(panel, target);
    std::array<Vec3, 3> grad;
    for (int k = 0; k < 3; ++k) {
        const Vec3& p = panel.vertex((k + 1) % 3);
        const Vec3& q = panel.vertex((k + 2) % 3);
        grad[k] = panel.normal.cross(q - p) / (2.0 * panel.area);
    }
    const GaussLegendre& gl = angular_rule();
    for (int e = 0; e < 3; ++e) {
        const detail::PolarWedge w(target, panel.vertex(e), panel.vertex((e + 1) % 3));
        if (!w.valid) continue;
        // u = asinh(tan phi) spreads the nodes along the edge; thin wedges (target near the
        // edge) otherwise put the whole integrand into a few degrees at the ends.
        const double ua = std::asinh(std::tan(w.phi_a)), ub = std::asinh(std::tan(w.phi_b));
        const double half = 0.5 * (ub - ua), mid = 0.5 * (ub + ua);
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
            const double u = mid + half * gl.nodes[q];
            const double ch = std::cosh(u);
            const double wq = half * gl.weights[q] / ch;
            const double c = 1.0 / ch, s = std::tanh(u);
            const double R = w.h * ch;
            const double x = kappa * R;
            const double em1 = std::expm1(-x);                                      // e^{-x} - 1
            const double i0 = (-em1 - x) / kappa;                                     // int_0^R (e^{-kr}-1) dr
            const double i1 = (-em1 - x * (em1 + 1.0)) / (kappa * kappa) - 0.5 * R * R; // int_0^R r (e^{-kr}-1) dr
            const Vec3 dir = c * w.m + s * w.t;
            out[0] += wq * i0;
            for (int k = 0; k < 3; ++k) out[k + 1] += wq * (lam_t[k] * i0 + grad[k].dot(dir) * i1);
        }
    }
    for (double& v : out) v /= kFourPi;
    return out;
}

/// Integral of 1/(4 pi |x - target|) over a panel that contains the target.
inline double singular_self_integral(const Triangle& panel, const Vec3& target) {
    return laplace_self_moments(panel, target)[0];
}

/// Yukawa analogue: Laplace self term plus the bounded correction.
inline double singular_self_integral_yukawa(const Triangle& panel, const Vec3& target, double kappa) {
    return laplace_self_moments(panel, target)[0] + yukawa_self_correction_moments(panel, target, kappa)[0];
}

} // namespace pbem
