#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "pbem/errors.hpp"
#include "pbem/physics.hpp"

namespace pbem {

/// Point charges inside a dielectric sphere centered at the origin.
struct SphereCase {
    double radius = 1.0;
    ChargeSet charges;
    BiePhysics physics;
    int n_terms = 50;
};

inline constexpr int kKirkwoodMaxTerms = 200;

namespace detail {

// f_n of the reaction field: the reaction potential inside is
// sum_n f_n (q / 4pi) r^n r_k^n P_n(cos) / R^(2n+1) for a unit charge at r_k.
// g_n = x k_n'(x) / k_n(x) = -(n+1) - x k_{n-1}(x) / k_n(x), x = kappa R (g_n = -(n+1) for kappa = 0).
inline double kirkwood_coefficient(int n, double eps_m, double eps_w, double g) {
    return ((n + 1) + eps_w * g / eps_m) / (eps_m * n - eps_w * g);
}

} // namespace detail

/// Reaction energy (kcal/mol) of point charges in a sphere of permittivity eps_m surrounded by a
/// Debye-Hueckel medium (Kirkwood 1934). The ion-exclusion radius equals the sphere radius.
inline double kirkwood_energy(const SphereCase& sc) {
    const ChargeSet& ch = sc.charges;
    if (ch.size() == 0) throw ConfigError("kirkwood: empty charge set");
    if (sc.n_terms < 1 || sc.n_terms > kKirkwoodMaxTerms)
        throw ConfigError("kirkwood: n_terms must be in [1, " + std::to_string(kKirkwoodMaxTerms) + "]");
    if (!(sc.radius > 0.0)) throw ConfigError("kirkwood: radius must be positive");
    sc.physics.validate();
    std::vector<double> r(ch.size());
    for (std::size_t i = 0; i < ch.size(); ++i) {
        r[i] = ch.positions[i].norm();
        if (!(r[i] < sc.radius)) throw DomainError("kirkwood: charge not strictly inside the sphere");
    }
    const double R = sc.radius, em = sc.physics.eps_m, ew = sc.physics.eps_w;
    const double x = sc.physics.kappa * R;
    double rho = 1.0; // k_{n-1}(x) / k_n(x); k_{-1} = k_0 for the modified spherical Bessel k
    double total = 0.0, bound = 0.0;
    for (int n = 0; n < sc.n_terms; ++n) {
        const double g = x > 0.0 ? -(n + 1) - x * rho : -(n + 1.0);
        const double f = detail::kirkwood_coefficient(n, em, ew, g);
        double s = 0.0, major = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i) {
            major += std::abs(ch.charges[i]) * std::pow(r[i] / R, n);
            for (std::size_t j = 0; j < ch.size(); ++j) {
                const double rr = r[i] * r[j];
                double cosg = 1.0;
                if (rr > 0.0) cosg = std::clamp(ch.positions[i].dot(ch.positions[j]) / rr, -1.0, 1.0);
                s += ch.charges[i] * ch.charges[j] * std::pow(rr, n) * std::legendre(n, cosg);
            }
        }
        total += f * s / std::pow(R, 2 * n + 1);
        bound = std::abs(f) * major * major / R;
        if (x > 0.0) rho = 1.0 / (rho + (2 * n + 1) / x);
        if (bound <= 1e-10 * std::abs(total) || bound == 0.0) return sc.physics.energy_unit / kFourPi * 0.5 * total;
    }
    throw NumericError("kirkwood series not converged", sc.physics.energy_unit / kFourPi * 0.5 * bound);
}

/// Born energy of a centered ion (kcal/mol), kappa = 0.
inline double born_energy(double q, double radius, double eps_m, double eps_w, double energy_unit = kFourPi * kCoulombKcal) {
    return energy_unit / kFourPi * 0.5 * q * q / radius * (1.0 / eps_w - 1.0 / eps_m);
}

struct RichardsonResult {
    double extrapolated = 0.0;
    double order = 0.0;
};

/// Three values on meshes with N, 4N, 16N elements; order is reported in 1/N.
inline RichardsonResult richardson(double f1, double f2, double f3) {
    const double d1 = f2 - f1, d2 = f3 - f2;
    if (d1 == 0.0 || d2 == 0.0) throw NumericError("richardson: zero difference between consecutive values");
    if ((d1 > 0.0) != (d2 > 0.0)) throw NumericError("richardson: differences change sign (non-monotone sequence)");
    const double p = std::log(d1 / d2) / std::log(4.0);
    const double denom = std::pow(4.0, p) - 1.0;
    if (denom == 0.0) throw NumericError("richardson: observed order is zero");
    return {f3 + d2 / denom, p};
}

/// Sphere test charges of radius R: "born" (center), "offcenter" (+1 at 0.5R on z), "dipole"
/// (+1 at 0.62R on z, -1/+1 at 0.62R below, 10 degrees apart in the y-z plane).
inline ChargeSet charge_preset(const std::string& name, double R = 1.0) {
    ChargeSet c;
    if (name == "born") {
        c.add(Vec3::Zero(), 1.0);
    } else if (name == "offcenter") {
        c.add(Vec3(0, 0, 0.5 * R), 1.0);
    } else if (name == "dipole") {
        const double r = 0.62 * R, h = 5.0 * kPi / 180.0;
        c.add(Vec3(0, 0, r), 1.0);
        c.add(Vec3(0, -r * std::sin(h), -r * std::cos(h)), -1.0);
        c.add(Vec3(0, r * std::sin(h), -r * std::cos(h)), 1.0);
    } else {
        throw ConfigError("unknown charge preset '" + name + "'");
    }
    return c;
}

} // namespace pbem
