#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pbem/errors.hpp"
#include "pbem/geometry.hpp"
#include "pbem/mesh.hpp"

namespace pbem {

/// e^2 N_A / (4 pi eps_0) in kcal mol^-1 Angstrom e^-2, from CODATA-1998 constants.
inline constexpr double kCoulombKcal = 332.0636817823835;

/// Material parameters of the solute/solvent pair. Lengths in Angstrom, kappa in 1/Angstrom.
struct BiePhysics {
    double eps_m = 4.0;
    double eps_w = 80.0;
    double kappa = 0.125;
    /// kcal/mol per internal energy unit (potentials carry the 1/(4 pi) of the Green's function).
    double energy_unit = kFourPi * kCoulombKcal;

    void validate() const {
        if (!(eps_m > 0.0) || !(eps_w > 0.0)) throw ConfigError("permittivities must be positive");
        if (!(kappa >= 0.0)) throw ConfigError("kappa must be non-negative");
        if (!(energy_unit > 0.0)) throw ConfigError("energy unit must be positive");
    }
};

/// Point charges (elementary charges) at positions in Angstrom.
struct ChargeSet {
    std::vector<Vec3> positions;
    std::vector<double> charges;

    std::size_t size() const { return charges.size(); }

    void add(const Vec3& r, double q) {
        positions.push_back(r);
        charges.push_back(q);
    }

    ChargeSet scaled(double lambda) const {
        ChargeSet c = *this;
        for (double& q : c.charges) q *= lambda;
        return c;
    }
};

/// Winding number of a closed outward mesh around p (1 inside, 0 outside).
inline double winding_number(const SurfaceMesh& mesh, const Vec3& p) {
    double s = 0.0;
    const auto& v = mesh.vertices();
    for (const auto& t : mesh.triangles()) s += solid_angle(p, v[t[0]], v[t[1]], v[t[2]]);
    return s / kFourPi;
}

inline void require_inside(const SurfaceMesh& mesh, const ChargeSet& charges) {
    if (charges.size() == 0) throw DomainError("charge set is empty");
    for (const auto& r : charges.positions)
        if (winding_number(mesh, r) < 0.5) throw DomainError("charge lies outside the surface");
}

struct CoulombTrace {
    Eigen::VectorXd value;  // u_c
    Eigen::VectorXd normal; // du_c/dn
};

/// Coulomb potential u_c = (1/eps_m) sum q_k / (4 pi |r - r_k|) and its normal derivative.
inline CoulombTrace coulomb_trace(const ChargeSet& charges, const BiePhysics& physics, const std::vector<Vec3>& points,
                                  const std::vector<Vec3>& normals) {
    if (points.size() != normals.size()) throw Error("coulomb_trace: points and normals differ in length");
    CoulombTrace out{Eigen::VectorXd::Zero(points.size()), Eigen::VectorXd::Zero(points.size())};
    const double scale = 1.0 / (kFourPi * physics.eps_m);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double u = 0.0, du = 0.0;
        for (std::size_t k = 0; k < charges.size(); ++k) {
            const Vec3 d = points[i] - charges.positions[k];
            const double r = d.norm();
            if (r < 1e-12) throw DomainError("Coulomb potential evaluated on a charge");
            u += charges.charges[k] / r;
            du -= charges.charges[k] * d.dot(normals[i]) / (r * r * r);
        }
        out.value[i] = scale * u;
        out.normal[i] = scale * du;
    }
    return out;
}

/// Single-point variant used inside quadrature loops (no allocation).
inline std::pair<double, double> coulomb_at(const ChargeSet& charges, double eps_m, const Vec3& x, const Vec3& n) {
    double u = 0.0, du = 0.0;
    for (std::size_t k = 0; k < charges.size(); ++k) {
        const Vec3 d = x - charges.positions[k];
        const double r2 = d.squaredNorm();
        const double inv = 1.0 / std::sqrt(r2);
        u += charges.charges[k] * inv;
        du -= charges.charges[k] * d.dot(n) * inv * inv * inv;
    }
    const double s = 1.0 / (kFourPi * eps_m);
    return {s * u, s * du};
}

/// Reads ATOM/HETATM records of a PQR file. Fields are whitespace separated; the chain
/// column is optional, so the last five fields are always x y z charge radius.
inline ChargeSet load_pqr(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    ChargeSet out;
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        auto tok = detail::split_ws(line);
        if (tok.empty() || (tok[0] != "ATOM" && tok[0] != "HETATM")) continue;
        if (tok.size() != 10 && tok.size() != 11)
            throw ParseError(path + ": expected 10 or 11 fields in atom record", no);
        const std::size_t base = tok.size() - 5;
        const Vec3 r(detail::parse_double(tok[base], no), detail::parse_double(tok[base + 1], no),
                     detail::parse_double(tok[base + 2], no));
        out.add(r, detail::parse_double(tok[base + 3], no));
    }
    if (out.size() == 0) throw ParseError(path + ": no charges");
    return out;
}

} // namespace pbem
