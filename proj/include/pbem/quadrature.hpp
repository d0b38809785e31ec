#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pbem/geometry.hpp"

namespace pbem {

/// Symmetric rule on the reference triangle. Points are barycentric, weights sum to 1
/// so that sum_q w_q f(x_q) * area approximates the integral over a physical triangle.
struct QuadratureRule {
    std::vector<Vec3> points;
    std::vector<double> weights;
    int degree = 0;

    std::size_t size() const { return points.size(); }
};

namespace rules {

inline const QuadratureRule& centroid() {
    static const QuadratureRule r{{Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)}, {1.0}, 1};
    return r;
}

/// Interior 3-point rule, degree 2.
inline const QuadratureRule& three_point() {
    static const QuadratureRule r{{Vec3(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0), Vec3(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
                                   Vec3(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0)},
                                  {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                                  2};
    return r;
}

/// Radon 7-point rule, degree 5.
inline const QuadratureRule& seven_point() {
    static const QuadratureRule r = [] {
        const double s15 = std::sqrt(15.0);
        const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
        const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
        const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
        QuadratureRule q;
        q.degree = 5;
        q.points = {Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
                    Vec3(b1, a1, a1), Vec3(a1, b1, a1), Vec3(a1, a1, b1),
                    Vec3(b2, a2, a2), Vec3(a2, b2, a2), Vec3(a2, a2, b2)};
        q.weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
        return q;
    }();
    return r;
}

} // namespace rules

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

/// Fixed Gauss-Legendre rule used for angular integrals of the singular self terms.
struct GaussLegendre {
    std::vector<double> nodes, weights;
    explicit GaussLegendre(int n) { gauss_legendre(n, nodes, weights); }
};

inline const GaussLegendre& angular_rule() {
    static const GaussLegendre r(32);
    return r;
}

} // namespace pbem
