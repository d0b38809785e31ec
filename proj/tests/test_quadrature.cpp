#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pbem;

namespace {

// Integrates x^i y^j over the reference triangle with rule r (area 1/2).
double apply(const QuadratureRule& r, int i, int j) {
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) {
        const Vec3& l = r.points[q];
        s += r.weights[q] * std::pow(l[1], i) * std::pow(l[2], j);
    }
    return 0.5 * s;
}

void check_rule(const QuadratureRule& r) {
    double wsum = 0.0;
    for (double w : r.weights) {
        EXPECT_GT(w, 0.0);
        wsum += w;
    }
    EXPECT_NEAR(wsum, 1.0, 1e-14);
    for (const auto& p : r.points) EXPECT_NEAR(p.sum(), 1.0, 1e-14);
    for (int i = 0; i <= r.degree; ++i)
        for (int j = 0; i + j <= r.degree; ++j)
            EXPECT_NEAR(apply(r, i, j), oracle::reference_monomial(i, j), 1e-14) << "x^" << i << " y^" << j;
}

} // namespace

TEST(Quadrature, CentroidRuleDegreeOne) { check_rule(rules::centroid()); }
TEST(Quadrature, ThreePointRuleDegreeTwo) { check_rule(rules::three_point()); }
TEST(Quadrature, SevenPointRuleDegreeFive) { check_rule(rules::seven_point()); }

TEST(Quadrature, SevenPointRuleIsNotDegreeSix) {
    double worst = 0.0;
    for (int i = 0; i <= 6; ++i)
        worst = std::max(worst, std::abs(apply(rules::seven_point(), i, 6 - i) - oracle::reference_monomial(i, 6 - i)));
    EXPECT_GT(worst, 1e-8);
}

TEST(GaussLegendre, ExactForDegreeTwoNMinusOne) {
    for (int n : {1, 2, 5, 16, 32}) {
        std::vector<double> x, w;
        gauss_legendre(n, x, w);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], k);
            const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
            EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " k=" << k;
        }
    }
}
