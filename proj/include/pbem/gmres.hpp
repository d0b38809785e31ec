#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace pbem {

struct GmresResult {
    Eigen::VectorXd x;
    double relative_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Unrestarted GMRES (modified Gram-Schmidt Arnoldi, Givens rotations) from a zero guess.
/// `apply(v, out)` computes out = A v. Stops when ||b - A x|| / ||b|| <= tol.
template <class Apply>
GmresResult gmres(Apply&& apply, const Eigen::VectorXd& b, double tol, int max_iterations) {
    const Eigen::Index n = b.size();
    GmresResult res;
    res.x = Eigen::VectorXd::Zero(n);
    const double beta = b.norm();
    if (beta == 0.0) {
        res.converged = true;
        return res;
    }
    const int m = static_cast<int>(std::min<Eigen::Index>(max_iterations, n));
    std::vector<Eigen::VectorXd> basis;
    basis.reserve(m + 1);
    basis.push_back(b / beta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g[0] = beta;
    Eigen::VectorXd w(n);
    int k = 0;
    double rel = 1.0;
    while (k < m) {
        apply(basis[k], w);
        for (int j = 0; j <= k; ++j) {
            h(j, k) = basis[j].dot(w);
            w -= h(j, k) * basis[j];
        }
        h(k + 1, k) = w.norm();
        for (int j = 0; j < k; ++j) {
            const double t = cs[j] * h(j, k) + sn[j] * h(j + 1, k);
            h(j + 1, k) = -sn[j] * h(j, k) + cs[j] * h(j + 1, k);
            h(j, k) = t;
        }
        const double denom = std::hypot(h(k, k), h(k + 1, k));
        cs[k] = denom == 0.0 ? 1.0 : h(k, k) / denom;
        sn[k] = denom == 0.0 ? 0.0 : h(k + 1, k) / denom;
        const double hk1 = h(k + 1, k);
        h(k, k) = cs[k] * h(k, k) + sn[k] * hk1;
        h(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
        ++k;
        rel = std::abs(g[k]) / beta;
        if (rel <= tol || hk1 == 0.0) break;
        basis.push_back(w / hk1);
    }
    const Eigen::VectorXd y =
        h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int j = 0; j < k; ++j) res.x += y[j] * basis[j];
    // True residual for the report.
    apply(res.x, w);
    res.relative_residual = (b - w).norm() / beta;
    res.iterations = k;
    res.converged = rel <= tol || res.relative_residual <= tol;
    return res;
}

} // namespace pbem
