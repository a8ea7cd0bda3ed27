#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ndop/common.hpp"

namespace ndop {

struct KrylovResult {
    int iterations = 0;  // operator applications inside Arnoldi
    double residual = 0.0;
    bool converged = false;
};

/// Restarted GMRES in an arbitrary inner product.
///
/// `apply(v)` returns A v, `dot(u, v)` is the inner product. Stops when the
/// true residual norm drops to `abs_tol` or after `max_iter` Arnoldi steps.
/// The true residual is recomputed (one extra application) after every cycle.
template <class Apply, class Dot>
KrylovResult gmres(Apply&& apply, const Vector& b, Vector& x, Dot&& dot, int restart, int max_iter,
                   double abs_tol)
{
    KrylovResult res;
    auto norm = [&](const Vector& v) { return std::sqrt(std::max(0.0, dot(v, v))); };

    Vector r = b - apply(x);
    double beta = norm(r);
    res.residual = beta;
    if (beta <= abs_tol) {
        res.converged = true;
        return res;
    }

    const int m = std::max(1, restart);
    std::vector<Vector> basis;
    basis.reserve(static_cast<std::size_t>(m) + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);

    while (res.iterations < max_iter) {
        basis.clear();
        basis.push_back(r / beta);
        H.setZero();
        g.setZero();
        g[0] = beta;

        int j = 0;
        bool done = false;
        while (j < m && res.iterations < max_iter && !done) {
            Vector w = apply(basis[static_cast<std::size_t>(j)]);
            ++res.iterations;
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (int i = 0; i <= j; ++i) {
                    const double h = dot(w, basis[static_cast<std::size_t>(i)]);
                    H(i, j) += h;
                    w -= h * basis[static_cast<std::size_t>(i)];
                }
            }
            const double hn = norm(w);
            H(j + 1, j) = hn;

            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            const double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = denom > 0.0 ? H(j, j) / denom : 1.0;
            sn[j] = denom > 0.0 ? H(j + 1, j) / denom : 0.0;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            ++j;
            if (std::abs(g[j]) <= abs_tol * 0.5 || hn <= 1e-300) done = true;
            else basis.push_back(w / hn);
        }

        // Back substitution on the triangularized Hessenberg system.
        Vector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
        for (int i = 0; i < j; ++i) x += y[i] * basis[static_cast<std::size_t>(i)];

        r = b - apply(x);
        beta = norm(r);
        res.residual = beta;
        if (beta <= abs_tol) {
            res.converged = true;
            return res;
        }
        if (!std::isfinite(beta)) return res;
    }
    return res;
}

} // namespace ndop
