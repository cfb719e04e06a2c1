#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "scamp/types.hpp"

// Reference implementations shared by the unit tests and the acceptance run.
namespace oracles {

using scamp::Index;
using scamp::Matrix;
using scamp::Vector;


// Textbook AMP for y = A x + w with an i.i.d. Bernoulli(pi) prior:
//   s = x + A^T z,  tau^2 = |z|^2 / n,  x' = eta(s; tau^2),
//   z' = y - A x' + (p / n) z mean(eta'(s)).
// Written from scratch over a dense matrix; shares nothing with the library.
inline std::vector<Vector> textbook_amp(const Matrix& A, const Vector& y, double pi, int iters) {
    const Index n = A.rows();
    const Index p = A.cols();
    const double lo = std::log(pi / (1.0 - pi));
    Vector x = Vector::Constant(p, pi);
    Vector z = y - A * x;
    std::vector<Vector> out;
    for (int t = 0; t < iters; ++t) {
        const double tau2 = z.squaredNorm() / static_cast<double>(n);
        const Vector s = x + A.transpose() * z;
        Vector xn(p);
        double deriv = 0.0;
        for (Index j = 0; j < p; ++j) {
            // log-odds of beta = 1 given s = beta + tau G
            const double llr = lo + (s[j] - 0.5) / tau2;
            const double post = 1.0 / (1.0 + std::exp(-llr));
            xn[j] = post;
            deriv += post * (1.0 - post) / tau2;
        }
        deriv /= static_cast<double>(p);
        z = y - A * xn + (static_cast<double>(p) / static_cast<double>(n)) * deriv * z;
        x = xn;
        out.push_back(x);
    }
    return out;
}


// Smallest objective over all basic feasible solutions of {X b = y, 0 <= b <= 1}.
inline double lp_vertex_oracle(const Matrix& X_full, const Vector& y_full) {
    // Keep a maximal set of linearly independent rows.
    std::vector<Index> rows;
    Matrix kept(0, X_full.cols());
    for (Index i = 0; i < X_full.rows(); ++i) {
        Matrix trial(kept.rows() + 1, X_full.cols());
        trial << kept, X_full.row(i);
        Eigen::FullPivLU<Matrix> lu(trial);
        lu.setThreshold(1e-10);
        if (lu.rank() == trial.rows()) {
            kept = trial;
            rows.push_back(i);
        }
    }
    const Matrix X = kept;
    Vector y(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) y[static_cast<Index>(k)] = y_full[rows[k]];
    const Index n = X.rows();
    const Index p = X.cols();
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> in_basis(static_cast<std::size_t>(p), false);
    std::fill(in_basis.begin(), in_basis.begin() + n, true);
    std::sort(in_basis.begin(), in_basis.end());
    do {
        std::vector<Index> B;
        std::vector<Index> N;
        for (Index j = 0; j < p; ++j) (in_basis[static_cast<std::size_t>(j)] ? B : N).push_back(j);
        Matrix XB(n, n);
        for (Index k = 0; k < n; ++k) XB.col(k) = X.col(B[static_cast<std::size_t>(k)]);
        Eigen::FullPivLU<Matrix> lu(XB);
        if (!lu.isInvertible()) continue;
        const auto nn = static_cast<unsigned>(N.size());
        for (unsigned mask = 0; mask < (1u << nn); ++mask) {
            Vector rhs = y;
            double obj = 0.0;
            for (unsigned k = 0; k < nn; ++k) {
                if (mask & (1u << k)) {
                    rhs -= X.col(N[k]);
                    obj += 1.0;
                }
            }
            const Vector xb = lu.solve(rhs);
            if ((xb.array() < -1e-9).any() || (xb.array() > 1.0 + 1e-9).any()) continue;
            best = std::min(best, obj + xb.sum());
        }
    } while (std::next_permutation(in_basis.begin(), in_basis.end()));
    return best;
}

// Smallest weight of a binary vector with X b = y, by exhaustive search.
inline double binary_min_weight(const Matrix& X, const Vector& y) {
    const Index p = X.cols();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned long mask = 0; mask < (1ul << p); ++mask) {
        Vector b(p);
        for (Index j = 0; j < p; ++j) b[j] = (mask >> j) & 1ul ? 1.0 : 0.0;
        if ((X * b - y).cwiseAbs().maxCoeff() > 1e-9) continue;
        best = std::min(best, b.sum());
    }
    return best;
}

} // namespace oracles
