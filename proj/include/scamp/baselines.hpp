#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "scamp/errors.hpp"
#include "scamp/rng.hpp"
#include "scamp/types.hpp"

namespace scamp {

struct LpOptions {
    int max_iters = 200;
    double tol = 1e-9;  // relative residuals and gap
};

struct LpResult {
    Vector beta;
    double objective = 0.0;
    double gap = 0.0;             // primal - dual objective
    double equality_residual = 0.0;  // ||X beta - y||_inf
    int iterations = 0;
    bool converged = false;
};

/// min sum(beta) s.t. X beta = y, 0 <= beta <= 1, by a Mehrotra
/// predictor-corrector interior point method on the normal equations.
///
/// Dual: max y^T w - 1^T v  s.t.  X^T w + z - v = 1,  z, v >= 0.
inline LpResult lp_estimate(const Matrix& X, const Vector& y, const LpOptions& opt = {}) {
    const Index n = X.rows();
    const Index p = X.cols();
    if (y.size() != n) throw ConfigError("lp_estimate: y length must equal the number of tests");
    if (n == 0 || p == 0) throw ConfigError("lp_estimate: empty system");
    if ((y.array() < 0.0).any() || (y.array() > static_cast<double>(p)).any()) {
        throw NumericalError("lp_estimate: infeasible system (counts outside [0, p])");
    }
    const Vector c = Vector::Ones(p);

    Vector x = Vector::Constant(p, 0.5);
    Vector s = Vector::Constant(p, 0.5);  // 1 - x
    Vector w = Vector::Zero(n);
    Vector z = Vector::Ones(p);
    Vector v = Vector::Ones(p);

    const double ynorm = std::max(1.0, y.lpNorm<Eigen::Infinity>());
    LpResult res;
    Matrix M(n, n);
    Matrix XT(p, n);

    auto max_step = [](const Vector& val, const Vector& dir) {
        double a = 1.0;
        for (Index i = 0; i < val.size(); ++i) {
            if (dir[i] < 0.0) a = std::min(a, -val[i] / dir[i]);
        }
        return a;
    };

    // Best iterate by the worst relative residual; later iterates can lose
    // accuracy once mu reaches rounding level.
    Vector best_x = x;
    Vector best_w = w;
    Vector best_v = v;
    double best_merit = std::numeric_limits<double>::infinity();

    for (int it = 0; it < opt.max_iters; ++it) {
        const Vector rp = y - X * x;
        const Vector rd = c - X.transpose() * w - z + v;
        const double mu = (x.dot(z) + s.dot(v)) / (2.0 * static_cast<double>(p));
        const double primal = x.sum();
        const double dual = y.dot(w) - v.sum();
        const double merit = std::max({rp.lpNorm<Eigen::Infinity>() / ynorm,
                                       rd.lpNorm<Eigen::Infinity>() / std::sqrt(static_cast<double>(p)),
                                       std::abs(primal - dual) / std::max(1.0, std::abs(primal))});
        res.iterations = it;
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_w = w;
            best_v = v;
        }
        if (merit <= opt.tol) {
            res.converged = true;
            break;
        }
        if (mu <= 1e-15 * std::max(1.0, std::abs(primal))) break;

        const Vector theta = (z.cwiseQuotient(x) + v.cwiseQuotient(s)).cwiseInverse();
        XT = X.transpose();
        XT.array().colwise() *= theta.array();
        M.noalias() = X * XT;
        M.diagonal().array() += 1e-14 * std::max(1.0, M.diagonal().maxCoeff());
        Eigen::LLT<Matrix> llt(M);
        if (llt.info() != Eigen::Success) throw NumericalError("lp_estimate: normal equations are singular");

        // Solves for (dx, dw, dz, dv) given complementarity targets rxz, rsv.
        auto solve = [&](const Vector& rxz, const Vector& rsv, Vector& dx, Vector& dw, Vector& dz,
                         Vector& dv) {
            const Vector h = rd - rxz.cwiseQuotient(x) + rsv.cwiseQuotient(s);
            dw = llt.solve(rp + X * theta.cwiseProduct(h));
            dx = theta.cwiseProduct(X.transpose() * dw - h);
            dz = (rxz - z.cwiseProduct(dx)).cwiseQuotient(x);
            dv = (rsv + v.cwiseProduct(dx)).cwiseQuotient(s);
        };

        Vector dx, dw, dz, dv;
        const Vector rxz_aff = -x.cwiseProduct(z);
        const Vector rsv_aff = -s.cwiseProduct(v);
        solve(rxz_aff, rsv_aff, dx, dw, dz, dv);
        const double ap = std::min(max_step(x, dx), max_step(s, -dx));
        const double ad = std::min(max_step(z, dz), max_step(v, dv));
        const double mu_aff = ((x + ap * dx).dot(z + ad * dz) + (s - ap * dx).dot(v + ad * dv)) /
                              (2.0 * static_cast<double>(p));
        const double sigma = std::pow(mu_aff / mu, 3.0);

        const Vector rxz = Vector::Constant(p, sigma * mu) - x.cwiseProduct(z) - dx.cwiseProduct(dz);
        const Vector rsv = Vector::Constant(p, sigma * mu) - s.cwiseProduct(v) + dx.cwiseProduct(dv);
        solve(rxz, rsv, dx, dw, dz, dv);
        const double eta = 0.995;
        const double bp = std::min(1.0, eta * std::min(max_step(x, dx), max_step(s, -dx)));
        const double bd = std::min(1.0, eta * std::min(max_step(z, dz), max_step(v, dv)));
        x += bp * dx;
        s = (Vector::Ones(p) - x).cwiseMax(1e-300);
        x = x.cwiseMax(1e-300);
        w += bd * dw;
        z += bd * dz;
        v += bd * dv;
        if (!x.allFinite() || !w.allFinite()) throw NumericalError("lp_estimate: non-finite iterate");
    }

    res.beta = best_x.cwiseMax(0.0).cwiseMin(1.0);
    res.objective = res.beta.sum();
    res.gap = best_x.sum() - (y.dot(best_w) - best_v.sum());
    res.equality_residual = (X * res.beta - y).lpNorm<Eigen::Infinity>();
    if (!res.converged && res.equality_residual > 1e-6 * ynorm) {
        throw NumericalError("lp_estimate: infeasible system or no convergence");
    }
    return res;
}

struct CvxOptions {
    int max_iters = 100000;
    double tol = 1e-8;  // on the gradient-mapping norm of the normalised objective
    int power_iters = 200;
};

struct CvxResult {
    Vector beta;
    double objective = 0.0;
    double gradient_mapping_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    double lipschitz = 0.0;
};

/// Largest eigenvalue of X^T X by power iteration, inflated by 1%.
inline double gram_spectral_norm(const Matrix& X, int iters = 200) {
    Vector u = Vector::Ones(X.cols()) / std::sqrt(static_cast<double>(X.cols()));
    double lam = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vector next = X.transpose() * (X * u);
        const double nrm = next.norm();
        if (nrm == 0.0) return 0.0;
        const double prev = lam;
        lam = nrm;
        u = next / nrm;
        if (std::abs(lam - prev) <= 1e-12 * lam) break;
    }
    return 1.01 * lam;
}

/// Objective (1 / (2 noise_var)) ||y - X beta||^2 + log((1 - pi) / pi) sum(beta).
inline double cvx_objective(const Matrix& X, const Vector& y, double noise_var, double pi,
                            const Vector& beta) {
    return 0.5 * (y - X * beta).squaredNorm() / noise_var + std::log((1.0 - pi) / pi) * beta.sum();
}

/// Box-constrained MAP relaxation, solved by FISTA with function-value
/// restart on the objective multiplied by noise_var (same minimiser).
inline CvxResult cvx_estimate(const Matrix& X, const Vector& y, double noise_var, double pi,
                              const CvxOptions& opt = {}) {
    if (!(noise_var > 0.0)) throw ConfigError("cvx_estimate: noise variance must be positive");
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("cvx_estimate: pi must lie in (0, 1)");
    if (y.size() != X.rows()) throw ConfigError("cvx_estimate: y length must equal the number of tests");
    const Index p = X.cols();
    const double lam = noise_var * std::log((1.0 - pi) / pi);
    auto project = [](const Vector& b) { return Vector(b.cwiseMax(0.0).cwiseMin(1.0)); };
    auto value = [&](const Vector& Xb, const Vector& b) {
        return 0.5 * (Xb - y).squaredNorm() + lam * b.sum();
    };

    CvxResult res;
    res.lipschitz = std::max(gram_spectral_norm(X, opt.power_iters), 1e-300);
    const double step = 1.0 / res.lipschitz;

    // X x and X yk are carried along so each step costs two products.
    Vector x = Vector::Constant(p, pi);
    Vector Xx = X * x;
    Vector yk = x;
    Vector Xy = Xx;
    double t = 1.0;
    double fx = value(Xx, x);
    Vector g(p);
    bool plain = true;  // yk == x, so the step is a pure projected gradient step
    for (int it = 0; it < opt.max_iters; ++it) {
        g.noalias() = X.transpose() * (Xy - y);
        g.array() += lam;
        Vector x_next = project(yk - step * g);
        res.gradient_mapping_norm = res.lipschitz * (yk - x_next).norm();
        Vector Xx_next = X * x_next;
        double f_next = value(Xx_next, x_next);
        if (f_next > fx && !plain) {
            t = 1.0;
            yk = x;
            Xy = Xx;
            plain = true;
            res.iterations = it + 1;
            continue;
        }
        res.iterations = it + 1;
        if (res.gradient_mapping_norm <= opt.tol) {
            x = std::move(x_next);
            fx = f_next;
            res.converged = true;
            break;
        }
        if ((yk - x_next).dot(x_next - x) > 0.0) t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double m = (t - 1.0) / t_next;
        yk = x_next + m * (x_next - x);
        plain = m == 0.0;
        Xy = Xx_next + m * (Xx_next - Xx);
        x = std::move(x_next);
        Xx = std::move(Xx_next);
        fx = f_next;
        t = t_next;
    }
    res.beta = x;
    res.objective = cvx_objective(X, y, noise_var, pi, x);
    return res;
}

} // namespace scamp
