#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "scamp/denoise.hpp"
#include "scamp/design.hpp"
#include "scamp/errors.hpp"
#include "scamp/state_evolution.hpp"
#include "scamp/types.hpp"

namespace scamp {

enum class SeParamMode { online_estimate, precomputed_se };

struct AmpConfig {
    int max_iters = 300;
    double tol = 1e-9;
    SeParamMode se_mode = SeParamMode::online_estimate;
    /// Fraction of the new estimate kept each iteration; 1 disables damping.
    double damping = 1.0;
};

inline void validate(const AmpConfig& cfg) {
    if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(cfg.tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
}

/// Smallest per-block mean square used when forming 1 / msq.
constexpr double kMsqFloor = 1e-200;

/// Snapshot handed to observers after iteration k produced beta_hat^{k+1}.
struct QgtAmpIterate {
    int k = 0;
    const Vector* theta = nullptr;     // Theta~^k
    const Vector* beta_eff = nullptr;  // beta^{k+1}
    const Vector* beta_hat = nullptr;  // beta_hat^{k+1}
    const Vector* msq = nullptr;       // per row block, phi^k
    const Vector* chi2 = nullptr;      // per column block, chi2^{k+1}
    const Vector* onsager = nullptr;   // per row block, b^{k+1}
};

using QgtObserver = std::function<void(const QgtAmpIterate&)>;

struct QgtTraceRow {
    int k = 0;
    Vector chi2;
    double mse = std::numeric_limits<double>::quiet_NaN();
    double correlation = std::numeric_limits<double>::quiet_NaN();
};

struct QgtAmpResult {
    Vector beta_hat;
    Vector beta_eff;
    Vector theta;
    Vector chi2;
    Vector msq;
    bool converged = false;
    int iterations = 0;
    std::vector<QgtTraceRow> trace;
};

struct QgtAmpOptions {
    AmpConfig config;
    const ScalarSeResult* se = nullptr;  // required for precomputed_se
    const Vector* truth = nullptr;       // enables the per-iteration trace
    QgtObserver observer;
};

namespace detail {

inline void check_finite(const Vector& v, const char* what, int k) {
    if (!v.allFinite()) throw DivergenceError(std::string("non-finite ") + what, k);
}

inline double sq_correlation(const Vector& a, const Vector& b) {
    const double na = a.squaredNorm();
    const double nb = b.squaredNorm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double d = a.dot(b);
    return d * d / (na * nb);
}

} // namespace detail

/// SC-AMP for the rescaled QGT model yt = X~ beta + noise.
///
///   Theta^k     = yt - X~ beta_hat^k + b^k . Q^{k-1} . Theta^{k-1}
///   beta^{k+1}  = X~^T (Q^k . Theta^k) + chi2^{k+1} . beta_hat^k
///   beta_hat^{k+1} = f(beta^{k+1}; chi2^{k+1})
///
/// with Q^k_i = 1 / phi^k_{r(i)}, chi2^{k+1}_c = sum_r W~_rc / phi^k_r and
/// b^{k+1}_i = sum_c W~_{r(i)c} (R / n) sum_{j in J_c} f'(beta^{k+1}_j).
inline QgtAmpResult run_sc_amp_qgt(const Design& design, const Vector& yt, double pi,
                                   double sigma2, const QgtAmpOptions& opt = {}) {
    validate(opt.config);
    const auto& base = design.base();
    const Index n = design.rows();
    const Index p = design.cols();
    const Index R = base.rows();
    const Index C = base.cols();
    const Index nr = design.row_block_size();
    const Index pc = design.col_block_size();
    if (yt.size() != n) throw ConfigError("observation length does not match design rows");
    if (!(sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
    if (opt.config.se_mode == SeParamMode::precomputed_se &&
        (opt.se == nullptr || opt.se->steps.empty())) {
        throw ConfigError("precomputed_se mode needs a state evolution trajectory");
    }
    if (opt.truth != nullptr && opt.truth->size() != p) throw ConfigError("truth length mismatch");

    const BernoulliDenoiser den(pi);
    QgtAmpResult res;
    Vector beta_hat = Vector::Constant(p, pi);
    Vector theta = yt - design.rescaled_times(beta_hat);
    Vector beta_eff = Vector::Zero(p);
    Vector msq(R);
    Vector chi2(C);
    Vector onsager(R);
    Vector weighted(n);
    Vector deriv_sum(C);

    for (int k = 0; k < opt.config.max_iters; ++k) {
        if (opt.config.se_mode == SeParamMode::online_estimate) {
            for (Index r = 0; r < R; ++r) {
                msq[r] = std::max(theta.segment(r * nr, nr).squaredNorm() / nr, kMsqFloor);
            }
            chi2 = se_chi2(base, msq);
        } else {
            const auto& steps = opt.se->steps;
            const auto& step = steps[std::min<std::size_t>(static_cast<std::size_t>(k), steps.size() - 1)];
            msq = step.phi.cwiseMax(kMsqFloor);
            chi2 = step.chi2_next;
        }

        for (Index r = 0; r < R; ++r) weighted.segment(r * nr, nr) = theta.segment(r * nr, nr) / msq[r];
        beta_eff = design.rescaled_transpose_times(weighted);
        for (Index c = 0; c < C; ++c) beta_eff.segment(c * pc, pc) += chi2[c] * beta_hat.segment(c * pc, pc);
        detail::check_finite(beta_eff, "effective observation", k);

        Vector next(p);
        for (Index c = 0; c < C; ++c) {
            double acc = 0.0;
            for (Index j = c * pc; j < (c + 1) * pc; ++j) {
                next[j] = den.mean(beta_eff[j], chi2[c]);
                acc += den.deriv(beta_eff[j], chi2[c]);
            }
            deriv_sum[c] = acc;
        }
        if (opt.config.damping < 1.0) {
            next = opt.config.damping * next + (1.0 - opt.config.damping) * beta_hat;
        }
        detail::check_finite(next, "estimate", k);

        const double change = (next - beta_hat).norm() / std::sqrt(static_cast<double>(p));
        beta_hat = std::move(next);

        for (Index r = 0; r < R; ++r) {
            double b = 0.0;
            for (Index c = base.first_col(r); c <= base.last_col(r); ++c) {
                b += base.W_tilde(r, c) * deriv_sum[c];
            }
            onsager[r] = b * static_cast<double>(R) / static_cast<double>(n);
        }

        if (opt.observer) {
            QgtAmpIterate it;
            it.k = k;
            it.theta = &theta;
            it.beta_eff = &beta_eff;
            it.beta_hat = &beta_hat;
            it.msq = &msq;
            it.chi2 = &chi2;
            it.onsager = &onsager;
            opt.observer(it);
        }
        if (opt.truth != nullptr) {
            QgtTraceRow row;
            row.k = k + 1;
            row.chi2 = chi2;
            row.mse = (beta_hat - *opt.truth).squaredNorm() / static_cast<double>(p);
            row.correlation = detail::sq_correlation(beta_hat, *opt.truth);
            res.trace.push_back(std::move(row));
        }

        Vector next_theta = yt - design.rescaled_times(beta_hat);
        for (Index r = 0; r < R; ++r) {
            next_theta.segment(r * nr, nr) += (onsager[r] / msq[r]) * theta.segment(r * nr, nr);
        }
        detail::check_finite(next_theta, "residual", k);
        theta = std::move(next_theta);
        res.iterations = k + 1;

        if (change < opt.config.tol) {
            res.converged = true;
            break;
        }
    }

    res.beta_hat = std::move(beta_hat);
    res.beta_eff = std::move(beta_eff);
    res.theta = std::move(theta);
    res.chi2 = chi2;
    res.msq = msq;
    return res;
}

// ---------------------------------------------------------------------------
// Quantisation.

enum class QuantizeMode { threshold_half, row_argmax };

/// 1 where value > 0.5 (strict).
inline Vector quantize(const Vector& estimate) {
    return (estimate.array() > 0.5).cast<double>().matrix();
}

inline RowMatrix quantize(const RowMatrix& estimate, QuantizeMode mode) {
    RowMatrix out = RowMatrix::Zero(estimate.rows(), estimate.cols());
    if (mode == QuantizeMode::threshold_half) {
        out = (estimate.array() > 0.5).cast<double>().matrix();
        return out;
    }
    for (Index j = 0; j < estimate.rows(); ++j) {
        Index best = 0;
        for (Index l = 1; l < estimate.cols(); ++l) {
            if (estimate(j, l) > estimate(j, best)) best = l;
        }
        out(j, best) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Column-wise SC-AMP for pooled data.

struct ColumnwiseAmpResult {
    RowMatrix B_hat;               // p x L, unquantised
    std::vector<QgtAmpResult> columns;
    std::vector<std::string> errors;  // per column; empty string on success
};

/// Runs scalar SC-AMP on each column of Yt with prior Bernoulli(pi_l) and
/// noise variance sigma2[l]. A degenerate pi_l yields the constant column.
inline ColumnwiseAmpResult run_columnwise_sc_amp(const Design& design, const RowMatrix& Yt,
                                                 const Vector& pi, const Vector& sigma2,
                                                 const AmpConfig& config = {}) {
    const Index L = pi.size();
    if (Yt.rows() != design.rows() || Yt.cols() != L || sigma2.size() != L) {
        throw ConfigError("column-wise SC-AMP: dimension mismatch");
    }
    ColumnwiseAmpResult res;
    res.B_hat = RowMatrix::Zero(design.cols(), L);
    res.columns.resize(static_cast<std::size_t>(L));
    res.errors.resize(static_cast<std::size_t>(L));
    for (Index l = 0; l < L; ++l) {
        if (pi[l] <= 0.0 || pi[l] >= 1.0) {
            res.B_hat.col(l).setConstant(pi[l] >= 1.0 ? 1.0 : 0.0);
            continue;
        }
        try {
            QgtAmpOptions opt;
            opt.config = config;
            auto r = run_sc_amp_qgt(design, Yt.col(l), pi[l], sigma2[l], opt);
            res.B_hat.col(l) = r.beta_hat;
            res.columns[static_cast<std::size_t>(l)] = std::move(r);
        } catch (const NumericalError& e) {
            std::ostringstream msg;
            msg << "column " << l << ": " << e.what();
            res.errors[static_cast<std::size_t>(l)] = msg.str();
            res.B_hat.col(l).setConstant(pi[l]);
        }
    }
    return res;
}

} // namespace scamp
