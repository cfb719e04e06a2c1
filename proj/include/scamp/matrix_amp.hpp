#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "scamp/amp.hpp"
#include "scamp/denoise.hpp"
#include "scamp/design.hpp"
#include "scamp/errors.hpp"
#include "scamp/spd.hpp"
#include "scamp/state_evolution.hpp"
#include "scamp/types.hpp"

namespace scamp {

struct MatrixTraceRow {
    int k = 0;
    Vector tau_trace;  // per column block, tr(T_c)
    double mse = std::numeric_limits<double>::quiet_NaN();
    double correlation = std::numeric_limits<double>::quiet_NaN();
};

struct MatrixAmpIterate {
    int k = 0;
    const RowMatrix* theta = nullptr;           // Theta~^k
    const RowMatrix* B_eff = nullptr;           // B^{k+1}
    const RowMatrix* B_hat = nullptr;           // B_hat^{k+1}
    const std::vector<Matrix>* phi = nullptr;   // R entries
    const std::vector<Matrix>* tau = nullptr;   // C entries
    const std::vector<Matrix>* avg_jac = nullptr;
};

using MatrixObserver = std::function<void(const MatrixAmpIterate&)>;

struct MatrixAmpResult {
    RowMatrix B_hat;
    RowMatrix B_eff;
    RowMatrix theta;
    std::vector<Matrix> phi;
    std::vector<Matrix> tau;
    std::vector<Matrix> avg_jac;
    InverseMode mode = InverseMode::full;
    bool converged = false;
    int iterations = 0;
    std::vector<MatrixTraceRow> trace;
};

struct MatrixAmpOptions {
    AmpConfig config;
    const CovSeResult* se = nullptr;     // required for precomputed_se; needs its trajectory
    const RowMatrix* truth = nullptr;    // enables the trace
    MatrixObserver observer;
};

namespace detail {

inline double pooled_correlation(const RowMatrix& est, const RowMatrix& truth) {
    return est.cwiseProduct(truth).sum() / static_cast<double>(truth.rows());
}

} // namespace detail

/// Matrix SC-AMP for the rescaled pooled model Yt = X~ B + noise.
///
///   Theta^k   = Yt - X~ B_hat^k + U^k
///   B^{k+1}   = V^k + B_hat^k,   B_hat^{k+1} = f_{k+1}(B^{k+1})
///
/// V^k_j = sum_i X~_ij Theta^k_i Q^k_{r(i)c(j)}, and U^k_i is Theta^{k-1}_i
/// times (1/delta_in) sum_c W~_rc Q^{k-1}_rc <f_k'(B^k)>_c^T, i.e. the
/// Jacobian of the denoiser that produced B_hat^k.
inline MatrixAmpResult run_matrix_sc_amp(const Design& design, const RowMatrix& Yt,
                                         const Vector& pi, const Matrix& noise_cov,
                                         const MatrixAmpOptions& opt = {}) {
    validate(opt.config);
    const auto& base = design.base();
    const Index n = design.rows();
    const Index p = design.cols();
    const Index R = base.rows();
    const Index C = base.cols();
    const Index nr = design.row_block_size();
    const Index pc = design.col_block_size();
    const Index L = pi.size();
    if (Yt.rows() != n || Yt.cols() != L) throw ConfigError("observations must be n x L");
    if (noise_cov.rows() != L || noise_cov.cols() != L) throw ConfigError("noise covariance must be L x L");
    if (std::abs(pi.sum() - 1.0) > 1e-12 || (pi.array() < 0.0).any()) {
        throw ConfigError("pi must be a probability vector");
    }
    const bool precomputed = opt.config.se_mode == SeParamMode::precomputed_se;
    if (precomputed && (opt.se == nullptr || opt.se->steps.empty())) {
        throw ConfigError("precomputed_se mode needs a covariance state evolution trajectory");
    }
    if (opt.truth != nullptr && (opt.truth->rows() != p || opt.truth->cols() != L)) {
        throw ConfigError("truth shape mismatch");
    }

    MatrixAmpResult res;
    res.mode = pooled_inverse_mode(noise_cov);
    const SpdInverter inv(L, res.mode);
    const double din = delta_in(base, static_cast<double>(n) / static_cast<double>(p));

    RowMatrix B_hat(p, L);
    B_hat.rowwise() = pi.transpose();
    RowMatrix theta = Yt - design.rescaled_times(B_hat);
    RowMatrix B_eff = RowMatrix::Zero(p, L);
    std::vector<Matrix> phi(static_cast<std::size_t>(R), Matrix::Zero(L, L));
    std::vector<Matrix> phi_inv(static_cast<std::size_t>(R));
    std::vector<Matrix> tau(static_cast<std::size_t>(C));
    std::vector<Matrix> avg_jac(static_cast<std::size_t>(C), Matrix::Zero(L, L));
    std::vector<Matrix> onsager(static_cast<std::size_t>(R));
    RowMatrix Zr(nr, L);

    for (int k = 0; k < opt.config.max_iters; ++k) {
        if (precomputed) {
            const auto& steps = opt.se->steps;
            phi = steps[std::min<std::size_t>(static_cast<std::size_t>(k), steps.size() - 1)].phi;
        } else {
            for (Index r = 0; r < R; ++r) {
                const auto rows = theta.middleRows(r * nr, nr);
                phi[r] = rows.transpose() * rows / static_cast<double>(nr);
            }
        }
        for (Index r = 0; r < R; ++r) phi_inv[r] = inv.inverse(phi[r], "phi", r);
        for (Index c = 0; c < C; ++c) {
            Matrix prec = Matrix::Zero(L, L);
            for (Index r = c; r < std::min(R, c + base.omega); ++r) prec += base.W_tilde(r, c) * phi_inv[r];
            tau[c] = inv.inverse(prec, "tau precision", c);
        }

        // V^k, then B^{k+1} = V^k + B_hat^k.
        B_eff = B_hat;
        for (Index c = 0; c < C; ++c) {
            RowMatrix out = RowMatrix::Zero(pc, L);
            for (Index r = c; r < std::min(R, c + base.omega); ++r) {
                const Matrix Q = phi_inv[r] * tau[c];
                Zr.noalias() = theta.middleRows(r * nr, nr) * Q;
                design.accumulate_block_transpose(r, c, Zr, out);
            }
            B_eff.middleRows(c * pc, pc) += out;
        }
        if (!B_eff.allFinite()) throw DivergenceError("non-finite effective observation", k);

        RowMatrix next(p, L);
        for (Index c = 0; c < C; ++c) {
            const CategoricalDenoiser den(pi, inv.inverse(tau[c], "tau", c));
            Matrix jac = Matrix::Zero(L, L);
            Vector s(L);
            Vector f(L);
            for (Index j = c * pc; j < (c + 1) * pc; ++j) {
                s = B_eff.row(j).transpose();
                den.apply(s.data(), f.data(), &jac);
                next.row(j) = f.transpose();
            }
            avg_jac[c] = jac / static_cast<double>(pc);
        }
        if (opt.config.damping < 1.0) {
            next = opt.config.damping * next + (1.0 - opt.config.damping) * B_hat;
        }
        if (!next.allFinite()) throw DivergenceError("non-finite estimate", k);
        const double change = (next - B_hat).norm() / std::sqrt(static_cast<double>(p));
        B_hat = std::move(next);

        if (opt.observer) {
            MatrixAmpIterate it;
            it.k = k;
            it.theta = &theta;
            it.B_eff = &B_eff;
            it.B_hat = &B_hat;
            it.phi = &phi;
            it.tau = &tau;
            it.avg_jac = &avg_jac;
            opt.observer(it);
        }
        if (opt.truth != nullptr) {
            MatrixTraceRow row;
            row.k = k + 1;
            row.tau_trace.resize(C);
            for (Index c = 0; c < C; ++c) row.tau_trace[c] = tau[c].trace();
            row.mse = (B_hat - *opt.truth).squaredNorm() / static_cast<double>(p);
            row.correlation = detail::pooled_correlation(B_hat, *opt.truth);
            res.trace.push_back(std::move(row));
        }

        // U^{k+1} uses Theta^k, Q^k and the Jacobian average of f_{k+1} at B^{k+1}.
        RowMatrix next_theta = Yt - design.rescaled_times(B_hat);
        for (Index r = 0; r < R; ++r) {
            Matrix K = Matrix::Zero(L, L);
            for (Index c = base.first_col(r); c <= base.last_col(r); ++c) {
                K += base.W_tilde(r, c) * phi_inv[r] * tau[c] * avg_jac[c].transpose();
            }
            onsager[r] = K / din;
            next_theta.middleRows(r * nr, nr).noalias() += theta.middleRows(r * nr, nr) * onsager[r];
        }
        if (!next_theta.allFinite()) throw DivergenceError("non-finite residual", k);
        theta = std::move(next_theta);
        res.iterations = k + 1;
        if (change < opt.config.tol) {
            res.converged = true;
            break;
        }
    }

    res.B_hat = std::move(B_hat);
    res.B_eff = std::move(B_eff);
    res.theta = std::move(theta);
    res.phi = std::move(phi);
    res.tau = std::move(tau);
    res.avg_jac = std::move(avg_jac);
    return res;
}

} // namespace scamp
