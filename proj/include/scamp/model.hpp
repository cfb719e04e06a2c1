#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>

#include "scamp/design.hpp"
#include "scamp/errors.hpp"
#include "scamp/rng.hpp"
#include "scamp/types.hpp"

namespace scamp {

/// How the requested noise level is interpreted.
/// raw_variance: Var(Psi_i) itself. rescaled_variance: the variance of the
/// rescaled noise Psi / scale, which is what state evolution consumes.
enum class NoiseScaling { raw_variance, rescaled_variance };

/// Source of the per-column-block signal sums used to recentre observations.
/// truth uses the actual sums (obtainable with C extra tests); prior uses
/// the expected sums (p / C) pi.
enum class BlockSumMode { truth, prior };

struct QgtInstance {
    Vector beta;
    double pi = 0.0;
    Index defectives = 0;
    Vector psi;             // raw noise
    Vector y;               // raw observations X beta + psi
    Vector yt;              // rescaled observations
    Vector block_sums;      // length C, sums used in the recentring
    double raw_noise_variance = 0.0;
    double sigma2 = 0.0;    // second moment of the rescaled noise
};

struct PooledInstance {
    RowMatrix B;            // p x L one-hot rows
    Vector pi;
    RowMatrix Psi;          // n x L raw noise
    RowMatrix Y;            // n x L raw observations
    RowMatrix Yt;           // n x L rescaled observations
    RowMatrix block_sums;   // C x L
    Matrix raw_noise_cov;
    Matrix noise_cov;       // covariance of the rescaled noise rows
};

/// Noise variance convention for i.i.d.-design experiments: Var(Psi_i) = p sigma^2.
inline double iid_raw_noise_variance(Index p, double sigma2) {
    return static_cast<double>(p) * sigma2;
}

/// Noise variance convention for SC-design experiments: Var(Psi_i) = p sigma^2 / (2C).
inline double sc_raw_noise_variance(Index p, Index C, double sigma2) {
    return static_cast<double>(p) * sigma2 / (2.0 * static_cast<double>(C));
}

inline Vector sample_qgt_signal(Index p, double pi, std::uint64_t seed) {
    if (p < 1) throw ConfigError("signal length must be positive");
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("pi must lie in [0, 1]");
    auto eng = make_engine(seed, StreamTag::signal);
    Vector beta(p);
    for (Index j = 0; j < p; ++j) beta[j] = bernoulli(eng, pi) ? 1.0 : 0.0;
    return beta;
}

inline Vector qgt_block_sums(const Design& design, const Vector& beta, BlockSumMode mode,
                             double pi) {
    const Index C = design.base().cols();
    Vector s(C);
    for (Index c = 0; c < C; ++c) {
        s[c] = mode == BlockSumMode::truth
                   ? beta.segment(c * design.col_block_size(), design.col_block_size()).sum()
                   : pi * static_cast<double>(design.col_block_size());
    }
    return s;
}

/// Rescaled observations yt_i = (y_i - alpha sum_c W[r(i), c] S_c) / scale.
inline Vector rescale_qgt(const Design& design, const Vector& y, const Vector& block_sums) {
    if (y.size() != design.rows() || block_sums.size() != design.base().cols()) {
        throw ConfigError("rescale_qgt: dimension mismatch");
    }
    const auto& base = design.base();
    Vector yt(y.size());
    for (Index r = 0; r < base.rows(); ++r) {
        double shift = 0.0;
        for (Index c = base.first_col(r); c <= base.last_col(r); ++c) {
            shift += design.block_mean(r, c) * block_sums[c];
        }
        const Index nr = design.row_block_size();
        yt.segment(r * nr, nr) = (y.segment(r * nr, nr).array() - shift) / design.scale();
    }
    return yt;
}

inline QgtInstance observe_qgt(const Design& design, const Vector& beta, double noise_sigma2,
                               NoiseScaling scaling, std::uint64_t seed,
                               BlockSumMode mode = BlockSumMode::truth, double pi = -1.0) {
    if (beta.size() != design.cols()) throw ConfigError("observe_qgt: beta length mismatch");
    if (!(noise_sigma2 >= 0.0)) throw ConfigError("noise variance must be nonnegative");

    QgtInstance inst;
    inst.beta = beta;
    inst.defectives = static_cast<Index>(std::llround(beta.sum()));
    inst.pi = pi >= 0.0 ? pi : static_cast<double>(inst.defectives) / design.cols();

    const double s2 = design.scale() * design.scale();
    inst.raw_noise_variance = scaling == NoiseScaling::raw_variance ? noise_sigma2 : noise_sigma2 * s2;
    inst.sigma2 = inst.raw_noise_variance / s2;

    inst.psi = Vector::Zero(design.rows());
    if (inst.raw_noise_variance > 0.0) {
        auto eng = make_engine(seed, StreamTag::noise);
        std::normal_distribution<double> g(0.0, std::sqrt(inst.raw_noise_variance));
        for (Index i = 0; i < design.rows(); ++i) inst.psi[i] = g(eng);
    }
    inst.y = design.raw_times(beta) + inst.psi;
    inst.block_sums = qgt_block_sums(design, beta, mode, inst.pi);
    inst.yt = rescale_qgt(design, inst.y, inst.block_sums);
    return inst;
}

inline void check_probability_vector(const Vector& pi) {
    if (pi.size() < 1) throw ConfigError("category probabilities must be nonempty");
    for (Index l = 0; l < pi.size(); ++l) {
        if (!(pi[l] >= 0.0 && pi[l] <= 1.0)) {
            throw ConfigError("category probabilities must lie in [0, 1]");
        }
    }
    if (std::abs(pi.sum() - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg << "category probabilities sum to " << pi.sum() << ", not 1";
        throw ConfigError(msg.str());
    }
}

inline RowMatrix sample_pooled_signal(Index p, const Vector& pi, std::uint64_t seed) {
    if (p < 1) throw ConfigError("signal length must be positive");
    check_probability_vector(pi);
    const Index L = pi.size();
    auto eng = make_engine(seed, StreamTag::signal);
    RowMatrix B = RowMatrix::Zero(p, L);
    for (Index j = 0; j < p; ++j) {
        const double u = uniform01(eng);
        double acc = 0.0;
        Index l = 0;
        for (; l < L - 1; ++l) {
            acc += pi[l];
            if (u < acc) break;
        }
        B(j, l) = 1.0;
    }
    return B;
}

inline RowMatrix pooled_block_sums(const Design& design, const RowMatrix& B, BlockSumMode mode,
                                   const Vector& pi) {
    if (mode == BlockSumMode::truth) return design.column_block_sums(B);
    RowMatrix s(design.base().cols(), B.cols());
    for (Index c = 0; c < s.rows(); ++c) {
        s.row(c) = pi.transpose() * static_cast<double>(design.col_block_size());
    }
    return s;
}

inline RowMatrix rescale_pooled(const Design& design, const RowMatrix& Y,
                                const RowMatrix& block_sums) {
    if (Y.rows() != design.rows() || block_sums.rows() != design.base().cols() ||
        block_sums.cols() != Y.cols()) {
        throw ConfigError("rescale_pooled: dimension mismatch");
    }
    const auto& base = design.base();
    const Index nr = design.row_block_size();
    RowMatrix Yt(Y.rows(), Y.cols());
    for (Index r = 0; r < base.rows(); ++r) {
        Eigen::RowVectorXd shift = Eigen::RowVectorXd::Zero(Y.cols());
        for (Index c = base.first_col(r); c <= base.last_col(r); ++c) {
            shift += design.block_mean(r, c) * block_sums.row(c);
        }
        Yt.middleRows(r * nr, nr) =
            (Y.middleRows(r * nr, nr).rowwise() - shift) / design.scale();
    }
    return Yt;
}

/// noise_cov is L x L; zero matrix for noiseless observations.
inline PooledInstance observe_pooled(const Design& design, const RowMatrix& B, const Vector& pi,
                                     const Matrix& noise_cov, NoiseScaling scaling,
                                     std::uint64_t seed, BlockSumMode mode = BlockSumMode::truth) {
    check_probability_vector(pi);
    const Index L = pi.size();
    if (B.rows() != design.cols() || B.cols() != L) {
        throw ConfigError("observe_pooled: signal shape mismatch");
    }
    if (noise_cov.rows() != L || noise_cov.cols() != L) {
        throw ConfigError("observe_pooled: noise covariance must be L x L");
    }

    PooledInstance inst;
    inst.B = B;
    inst.pi = pi;
    const double s2 = design.scale() * design.scale();
    inst.raw_noise_cov = scaling == NoiseScaling::raw_variance ? noise_cov : Matrix(noise_cov * s2);
    inst.noise_cov = inst.raw_noise_cov / s2;

    inst.Psi = RowMatrix::Zero(design.rows(), L);
    if (inst.raw_noise_cov.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(inst.raw_noise_cov);
        if (eig.eigenvalues().minCoeff() < -1e-12 * eig.eigenvalues().cwiseAbs().maxCoeff()) {
            throw ConfigError("noise covariance is not positive semidefinite");
        }
        const Matrix root = eig.eigenvectors() *
                            eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        auto eng = make_engine(seed, StreamTag::noise);
        std::normal_distribution<double> g(0.0, 1.0);
        Vector z(L);
        for (Index i = 0; i < design.rows(); ++i) {
            for (Index l = 0; l < L; ++l) z[l] = g(eng);
            inst.Psi.row(i) = (root * z).transpose();
        }
    }
    inst.Y = design.raw_times(B) + inst.Psi;
    inst.block_sums = pooled_block_sums(design, B, mode, pi);
    inst.Yt = rescale_pooled(design, inst.Y, inst.block_sums);
    return inst;
}

} // namespace scamp
