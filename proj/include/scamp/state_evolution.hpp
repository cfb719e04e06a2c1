#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <unordered_map>
#include <vector>

#include "scamp/base_matrix.hpp"
#include "scamp/denoise.hpp"
#include "scamp/errors.hpp"
#include "scamp/quadrature.hpp"
#include "scamp/spd.hpp"
#include "scamp/types.hpp"

namespace scamp {

// ---------------------------------------------------------------------------
// Scalar Bernoulli channel y = sqrt(s) beta + G.

/// Gaussian expectations of the Bayes estimate f for the Bernoulli channel
/// at signal-to-noise ratio s.
struct BernoulliChannelMoments {
    double mmse = 0.0;   // E[(beta - f)^2]
    double e_fb = 0.0;   // E[f beta]
    double e_f2 = 0.0;   // E[f^2]
};

inline BernoulliChannelMoments bernoulli_channel_moments(double s, double pi) {
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0, 1)");
    if (!(s >= 0.0)) throw ConfigError("snr must be nonnegative");
    BernoulliChannelMoments m;
    if (s == 0.0) {
        m.mmse = pi * (1.0 - pi);
        m.e_fb = pi * pi;
        m.e_f2 = pi * pi;
        return m;
    }
    if (std::isinf(s)) {
        m.e_fb = pi;
        m.e_f2 = pi;
        return m;
    }
    const double l = logit(pi);
    const double rs = std::sqrt(s);
    // Under beta = 0 the log-odds are l + rs G - s/2; under beta = 1 they
    // are l + rs G + s/2. Split the window where each crosses zero.
    const double g0 = (0.5 * s - l) / rs;
    const double g1 = (-0.5 * s - l) / rs;
    const double w = 4.0 / rs;
    const std::vector<double> b0{g0 - w, g0, g0 + w};
    const std::vector<double> b1{g1 - w, g1, g1 + w};

    const double f0_sq = gaussian_expectation_log(
        [&](double g) { return 2.0 * log_sigmoid(l + rs * g - 0.5 * s); }, b0);
    const double f1 = gaussian_expectation_log(
        [&](double g) { return log_sigmoid(l + rs * g + 0.5 * s); }, b1);
    const double f1_sq = gaussian_expectation_log(
        [&](double g) { return 2.0 * log_sigmoid(l + rs * g + 0.5 * s); }, b1);
    const double miss_sq = gaussian_expectation_log(
        [&](double g) { return 2.0 * log_sigmoid(-l - rs * g - 0.5 * s); }, b1);

    m.mmse = (1.0 - pi) * f0_sq + pi * miss_sq;
    m.e_fb = pi * f1;
    m.e_f2 = (1.0 - pi) * f0_sq + pi * f1_sq;
    return m;
}

/// mmse(s) = E[(beta - E[beta | sqrt(s) beta + G])^2], beta ~ Bernoulli(pi),
/// by adaptive Gauss-Kronrod quadrature.
inline double mmse_bernoulli(double s, double pi) {
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0, 1)");
    if (!(s >= 0.0)) throw ConfigError("snr must be nonnegative");
    if (s == 0.0) return pi * (1.0 - pi);
    if (std::isinf(s)) return 0.0;
    const double l = logit(pi);
    const double rs = std::sqrt(s);
    const double g0 = (0.5 * s - l) / rs;
    const double g1 = (-0.5 * s - l) / rs;
    const double w = 4.0 / rs;
    const double false_alarm = gaussian_expectation_log(
        [&](double g) { return 2.0 * log_sigmoid(l + rs * g - 0.5 * s); }, {g0 - w, g0, g0 + w});
    const double miss = gaussian_expectation_log(
        [&](double g) { return 2.0 * log_sigmoid(-l - rs * g - 0.5 * s); }, {g1 - w, g1, g1 + w});
    const double v = (1.0 - pi) * false_alarm + pi * miss;
    if (!std::isfinite(v)) throw NumericalError("mmse quadrature failed");
    return std::clamp(v, 0.0, pi * (1.0 - pi));
}

/// The same quantity with a fixed Gauss-Hermite rule.
inline double mmse_bernoulli_gauss_hermite(double s, double pi, int nodes = 61) {
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0, 1)");
    if (s == 0.0) return pi * (1.0 - pi);
    const QuadratureRule& rule = cached_gauss_hermite(nodes);
    const double l = logit(pi);
    const double rs = std::sqrt(s);
    double acc = 0.0;
    for (Index i = 0; i < rule.nodes.size(); ++i) {
        const double g = rule.nodes[i];
        const double a = sigmoid(l + rs * g - 0.5 * s);
        const double b = sigmoid(-l - rs * g - 0.5 * s);
        acc += rule.weights[i] * ((1.0 - pi) * a * a + pi * b * b);
    }
    return acc;
}

/// Memoised mmse for one prior. Not thread-safe; one per recursion.
class MmseCache {
public:
    explicit MmseCache(double pi) : pi_(pi) {}

    double operator()(double s) {
        std::uint64_t key;
        std::memcpy(&key, &s, sizeof key);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        const double v = mmse_bernoulli(s, pi_);
        memo_.emplace(key, v);
        return v;
    }

    double pi() const { return pi_; }

private:
    double pi_;
    std::unordered_map<std::uint64_t, double> memo_;
};

// ---------------------------------------------------------------------------
// Scalar state evolution.

inline double delta_in(const BaseMatrix& base, double delta) {
    return base.coupling_ratio() * delta;
}

/// One step k of the recursion: psi^k (length C), phi^k (length R), and the
/// effective signal-to-noise ratios chi2^{k+1} (length C) derived from phi^k.
/// psi^{k+1} = mmse(chi2^{k+1}).
struct ScalarSeStep {
    Vector psi;
    Vector phi;
    Vector chi2_next;
};

struct ScalarSeResult {
    double delta = 0.0;
    double delta_in = 0.0;
    double pi = 0.0;
    double sigma2 = 0.0;
    std::vector<ScalarSeStep> steps;  // steps[k] for k = 0..iterations
    bool converged = false;
    int iterations = 0;
    Vector psi;   // final psi
    Vector chi2;  // chi2 that produced the final psi (empty when iterations = 0)

    double mse() const { return psi.mean(); }
};

struct ScalarSeOptions {
    int k_max = 10000;
    double tol = 1e-12;
    bool keep_trajectory = true;
};

inline Vector se_phi(const BaseMatrix& base, const Vector& psi, double din, double sigma2) {
    return (sigma2 + (base.W_tilde * psi).array() / din).matrix();
}

inline Vector se_chi2(const BaseMatrix& base, const Vector& phi) {
    Vector chi2 = Vector::Zero(base.cols());
    for (Index c = 0; c < base.cols(); ++c) {
        for (Index r = c; r < std::min(base.rows(), c + base.omega); ++r) {
            chi2[c] += phi[r] > 0.0 ? base.W_tilde(r, c) / phi[r]
                                    : std::numeric_limits<double>::infinity();
        }
    }
    return chi2;
}

inline ScalarSeResult iterate_scalar_se(const BaseMatrix& base, double delta, double pi,
                                        double sigma2, const ScalarSeOptions& opt = {}) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (!(sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0, 1)");
    if (opt.k_max < 1 || !(opt.tol > 0.0)) throw ConfigError("invalid SE iteration controls");

    ScalarSeResult res;
    res.delta = delta;
    res.delta_in = delta_in(base, delta);
    res.pi = pi;
    res.sigma2 = sigma2;
    MmseCache mmse(pi);

    Vector psi = Vector::Constant(base.cols(), pi * (1.0 - pi));
    for (int k = 0;; ++k) {
        ScalarSeStep step;
        step.psi = psi;
        step.phi = se_phi(base, psi, res.delta_in, sigma2);
        step.chi2_next = se_chi2(base, step.phi);
        if (k == opt.k_max) {
            if (opt.keep_trajectory) res.steps.push_back(std::move(step));
            res.iterations = k;
            break;
        }
        Vector next(base.cols());
        for (Index c = 0; c < base.cols(); ++c) next[c] = mmse(step.chi2_next[c]);
        const double change = (next - psi).cwiseAbs().maxCoeff();
        res.chi2 = step.chi2_next;
        if (opt.keep_trajectory) res.steps.push_back(std::move(step));
        psi = std::move(next);
        if (change < opt.tol) {
            res.converged = true;
            res.iterations = k + 1;
            if (opt.keep_trajectory) {
                ScalarSeStep last;
                last.psi = psi;
                last.phi = se_phi(base, psi, res.delta_in, sigma2);
                last.chi2_next = se_chi2(base, last.phi);
                res.steps.push_back(std::move(last));
            }
            break;
        }
    }
    res.psi = psi;
    return res;
}

/// The recursion rewritten over row blocks:
/// x_r^{k+1} = sum_c W~_rc mmse(sum_r' W~_r'c / (sigma2 + x_r'^k / delta_in)),
/// started from x_r^0 = sum_c W~_rc Var(beta). Returns x^0, x^1, ...
inline std::vector<Vector> iterate_x_form(const BaseMatrix& base, double delta, double pi,
                                          double sigma2, int iterations) {
    const double din = delta_in(base, delta);
    MmseCache mmse(pi);
    std::vector<Vector> xs;
    Vector x = base.W_tilde * Vector::Constant(base.cols(), pi * (1.0 - pi));
    xs.push_back(x);
    for (int k = 0; k < iterations; ++k) {
        const Vector phi = (sigma2 + x.array() / din).matrix();
        const Vector chi2 = se_chi2(base, phi);
        Vector psi(base.cols());
        for (Index c = 0; c < base.cols(); ++c) psi[c] = mmse(chi2[c]);
        x = base.W_tilde * psi;
        xs.push_back(x);
    }
    return xs;
}

// ---------------------------------------------------------------------------
// Predicted performance.

/// False positive rate of thresholding f at zeta for one column block with
/// effective snr chi2: P[f(chi G) > zeta].
inline double se_fpr_block(double chi2, double pi, double zeta) {
    if (zeta <= 0.0) return 1.0;
    if (zeta >= 1.0) return 0.0;
    if (chi2 == 0.0) return pi > zeta ? 1.0 : 0.0;
    if (std::isinf(chi2)) return 0.0;
    const double chi = std::sqrt(chi2);
    return normal_cdf(-(0.5 * chi2 - logit(pi) + logit(zeta)) / chi);
}

/// False negative rate P[f(chi2 + chi G) <= zeta].
inline double se_fnr_block(double chi2, double pi, double zeta) {
    if (zeta <= 0.0) return 0.0;
    if (zeta >= 1.0) return 1.0;
    if (chi2 == 0.0) return pi > zeta ? 0.0 : 1.0;
    if (std::isinf(chi2)) return 0.0;
    const double chi = std::sqrt(chi2);
    return normal_cdf((-0.5 * chi2 - logit(pi) + logit(zeta)) / chi);
}

struct SePrediction {
    double mse = 0.0;
    double correlation = 0.0;
    std::vector<double> zeta;
    std::vector<double> fpr;
    std::vector<double> fnr;
};

/// Limits of MSE, normalised squared correlation, FPR and FNR for column
/// blocks with effective snr chi2.
inline SePrediction se_predict_metrics(const Vector& chi2, double pi,
                                       const std::vector<double>& zetas = {}) {
    SePrediction out;
    const double C = static_cast<double>(chi2.size());
    double e_fb = 0.0;
    double e_f2 = 0.0;
    for (Index c = 0; c < chi2.size(); ++c) {
        const auto m = bernoulli_channel_moments(chi2[c], pi);
        out.mse += m.mmse / C;
        e_fb += m.e_fb / C;
        e_f2 += m.e_f2 / C;
    }
    out.correlation = e_f2 > 0.0 ? std::min(1.0, e_fb * e_fb / (e_f2 * pi)) : 0.0;
    for (double z : zetas) {
        double fpr = 0.0;
        double fnr = 0.0;
        for (Index c = 0; c < chi2.size(); ++c) {
            fpr += se_fpr_block(chi2[c], pi, z) / C;
            fnr += se_fnr_block(chi2[c], pi, z) / C;
        }
        out.zeta.push_back(z);
        out.fpr.push_back(fpr);
        out.fnr.push_back(fnr);
    }
    return out;
}

inline SePrediction se_predict_metrics(const ScalarSeResult& se,
                                       const std::vector<double>& zetas = {}) {
    const Vector chi2 = se.chi2.size() > 0 ? se.chi2 : Vector::Zero(se.psi.size());
    return se_predict_metrics(chi2, se.pi, zetas);
}

// ---------------------------------------------------------------------------
// Covariance state evolution for pooled data.

enum class CovExpectation { gauss_hermite, quasi_monte_carlo };

struct CovSeOptions {
    int k_max = 10000;
    double tol = 1e-12;
    CovExpectation method = CovExpectation::gauss_hermite;
    int gh_nodes = 21;
    Index qmc_points = 1000000;
    bool keep_trajectory = false;
};

struct CovSeStep {
    std::vector<Matrix> psi;  // C entries
    std::vector<Matrix> phi;  // R entries
    std::vector<Matrix> tau;  // C entries, derived from phi
};

struct CovSeResult {
    double delta = 0.0;
    double delta_in = 0.0;
    Vector pi;
    Matrix noise_cov;
    InverseMode mode = InverseMode::full;
    std::vector<CovSeStep> steps;
    bool converged = false;
    int iterations = 0;
    std::vector<Matrix> psi;
    std::vector<Matrix> tau;  // tau that produced the final psi
    double correlation = 0.0;            // (1/C) sum_c E<f(B + G_c), B>
    double quantized_correlation = 0.0;  // same after 0.5 thresholding
};

/// Inverse mode shared by every covariance in a pooled run. The simplex
/// plane applies when the noise covariance annihilates the all-ones vector
/// (in particular, noiseless data); every psi does as well.
inline InverseMode pooled_inverse_mode(const Matrix& noise_cov) {
    const Index L = noise_cov.rows();
    if (L <= 1) return InverseMode::simplex_plane;
    const Vector v = noise_cov * Vector::Ones(L);
    const double scale = std::max(1.0, noise_cov.cwiseAbs().maxCoeff());
    return v.cwiseAbs().maxCoeff() <= 1e-12 * scale ? InverseMode::simplex_plane
                                                   : InverseMode::full;
}

namespace detail {

// Nodes of G ~ N(0, T) and their weights, restricted to directions with
// nonzero variance.
struct GaussianCloud {
    Matrix points;  // L x N
    Vector weights;
};

inline GaussianCloud gaussian_cloud(const Matrix& T, const CovSeOptions& opt) {
    const Index L = T.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(SpdInverter::symmetrize(T));
    const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    std::vector<Index> keep;
    for (Index i = 0; i < L; ++i) {
        if (eig.eigenvalues()[i] > 1e-14 * top) keep.push_back(i);
    }
    Matrix root(L, static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        root.col(static_cast<Index>(k)) =
            eig.eigenvectors().col(keep[k]) * std::sqrt(eig.eigenvalues()[keep[k]]);
    }
    GaussianCloud cloud;
    const int d = static_cast<int>(keep.size());
    if (d == 0) {
        cloud.points = Matrix::Zero(L, 1);
        cloud.weights = Vector::Ones(1);
        return cloud;
    }
    if (opt.method == CovExpectation::gauss_hermite) {
        TensorRule rule = tensor_gauss_hermite(d, opt.gh_nodes);
        cloud.points = root * rule.nodes;
        cloud.weights = rule.weights;
    } else {
        cloud.points = root * sobol_normal_points(d, opt.qmc_points);
        cloud.weights = Vector::Constant(opt.qmc_points, 1.0 / static_cast<double>(opt.qmc_points));
    }
    return cloud;
}

struct CategoricalChannelMoments {
    Matrix mse;              // E[(B - f)(B - f)^T]
    double overlap = 0.0;    // E<f, B>
    double hit_rate = 0.0;   // P[f_l > 0.5 for the true category l]
};

inline CategoricalChannelMoments categorical_channel_moments(const Vector& pi, const Matrix& T,
                                                             const SpdInverter& inv,
                                                             const CovSeOptions& opt) {
    const Index L = pi.size();
    CategoricalDenoiser den(pi, inv.inverse(T, "tau"));
    const GaussianCloud cloud = gaussian_cloud(T, opt);
    CategoricalChannelMoments m;
    m.mse = Matrix::Zero(L, L);
    Vector s(L);
    Vector f(L);
    for (Index l = 0; l < L; ++l) {
        if (pi[l] == 0.0) continue;
        Matrix acc = Matrix::Zero(L, L);
        double overlap = 0.0;
        double hits = 0.0;
        for (Index q = 0; q < cloud.points.cols(); ++q) {
            s = cloud.points.col(q);
            s[l] += 1.0;
            den.apply(s.data(), f.data());
            Vector e = -f;
            e[l] += 1.0;
            const double w = cloud.weights[q];
            acc.noalias() += w * e * e.transpose();
            overlap += w * f[l];
            if (f[l] > 0.5) hits += w;
        }
        m.mse += pi[l] * acc;
        m.overlap += pi[l] * overlap;
        m.hit_rate += pi[l] * hits;
    }
    return m;
}

} // namespace detail

inline std::vector<Matrix> cov_se_phi(const BaseMatrix& base, const std::vector<Matrix>& psi,
                                      double din, const Matrix& noise_cov) {
    std::vector<Matrix> phi(static_cast<std::size_t>(base.rows()), noise_cov);
    for (Index r = 0; r < base.rows(); ++r) {
        for (Index c = base.first_col(r); c <= base.last_col(r); ++c) {
            phi[r] += base.W_tilde(r, c) / din * psi[c];
        }
    }
    return phi;
}

inline std::vector<Matrix> cov_se_tau(const BaseMatrix& base, const std::vector<Matrix>& phi,
                                      const SpdInverter& inv) {
    const Index L = inv.dim();
    std::vector<Matrix> phi_inv;
    phi_inv.reserve(phi.size());
    for (std::size_t r = 0; r < phi.size(); ++r) {
        phi_inv.push_back(inv.inverse(phi[r], "phi", static_cast<Index>(r)));
    }
    std::vector<Matrix> tau;
    for (Index c = 0; c < base.cols(); ++c) {
        Matrix prec = Matrix::Zero(L, L);
        for (Index r = c; r < std::min(base.rows(), c + base.omega); ++r) {
            prec += base.W_tilde(r, c) * phi_inv[r];
        }
        tau.push_back(inv.inverse(prec, "tau precision", c));
    }
    return tau;
}

inline CovSeResult iterate_cov_se(const BaseMatrix& base, double delta, const Vector& pi,
                                  const Matrix& noise_cov, const CovSeOptions& opt = {}) {
    const Index L = pi.size();
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (noise_cov.rows() != L || noise_cov.cols() != L) {
        throw ConfigError("noise covariance must be L x L");
    }
    if (std::abs(pi.sum() - 1.0) > 1e-12 || (pi.array() < 0.0).any()) {
        throw ConfigError("pi must be a probability vector");
    }

    CovSeResult res;
    res.delta = delta;
    res.delta_in = delta_in(base, delta);
    res.pi = pi;
    res.noise_cov = noise_cov;
    res.mode = pooled_inverse_mode(noise_cov);
    const SpdInverter inv(L, res.mode);

    Matrix psi0 = -pi * pi.transpose();
    psi0.diagonal() += pi;
    std::vector<Matrix> psi(static_cast<std::size_t>(base.cols()), psi0);

    double overlap = 0.0;
    double hits = 0.0;
    for (int k = 0;; ++k) {
        CovSeStep step;
        step.psi = psi;
        step.phi = cov_se_phi(base, psi, res.delta_in, noise_cov);
        step.tau = cov_se_tau(base, step.phi, inv);
        if (k == opt.k_max) {
            if (opt.keep_trajectory) res.steps.push_back(std::move(step));
            res.iterations = k;
            break;
        }
        std::vector<Matrix> next;
        double change = 0.0;
        overlap = 0.0;
        hits = 0.0;
        for (Index c = 0; c < base.cols(); ++c) {
            const auto m = detail::categorical_channel_moments(pi, step.tau[c], inv, opt);
            change = std::max(change, (m.mse - psi[c]).cwiseAbs().maxCoeff());
            next.push_back(m.mse);
            overlap += m.overlap / static_cast<double>(base.cols());
            hits += m.hit_rate / static_cast<double>(base.cols());
        }
        res.tau = step.tau;
        if (opt.keep_trajectory) res.steps.push_back(std::move(step));
        psi = std::move(next);
        if (change < opt.tol) {
            res.converged = true;
            res.iterations = k + 1;
            break;
        }
    }
    res.psi = psi;
    if (res.tau.empty()) {
        overlap = pi.squaredNorm();
        hits = (pi.array() > 0.5).select(pi.array(), 0.0).sum();
    }
    res.correlation = std::clamp(overlap, 0.0, 1.0);
    res.quantized_correlation = std::clamp(hits, 0.0, 1.0);
    return res;
}

// ---------------------------------------------------------------------------
// Information-theoretic reference.

inline double entropy_nats(const Vector& p) {
    double h = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    }
    return h;
}

/// gamma* = max_{r in 1..L-1} 2 [H(pi) - H(pi^(r))] / (L - r), where pi^(r)
/// merges the L - r + 1 largest entries of pi into one.
inline double gamma_star(const Vector& pi) {
    const Index L = pi.size();
    if (L < 2) throw ConfigError("need at least two categories");
    std::vector<double> sorted(pi.data(), pi.data() + L);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double h = entropy_nats(pi);
    double best = -std::numeric_limits<double>::infinity();
    for (Index r = 1; r <= L - 1; ++r) {
        Vector merged(r);
        double head = 0.0;
        for (Index i = 0; i < L - r + 1; ++i) head += sorted[static_cast<std::size_t>(i)];
        merged[0] = head;
        for (Index i = 1; i < r; ++i) merged[i] = sorted[static_cast<std::size_t>(L - r + i)];
        best = std::max(best, 2.0 * (h - entropy_nats(merged)) / static_cast<double>(L - r));
    }
    return best;
}

/// n*/p = gamma* / log p.
inline double reference_test_limit(const Vector& pi, Index p) {
    if (p < 2) throw ConfigError("p must exceed 1");
    return gamma_star(pi) / std::log(static_cast<double>(p));
}

inline double reference_test_limit(double pi, Index p) {
    Vector v(2);
    v << 1.0 - pi, pi;
    return reference_test_limit(v, p);
}

} // namespace scamp
