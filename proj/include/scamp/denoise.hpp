#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "scamp/errors.hpp"
#include "scamp/spd.hpp"
#include "scamp/types.hpp"

namespace scamp {

// Both helpers cut off before exp() would return a subnormal.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    if (x < -700.0) return 0.0;
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow or cancellation.
inline double log_sigmoid(double x) {
    if (x > 40.0) return x > 700.0 ? 0.0 : -std::exp(-x);
    if (x < -40.0) return x;
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Posterior mean of beta ~ Bernoulli(pi) from s = chi2 beta + sqrt(chi2) G.
///
/// The log-likelihood ratio of the two hypotheses is s - chi2 / 2, so the
/// posterior mean is a logistic function of s.
class BernoulliDenoiser {
public:
    explicit BernoulliDenoiser(double pi) : pi_(pi) {
        if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("pi must lie in [0, 1]");
        degenerate_ = pi == 0.0 || pi == 1.0;
        if (!degenerate_) log_odds_ = logit(pi);
    }

    double pi() const { return pi_; }
    bool degenerate() const { return degenerate_; }

    double mean(double s, double chi2) const {
        if (degenerate_) return pi_;
        return sigmoid(log_odds_ + s - 0.5 * chi2);
    }

    double deriv(double s, double chi2) const {
        if (degenerate_) return 0.0;
        const double x = log_odds_ + s - 0.5 * chi2;
        return sigmoid(x) * sigmoid(-x);
    }

private:
    double pi_;
    double log_odds_ = 0.0;
    bool degenerate_ = false;
};

inline void check_chi(double chi) {
    if (!(chi > 0.0)) throw ConfigError("chi must be positive");
}

inline double bernoulli_posterior_mean(double s, double chi, double pi) {
    check_chi(chi);
    return BernoulliDenoiser(pi).mean(s, chi * chi);
}

inline double bernoulli_posterior_deriv(double s, double chi, double pi) {
    check_chi(chi);
    return BernoulliDenoiser(pi).deriv(s, chi * chi);
}

/// Posterior mean of a one-hot row e_l, l ~ Categorical(pi), observed as
/// s = e_l + G with G ~ N(0, T). Built from a precision M (regularised
/// inverse of T). Categories with pi_l = 0 receive zero weight.
class CategoricalDenoiser {
public:
    CategoricalDenoiser(const Vector& pi, const Matrix& precision) : M_(precision) {
        const Index L = pi.size();
        log_pi_.resize(L);
        for (Index l = 0; l < L; ++l) {
            log_pi_[l] = pi[l] > 0.0 ? std::log(pi[l]) : -std::numeric_limits<double>::infinity();
        }
        offset_ = log_pi_ - 0.5 * M_.diagonal();
    }

    Index dim() const { return M_.rows(); }
    const Matrix& precision() const { return M_; }

    /// Writes the posterior mean into f. When jac is non-null, adds the
    /// Jacobian df/ds = Cov(e_l | s) M into *jac.
    void apply(const double* s, double* f, Matrix* jac = nullptr) const {
        const Index L = dim();
        Eigen::Map<const Vector> sv(s, L);
        Eigen::Map<Vector> fv(f, L);
        fv = offset_ + M_ * sv;
        const double top = fv.maxCoeff();
        double total = 0.0;
        for (Index l = 0; l < L; ++l) {
            const double w = std::isinf(offset_[l]) ? 0.0 : std::exp(fv[l] - top);
            fv[l] = w;
            total += w;
        }
        fv /= total;
        if (jac != nullptr) {
            Matrix cov = -fv * fv.transpose();
            cov.diagonal() += fv;
            *jac += cov * M_;
        }
    }

    Vector mean(const Vector& s) const {
        Vector f(dim());
        apply(s.data(), f.data());
        return f;
    }

    Matrix jacobian(const Vector& s) const {
        Vector f(dim());
        Matrix J = Matrix::Zero(dim(), dim());
        apply(s.data(), f.data(), &J);
        return J;
    }

private:
    Matrix M_;
    Vector log_pi_;
    Vector offset_;
};

/// Inverse mode for a single covariance: simplex_plane when T has the
/// all-ones eigenvector and is singular along it, full otherwise.
inline SpdInverter inverter_for(const Matrix& T) {
    const Index L = T.rows();
    if (L > 1 && has_ones_eigenvector(T)) {
        const double along = Vector::Ones(L).dot(T * Vector::Ones(L)) / static_cast<double>(L);
        const double scale = std::max(1e-300, T.cwiseAbs().maxCoeff());
        if (along <= 1e-12 * scale) return SpdInverter(L, InverseMode::simplex_plane);
    }
    return SpdInverter(L, InverseMode::full);
}

inline Vector categorical_posterior_mean(const Vector& s, const Matrix& T, const Vector& pi) {
    if (s.size() != pi.size() || T.rows() != pi.size() || T.cols() != pi.size()) {
        throw ConfigError("categorical denoiser: dimension mismatch");
    }
    return CategoricalDenoiser(pi, inverter_for(T).inverse(T, "denoiser covariance")).mean(s);
}

inline Matrix categorical_posterior_jacobian(const Vector& s, const Matrix& T, const Vector& pi) {
    if (s.size() != pi.size() || T.rows() != pi.size() || T.cols() != pi.size()) {
        throw ConfigError("categorical denoiser: dimension mismatch");
    }
    return CategoricalDenoiser(pi, inverter_for(T).inverse(T, "denoiser covariance")).jacobian(s);
}

} // namespace scamp
