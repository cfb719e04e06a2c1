#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "scamp/errors.hpp"
#include "scamp/types.hpp"

namespace scamp {

namespace detail {

template <class A, class B>
void check_same_shape(const A& a, const B& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError(std::string(what) + ": shape mismatch");
    }
}

} // namespace detail

inline double mse(const Vector& estimate, const Vector& truth) {
    detail::check_same_shape(estimate, truth, "mse");
    return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

/// (1/p) ||B - B_hat||_F^2.
inline double mse(const RowMatrix& estimate, const RowMatrix& truth) {
    detail::check_same_shape(estimate, truth, "mse");
    return (estimate - truth).squaredNorm() / static_cast<double>(truth.rows());
}

/// Value together with a flag raised when the quantity was undefined and
/// replaced by a convention.
struct FlaggedValue {
    double value = 0.0;
    bool undefined = false;
};

/// <a, b>^2 / (||a||^2 ||b||^2); 0 with the flag set when either norm is zero.
inline FlaggedValue normalized_sq_correlation_flagged(const Vector& estimate, const Vector& truth) {
    detail::check_same_shape(estimate, truth, "correlation");
    const double ne = estimate.squaredNorm();
    const double nt = truth.squaredNorm();
    if (ne == 0.0 || nt == 0.0) return {0.0, true};
    const double d = estimate.dot(truth);
    return {std::min(1.0, d * d / (ne * nt)), false};
}

inline double normalized_sq_correlation(const Vector& estimate, const Vector& truth) {
    return normalized_sq_correlation_flagged(estimate, truth).value;
}

/// (1/p) sum_j <B_hat_j, B_j>.
inline double normalized_sq_correlation(const RowMatrix& estimate, const RowMatrix& truth) {
    detail::check_same_shape(estimate, truth, "correlation");
    return estimate.cwiseProduct(truth).sum() / static_cast<double>(truth.rows());
}

struct ErrorRates {
    double fpr = 0.0;
    double fnr = 0.0;
    bool fpr_undefined = false;  // truth has no zeros
    bool fnr_undefined = false;  // truth has no ones
};

/// FPR = #{est = 1, truth = 0} / #{truth = 0}; FNR = #{est = 0, truth = 1} / #{truth = 1}.
inline ErrorRates fpr_fnr(const Vector& quantized, const Vector& truth) {
    detail::check_same_shape(quantized, truth, "fpr_fnr");
    double fp = 0.0;
    double fn = 0.0;
    double neg = 0.0;
    double pos = 0.0;
    for (Index j = 0; j < truth.size(); ++j) {
        if (truth[j] != 0.0) {
            pos += 1.0;
            if (quantized[j] == 0.0) fn += 1.0;
        } else {
            neg += 1.0;
            if (quantized[j] != 0.0) fp += 1.0;
        }
    }
    ErrorRates e;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    e.fpr_undefined = neg == 0.0;
    e.fnr_undefined = pos == 0.0;
    e.fpr = e.fpr_undefined ? nan : fp / neg;
    e.fnr = e.fnr_undefined ? nan : fn / pos;
    return e;
}

/// 1{estimate > zeta}, entrywise.
inline Vector hard_decision(const Vector& estimate, double zeta) {
    return (estimate.array() > zeta).cast<double>().matrix();
}

inline double hamming_error_rate(const Vector& quantized, const Vector& truth) {
    detail::check_same_shape(quantized, truth, "hamming");
    return static_cast<double>((quantized.array() != truth.array()).count()) /
           static_cast<double>(truth.size());
}

/// Fraction of rows that differ anywhere.
inline double hamming_error_rate(const RowMatrix& quantized, const RowMatrix& truth) {
    detail::check_same_shape(quantized, truth, "hamming");
    Index bad = 0;
    for (Index j = 0; j < truth.rows(); ++j) {
        if ((quantized.row(j).array() != truth.row(j).array()).any()) ++bad;
    }
    return static_cast<double>(bad) / static_cast<double>(truth.rows());
}

/// Per-entry check 1{quantized != truth} <= 4 (truth - estimate)^2 for
/// 0.5-threshold quantisation; summed form compares rates.
inline bool hamming_within_mse_bound(const Vector& estimate, const Vector& quantized,
                                     const Vector& truth) {
    detail::check_same_shape(estimate, truth, "hamming bound");
    detail::check_same_shape(quantized, truth, "hamming bound");
    for (Index j = 0; j < truth.size(); ++j) {
        const double d = truth[j] - estimate[j];
        if (quantized[j] != truth[j] && !(1.0 <= 4.0 * d * d)) return false;
    }
    return hamming_error_rate(quantized, truth) <= 4.0 * mse(estimate, truth);
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one sample).
struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    Index count = 0;
};

template <class Range>
Summary summarize(const Range& values) {
    Summary s;
    for (double v : values) {
        s.mean += v;
        ++s.count;
    }
    if (s.count == 0) return s;
    s.mean /= static_cast<double>(s.count);
    if (s.count > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(acc / static_cast<double>(s.count - 1));
    }
    return s;
}

} // namespace scamp
