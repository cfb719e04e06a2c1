#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scamp/errors.hpp"
#include "scamp/types.hpp"

namespace scamp {

/// Band-structured base matrix of Bernoulli parameters.
///
/// An (omega, lambda) base matrix has R = lambda + omega - 1 rows and
/// C = lambda columns. Entry (r, c) is nonzero iff c <= r <= c + omega - 1
/// (0-indexed here), and every nonzero entry takes the same value, chosen so
/// that the variance profile W~ = W (1 - alpha W) / (1 - alpha) equals 1/omega
/// on the band. The 1 x 1 matrix W = 1 describes the i.i.d. design.
struct BaseMatrix {
    int omega = 1;
    int lambda = 1;
    double alpha = 0.5;
    Matrix W;        // R x C Bernoulli parameters (before scaling by alpha)
    Matrix W_tilde;  // R x C variance profile, 1/omega on the band

    Index rows() const { return W.rows(); }
    Index cols() const { return W.cols(); }

    bool on_band(Index r, Index c) const { return c <= r && r <= c + omega - 1; }

    /// First and last (inclusive) column block touching row block r.
    Index first_col(Index r) const { return std::max<Index>(0, r - omega + 1); }
    Index last_col(Index r) const { return std::min<Index>(cols() - 1, r); }

    bool is_trivial() const { return rows() == 1 && cols() == 1; }

    /// Within-block sampling ratio scale C / R; delta_in = (C / R) delta.
    double coupling_ratio() const {
        return static_cast<double>(cols()) / static_cast<double>(rows());
    }
};

/// Nonzero entry of an (omega, lambda) base matrix for the given alpha.
inline double band_entry(int omega, double alpha) {
    const double disc = 1.0 - 4.0 * alpha * (1.0 - alpha) / omega;
    if (disc < 0.0) {
        throw ConfigError("base matrix discriminant is negative");
    }
    const double root = std::sqrt(disc);
    return alpha <= 0.5 ? (1.0 - root) / (2.0 * alpha) : (1.0 + root) / (2.0 * alpha);
}

inline BaseMatrix build_base_matrix(int omega, int lambda, double alpha) {
    if (omega < 1) {
        throw ConfigError("coupling width omega must be >= 1");
    }
    if (lambda < 2 * omega - 1) {
        std::ostringstream msg;
        msg << "coupling length lambda=" << lambda << " must be >= 2*omega-1=" << 2 * omega - 1;
        throw ConfigError(msg.str());
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }

    BaseMatrix base;
    base.omega = omega;
    base.lambda = lambda;
    base.alpha = alpha;

    const Index R = lambda + omega - 1;
    const Index C = lambda;
    const double value = band_entry(omega, alpha);
    base.W = Matrix::Zero(R, C);
    base.W_tilde = Matrix::Zero(R, C);
    for (Index c = 0; c < C; ++c) {
        for (Index r = c; r <= c + omega - 1; ++r) {
            base.W(r, c) = value;
            base.W_tilde(r, c) = 1.0 / omega;
        }
    }
    return base;
}

/// The 1 x 1 base matrix W = 1 of the i.i.d. Bernoulli(alpha) design.
inline BaseMatrix iid_base_matrix(double alpha = 0.5) {
    return build_base_matrix(1, 1, alpha);
}

} // namespace scamp
