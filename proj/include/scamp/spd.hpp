#pragma once

#include <algorithm>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "scamp/errors.hpp"
#include "scamp/types.hpp"

namespace scamp {

/// full: (A + eps I)^{-1}.
/// simplex_plane: E (E^T A E + eps I)^{-1} E^T with E an orthonormal basis of
/// the complement of the all-ones vector. Used when every covariance in play
/// has the all-ones vector as an eigenvector; the component along it has no
/// effect on the categorical denoiser.
enum class InverseMode { full, simplex_plane };

/// Orthonormal L x (L - 1) basis of {v : sum(v) = 0}.
inline Matrix simplex_plane_basis(Index L) {
    if (L <= 1) return Matrix::Zero(L, 0);
    Matrix A = Matrix::Identity(L, L);
    A.col(0).setOnes();
    Eigen::HouseholderQR<Matrix> qr(A);
    Matrix Q = qr.householderQ();
    return Q.rightCols(L - 1);
}

/// True when S 1 is parallel to 1 (including S = 0).
inline bool has_ones_eigenvector(const Matrix& S, double rel_tol = 1e-9) {
    const Index L = S.rows();
    if (L == 0) return true;
    const Vector v = S * Vector::Ones(L);
    const double mean = v.mean();
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    return (v.array() - mean).abs().maxCoeff() <= rel_tol * scale;
}

class SpdInverter {
public:
    static constexpr double kDefaultRegularization = 1e-10;

    SpdInverter() = default;
    SpdInverter(Index L, InverseMode mode, double reg = kDefaultRegularization)
        : L_(L), mode_(mode), reg_(reg) {
        if (mode_ == InverseMode::simplex_plane) E_ = simplex_plane_basis(L);
    }

    Index dim() const { return L_; }
    InverseMode mode() const { return mode_; }
    double regularization() const { return reg_; }
    const Matrix& basis() const { return E_; }

    /// Regularised inverse of a symmetric PSD matrix. `what` and `block`
    /// identify the matrix in the error message.
    Matrix inverse(const Matrix& A, const char* what = "matrix", Index block = -1) const {
        if (mode_ == InverseMode::full) {
            return solve_spd(symmetrize(A) + reg_ * Matrix::Identity(L_, L_), what, block);
        }
        if (L_ <= 1) return Matrix::Zero(L_, L_);
        const Matrix red = E_.transpose() * symmetrize(A) * E_;
        const Matrix inv = solve_spd(red + reg_ * Matrix::Identity(L_ - 1, L_ - 1), what, block);
        return E_ * inv * E_.transpose();
    }

    static Matrix symmetrize(const Matrix& A) { return 0.5 * (A + A.transpose()); }

private:
    static Matrix solve_spd(const Matrix& A, const char* what, Index block) {
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success || !A.allFinite()) {
            std::ostringstream msg;
            msg << what << " is not positive definite after regularisation";
            if (block >= 0) msg << " (block " << block << ")";
            throw NumericalError(msg.str());
        }
        return llt.solve(Matrix::Identity(A.rows(), A.cols()));
    }

    Index L_ = 0;
    InverseMode mode_ = InverseMode::full;
    double reg_ = kDefaultRegularization;
    Matrix E_;
};

} // namespace scamp
