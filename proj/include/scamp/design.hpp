#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <vector>

#include "scamp/base_matrix.hpp"
#include "scamp/errors.hpp"
#include "scamp/rng.hpp"
#include "scamp/types.hpp"

namespace scamp {

enum class DesignKind { sc, iid };

inline const char* to_string(DesignKind kind) { return kind == DesignKind::sc ? "sc" : "iid"; }

namespace detail {

// One (n/R) x (p/C) band block of the binary design. Sparse blocks hold
// per-row column offsets; dense blocks hold row-major 0/1 bytes.
struct DesignBlock {
    bool sparse = false;
    std::vector<std::uint8_t> dense;
    std::vector<std::uint32_t> row_ptr;
    std::vector<std::uint32_t> cols;
};

constexpr double kSparseDensity = 0.125;

template <int K>
inline void block_times(const DesignBlock& blk, Index nr, Index pc, const double* v, Index k,
                        double* out) {
    const Index kk = K > 0 ? K : k;
    if (blk.sparse) {
        for (Index i = 0; i < nr; ++i) {
            double* o = out + i * kk;
            for (std::uint32_t e = blk.row_ptr[i]; e < blk.row_ptr[i + 1]; ++e) {
                const double* vj = v + static_cast<Index>(blk.cols[e]) * kk;
                for (Index t = 0; t < kk; ++t) o[t] += vj[t];
            }
        }
        return;
    }
    for (Index i = 0; i < nr; ++i) {
        const std::uint8_t* x = blk.dense.data() + i * pc;
        double* o = out + i * kk;
        if (kk == 1) {
            double acc[4] = {0.0, 0.0, 0.0, 0.0};
            Index j = 0;
            for (; j + 4 <= pc; j += 4) {
                acc[0] += x[j] * v[j];
                acc[1] += x[j + 1] * v[j + 1];
                acc[2] += x[j + 2] * v[j + 2];
                acc[3] += x[j + 3] * v[j + 3];
            }
            for (; j < pc; ++j) acc[0] += x[j] * v[j];
            o[0] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
        } else {
            for (Index j = 0; j < pc; ++j) {
                if (x[j]) {
                    const double* vj = v + j * kk;
                    for (Index t = 0; t < kk; ++t) o[t] += vj[t];
                }
            }
        }
    }
}

template <int K>
inline void block_transpose_times(const DesignBlock& blk, Index nr, Index pc, const double* z,
                                  Index k, double* out) {
    const Index kk = K > 0 ? K : k;
    if (blk.sparse) {
        for (Index i = 0; i < nr; ++i) {
            const double* zi = z + i * kk;
            for (std::uint32_t e = blk.row_ptr[i]; e < blk.row_ptr[i + 1]; ++e) {
                double* o = out + static_cast<Index>(blk.cols[e]) * kk;
                for (Index t = 0; t < kk; ++t) o[t] += zi[t];
            }
        }
        return;
    }
    for (Index i = 0; i < nr; ++i) {
        const std::uint8_t* x = blk.dense.data() + i * pc;
        const double* zi = z + i * kk;
        if (kk == 1) {
            const double z0 = zi[0];
            for (Index j = 0; j < pc; ++j) out[j] += x[j] * z0;
        } else {
            for (Index j = 0; j < pc; ++j) {
                if (x[j]) {
                    double* o = out + j * kk;
                    for (Index t = 0; t < kk; ++t) o[t] += zi[t];
                }
            }
        }
    }
}

} // namespace detail

/// Binary Bernoulli design with band-block structure and its rescaled view.
///
/// Entry (i, j) of the raw design X is Bernoulli(alpha W[r(i), c(j)]). The
/// rescaled design is X~ = (X - alpha W) / sqrt(n alpha (1 - alpha) / R) on
/// band blocks and exactly 0 elsewhere. X~ is never materialised; products
/// with it are formed from X and per-block column sums.
class Design {
public:
    static Design sample(const BaseMatrix& base, Index n, Index p, std::uint64_t seed,
                         DesignKind kind = DesignKind::sc) {
        BaseMatrix b = kind == DesignKind::iid ? iid_base_matrix(base.alpha) : base;
        const Index R = b.rows();
        const Index C = b.cols();
        if (n <= 0 || p <= 0) {
            throw ConfigError("design dimensions must be positive");
        }
        if (n % R != 0 || p % C != 0) {
            std::ostringstream msg;
            msg << "design size (n=" << n << ", p=" << p << ") is not divisible by base shape (R="
                << R << ", C=" << C << ")";
            throw ConfigError(msg.str());
        }

        Design d;
        d.base_ = std::make_shared<const BaseMatrix>(std::move(b));
        d.kind_ = kind;
        d.n_ = n;
        d.p_ = p;
        d.seed_ = seed;
        d.nr_ = n / R;
        d.pc_ = p / C;
        const double a = d.base_->alpha;
        d.scale_ = std::sqrt(static_cast<double>(n) * a * (1.0 - a) / static_cast<double>(R));
        d.blocks_.resize(static_cast<std::size_t>(R * C));

        for (Index r = 0; r < R; ++r) {
            for (Index c = d.base_->first_col(r); c <= d.base_->last_col(r); ++c) {
                d.sample_block(r, c);
            }
        }
        return d;
    }

    Index rows() const { return n_; }
    Index cols() const { return p_; }
    const BaseMatrix& base() const { return *base_; }
    DesignKind kind() const { return kind_; }
    std::uint64_t seed() const { return seed_; }
    double alpha() const { return base_->alpha; }

    Index row_block_size() const { return nr_; }
    Index col_block_size() const { return pc_; }
    Index row_block(Index i) const { return i / nr_; }
    Index col_block(Index j) const { return j / pc_; }

    /// sqrt(n alpha (1 - alpha) / R), the rescaling denominator.
    double scale() const { return scale_; }

    /// Mean of a raw entry in block (r, c), i.e. alpha W[r, c].
    double block_mean(Index r, Index c) const { return base_->alpha * base_->W(r, c); }

    bool has_block(Index r, Index c) const { return base_->on_band(r, c); }

    int entry(Index i, Index j) const {
        const Index r = row_block(i);
        const Index c = col_block(j);
        if (!has_block(r, c)) return 0;
        const auto& blk = block(r, c);
        const Index li = i - r * nr_;
        const auto lj = static_cast<std::uint32_t>(j - c * pc_);
        if (!blk.sparse) return blk.dense[static_cast<std::size_t>(li * pc_ + lj)];
        auto first = blk.cols.begin() + blk.row_ptr[li];
        auto last = blk.cols.begin() + blk.row_ptr[li + 1];
        return std::binary_search(first, last, lj) ? 1 : 0;
    }

    double rescaled(Index i, Index j) const {
        const Index r = row_block(i);
        const Index c = col_block(j);
        if (!has_block(r, c)) return 0.0;
        return (entry(i, j) - block_mean(r, c)) / scale_;
    }

    Matrix dense_raw() const {
        Matrix X = Matrix::Zero(n_, p_);
        for_each_one([&](Index i, Index j) { X(i, j) = 1.0; });
        return X;
    }

    Matrix dense_rescaled() const {
        Matrix X = Matrix::Zero(n_, p_);
        for (Index r = 0; r < base_->rows(); ++r) {
            for (Index c = base_->first_col(r); c <= base_->last_col(r); ++c) {
                X.block(r * nr_, c * pc_, nr_, pc_).setConstant(-block_mean(r, c) / scale_);
            }
        }
        for_each_one([&](Index i, Index j) { X(i, j) += 1.0 / scale_; });
        return X;
    }

    /// Calls fn(i, j) for every entry with X[i, j] = 1, in row-major order
    /// within each block.
    template <class Fn>
    void for_each_one(Fn&& fn) const {
        for (Index r = 0; r < base_->rows(); ++r) {
            for (Index c = base_->first_col(r); c <= base_->last_col(r); ++c) {
                const auto& blk = block(r, c);
                for (Index li = 0; li < nr_; ++li) {
                    const Index i = r * nr_ + li;
                    if (blk.sparse) {
                        for (std::uint32_t e = blk.row_ptr[li]; e < blk.row_ptr[li + 1]; ++e) {
                            fn(i, c * pc_ + static_cast<Index>(blk.cols[e]));
                        }
                    } else {
                        const std::uint8_t* x = blk.dense.data() + li * pc_;
                        for (Index lj = 0; lj < pc_; ++lj) {
                            if (x[lj]) fn(i, c * pc_ + lj);
                        }
                    }
                }
            }
        }
    }

    /// X~ V for a p x k row-major V; returns n x k.
    RowMatrix rescaled_times(const RowMatrix& V) const {
        check_rows(V.rows(), p_, "rescaled_times");
        const Index k = V.cols();
        RowMatrix out = RowMatrix::Zero(n_, k);
        RowMatrix colsum = column_block_sums(V);
        for (Index r = 0; r < base_->rows(); ++r) {
            double* o = out.data() + r * nr_ * k;
            Eigen::RowVectorXd shift = Eigen::RowVectorXd::Zero(k);
            for (Index c = base_->first_col(r); c <= base_->last_col(r); ++c) {
                dispatch_times(block(r, c), V.data() + c * pc_ * k, k, o);
                shift += block_mean(r, c) * colsum.row(c);
            }
            auto rows = out.middleRows(r * nr_, nr_);
            rows.rowwise() -= shift;
            rows /= scale_;
        }
        return out;
    }

    Vector rescaled_times(const Vector& v) const {
        RowMatrix V = Eigen::Map<const RowMatrix>(v.data(), v.size(), 1);
        RowMatrix out = rescaled_times(V);
        return Eigen::Map<const Vector>(out.data(), out.rows());
    }

    /// X~^T Z for an n x k row-major Z; returns p x k.
    RowMatrix rescaled_transpose_times(const RowMatrix& Z) const {
        check_rows(Z.rows(), n_, "rescaled_transpose_times");
        const Index k = Z.cols();
        RowMatrix out = RowMatrix::Zero(p_, k);
        RowMatrix rowsum = row_block_sums(Z);
        for (Index c = 0; c < base_->cols(); ++c) {
            double* o = out.data() + c * pc_ * k;
            Eigen::RowVectorXd shift = Eigen::RowVectorXd::Zero(k);
            for (Index r = c; r <= std::min(base_->rows() - 1, c + base_->omega - 1); ++r) {
                dispatch_transpose_times(block(r, c), Z.data() + r * nr_ * k, k, o);
                shift += block_mean(r, c) * rowsum.row(r);
            }
            auto rows = out.middleRows(c * pc_, pc_);
            rows.rowwise() -= shift;
            rows /= scale_;
        }
        return out;
    }

    Vector rescaled_transpose_times(const Vector& z) const {
        RowMatrix Z = Eigen::Map<const RowMatrix>(z.data(), z.size(), 1);
        RowMatrix out = rescaled_transpose_times(Z);
        return Eigen::Map<const Vector>(out.data(), out.rows());
    }

    /// Adds X~_{(r,c)}^T Z_r into out (pc x k, row-major) for a single band
    /// block, where Z_r is the nr x k slice of row block r.
    void accumulate_block_transpose(Index r, Index c, const RowMatrix& Zr, RowMatrix& out) const {
        const Index k = Zr.cols();
        RowMatrix tmp = RowMatrix::Zero(pc_, k);
        dispatch_transpose_times(block(r, c), Zr.data(), k, tmp.data());
        const Eigen::RowVectorXd shift = block_mean(r, c) * Zr.colwise().sum();
        tmp.rowwise() -= shift;
        out += tmp / scale_;
    }

    /// Raw product X beta.
    Vector raw_times(const Vector& beta) const {
        RowMatrix B = Eigen::Map<const RowMatrix>(beta.data(), beta.size(), 1);
        RowMatrix out = raw_times(B);
        return Eigen::Map<const Vector>(out.data(), out.rows());
    }

    RowMatrix raw_times(const RowMatrix& B) const {
        check_rows(B.rows(), p_, "raw_times");
        const Index k = B.cols();
        RowMatrix out = RowMatrix::Zero(n_, k);
        for (Index r = 0; r < base_->rows(); ++r) {
            for (Index c = base_->first_col(r); c <= base_->last_col(r); ++c) {
                dispatch_times(block(r, c), B.data() + c * pc_ * k, k, out.data() + r * nr_ * k);
            }
        }
        return out;
    }

    /// Number of items in each test (row sums of X).
    Vector items_per_test() const { return raw_times(Vector(Vector::Ones(p_))); }

    /// Variance of X~ entries per block: R W~ / n.
    Matrix variance_profile() const {
        return base_->W_tilde * (static_cast<double>(base_->rows()) / static_cast<double>(n_));
    }

    /// Sum over j in column block c of V(j, :).
    RowMatrix column_block_sums(const RowMatrix& V) const {
        RowMatrix s(base_->cols(), V.cols());
        for (Index c = 0; c < base_->cols(); ++c) {
            s.row(c) = V.middleRows(c * pc_, pc_).colwise().sum();
        }
        return s;
    }

    RowMatrix row_block_sums(const RowMatrix& Z) const {
        RowMatrix s(base_->rows(), Z.cols());
        for (Index r = 0; r < base_->rows(); ++r) {
            s.row(r) = Z.middleRows(r * nr_, nr_).colwise().sum();
        }
        return s;
    }

private:
    Design() = default;

    const detail::DesignBlock& block(Index r, Index c) const {
        return blocks_[static_cast<std::size_t>(r * base_->cols() + c)];
    }

    void sample_block(Index r, Index c) {
        auto& blk = blocks_[static_cast<std::size_t>(r * base_->cols() + c)];
        const double q = block_mean(r, c);
        auto eng = make_engine(seed_, StreamTag::design, static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(c));
        blk.sparse = q < detail::kSparseDensity;
        if (blk.sparse) {
            blk.row_ptr.assign(static_cast<std::size_t>(nr_ + 1), 0);
            blk.cols.reserve(static_cast<std::size_t>(1.2 * q * nr_ * pc_) + 16);
            for (Index li = 0; li < nr_; ++li) {
                for (Index lj = 0; lj < pc_; ++lj) {
                    if (bernoulli(eng, q)) blk.cols.push_back(static_cast<std::uint32_t>(lj));
                }
                blk.row_ptr[static_cast<std::size_t>(li + 1)] =
                    static_cast<std::uint32_t>(blk.cols.size());
            }
        } else {
            blk.dense.resize(static_cast<std::size_t>(nr_ * pc_));
            for (auto& x : blk.dense) x = bernoulli(eng, q) ? 1 : 0;
        }
    }

    void dispatch_times(const detail::DesignBlock& blk, const double* v, Index k,
                        double* out) const {
        switch (k) {
            case 1: detail::block_times<1>(blk, nr_, pc_, v, k, out); break;
            case 2: detail::block_times<2>(blk, nr_, pc_, v, k, out); break;
            case 3: detail::block_times<3>(blk, nr_, pc_, v, k, out); break;
            case 4: detail::block_times<4>(blk, nr_, pc_, v, k, out); break;
            default: detail::block_times<0>(blk, nr_, pc_, v, k, out); break;
        }
    }

    void dispatch_transpose_times(const detail::DesignBlock& blk, const double* z, Index k,
                                  double* out) const {
        switch (k) {
            case 1: detail::block_transpose_times<1>(blk, nr_, pc_, z, k, out); break;
            case 2: detail::block_transpose_times<2>(blk, nr_, pc_, z, k, out); break;
            case 3: detail::block_transpose_times<3>(blk, nr_, pc_, z, k, out); break;
            case 4: detail::block_transpose_times<4>(blk, nr_, pc_, z, k, out); break;
            default: detail::block_transpose_times<0>(blk, nr_, pc_, z, k, out); break;
        }
    }

    static void check_rows(Index got, Index want, const char* what) {
        if (got != want) {
            std::ostringstream msg;
            msg << what << ": operand has " << got << " rows, expected " << want;
            throw ConfigError(msg.str());
        }
    }

    std::shared_ptr<const BaseMatrix> base_;
    DesignKind kind_ = DesignKind::sc;
    Index n_ = 0;
    Index p_ = 0;
    std::uint64_t seed_ = 0;
    Index nr_ = 0;
    Index pc_ = 0;
    double scale_ = 1.0;
    std::vector<detail::DesignBlock> blocks_;
};

/// Feasible (n, p) for a requested sampling ratio: n = round(delta p / R) R.
struct Dimensions {
    Index n = 0;
    Index p = 0;
    double delta_actual = 0.0;
};

inline Dimensions round_dimensions(const BaseMatrix& base, double delta, Index p) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (p <= 0 || p % base.cols() != 0) {
        std::ostringstream msg;
        msg << "p=" << p << " is not a positive multiple of C=" << base.cols();
        throw ConfigError(msg.str());
    }
    const Index R = base.rows();
    Index blocks = static_cast<Index>(std::llround(delta * static_cast<double>(p) / R));
    blocks = std::max<Index>(blocks, 1);
    Dimensions d;
    d.n = blocks * R;
    d.p = p;
    d.delta_actual = static_cast<double>(d.n) / static_cast<double>(p);
    return d;
}

} // namespace scamp
