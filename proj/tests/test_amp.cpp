#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "scamp/amp.hpp"
#include "scamp/matrix_amp.hpp"
#include "scamp/model.hpp"
#include "oracles.hpp"

using namespace scamp;
using oracles::textbook_amp;

TEST(ScAmp, TrivialBaseMatchesTextbookAmp) {
    const BaseMatrix base = build_base_matrix(1, 1, 0.5);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Design d = Design::sample(base, 20, 40, seed);
        const double pi = 0.3;
        const Vector beta = sample_qgt_signal(40, pi, seed);
        const QgtInstance inst = observe_qgt(d, beta, 0.05, NoiseScaling::rescaled_variance, seed);
        const auto ref = textbook_amp(d.dense_rescaled(), inst.yt, pi, 10);

        std::vector<Vector> got;
        QgtAmpOptions opt;
        opt.config.max_iters = 10;
        opt.config.tol = 1e-300;
        opt.observer = [&](const QgtAmpIterate& it) { got.push_back(*it.beta_hat); };
        run_sc_amp_qgt(d, inst.yt, pi, inst.sigma2, opt);
        ASSERT_EQ(got.size(), 10u);
        for (int k = 0; k < 10; ++k) {
            EXPECT_LE((got[k] - ref[k]).cwiseAbs().maxCoeff(), 1e-8) << "iteration " << k;
        }
    }
}

TEST(ScAmp, OnsagerAndWeightsAreBlockwise) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 270, 700, 2);
    const Vector beta = sample_qgt_signal(700, 0.3, 2);
    const QgtInstance inst = observe_qgt(d, beta, 0.0, NoiseScaling::raw_variance, 2);
    QgtAmpOptions opt;
    opt.config.max_iters = 20;
    int calls = 0;
    opt.observer = [&](const QgtAmpIterate& it) {
        ++calls;
        EXPECT_EQ(it.msq->size(), base.rows());
        EXPECT_EQ(it.onsager->size(), base.rows());
        EXPECT_EQ(it.chi2->size(), base.cols());
        EXPECT_GE(it.beta_hat->minCoeff(), 0.0);
        EXPECT_LE(it.beta_hat->maxCoeff(), 1.0);
    };
    const auto res = run_sc_amp_qgt(d, inst.yt, 0.3, 0.0, opt);
    EXPECT_EQ(calls, res.iterations);
}

TEST(ScAmp, DeterministicRerun) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 270, 700, 3);
    const Vector beta = sample_qgt_signal(700, 0.3, 3);
    const QgtInstance inst = observe_qgt(d, beta, 0.01, NoiseScaling::rescaled_variance, 3);
    const auto a = run_sc_amp_qgt(d, inst.yt, 0.3, inst.sigma2);
    const auto b = run_sc_amp_qgt(d, inst.yt, 0.3, inst.sigma2);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE(a.beta_hat == b.beta_hat);
}

TEST(ScAmp, RejectsBadInput) {
    const Design d = Design::sample(build_base_matrix(3, 7, 0.5), 90, 70, 1);
    EXPECT_THROW(run_sc_amp_qgt(d, Vector::Zero(89), 0.3, 0.0), ConfigError);
    EXPECT_THROW(run_sc_amp_qgt(d, Vector::Zero(90), 0.3, -1.0), ConfigError);
    QgtAmpOptions opt;
    opt.config.max_iters = 0;
    EXPECT_THROW(run_sc_amp_qgt(d, Vector::Zero(90), 0.3, 0.0, opt), ConfigError);
    opt.config.max_iters = 5;
    opt.config.se_mode = SeParamMode::precomputed_se;
    EXPECT_THROW(run_sc_amp_qgt(d, Vector::Zero(90), 0.3, 0.0, opt), ConfigError);
}

TEST(ScAmp, NonFiniteInputIsDivergence) {
    const Design d = Design::sample(build_base_matrix(3, 7, 0.5), 90, 70, 1);
    Vector yt = Vector::Zero(90);
    yt[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        run_sc_amp_qgt(d, yt, 0.3, 0.0);
        FAIL() << "expected a DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.iteration(), 0);
    }
}

TEST(Quantize, ThresholdIsStrict) {
    Vector v(4);
    v << 0.5, 0.51, 0.49, 1.0;
    const Vector q = quantize(v);
    EXPECT_EQ(q[0], 0.0);
    EXPECT_EQ(q[1], 1.0);
    EXPECT_EQ(q[2], 0.0);
    EXPECT_EQ(q[3], 1.0);
}

TEST(Quantize, RowArgmaxBreaksTiesLow) {
    RowMatrix m(2, 3);
    m << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2;
    const RowMatrix a = quantize(m, QuantizeMode::row_argmax);
    EXPECT_EQ(a(0, 1), 1.0);
    EXPECT_EQ(a.row(0).sum(), 1.0);
    EXPECT_EQ(a(1, 0), 1.0);
    EXPECT_EQ(a.row(1).sum(), 1.0);
    const RowMatrix t = quantize(m, QuantizeMode::threshold_half);
    EXPECT_EQ(t.sum(), 0.0);
}

TEST(MatrixAmp, TwoCategoryEmbeddingMatchesScalar) {
    const BaseMatrix base = build_base_matrix(2, 6, 0.5);
    const Dimensions dm = round_dimensions(base, 0.3, 1200);
    for (std::uint64_t seed : {5u, 6u}) {
        const Design d = Design::sample(base, dm.n, dm.p, seed);
        const double pi = 0.3;
        const Vector beta = sample_qgt_signal(dm.p, pi, seed);
        const QgtInstance q = observe_qgt(d, beta, 0.0, NoiseScaling::raw_variance, seed);
        RowMatrix B(dm.p, 2);
        B.col(0) = Vector::Ones(dm.p) - beta;
        B.col(1) = beta;
        Vector piv(2);
        piv << 1 - pi, pi;
        const PooledInstance P = observe_pooled(d, B, piv, Matrix::Zero(2, 2), NoiseScaling::raw_variance, seed);

        std::vector<Vector> scalar;
        QgtAmpOptions o;
        o.config.max_iters = 15;
        o.config.tol = 1e-300;
        o.observer = [&](const QgtAmpIterate& it) { scalar.push_back(*it.beta_hat); };
        run_sc_amp_qgt(d, q.yt, pi, 0.0, o);

        std::vector<Vector> matrix;
        MatrixAmpOptions mo;
        mo.config = o.config;
        mo.observer = [&](const MatrixAmpIterate& it) { matrix.push_back(it.B_hat->col(1)); };
        run_matrix_sc_amp(d, P.Yt, piv, P.noise_cov, mo);

        ASSERT_EQ(scalar.size(), matrix.size());
        for (std::size_t k = 0; k < scalar.size(); ++k) {
            EXPECT_LE((scalar[k] - matrix[k]).cwiseAbs().maxCoeff(), 1e-6) << "iteration " << k;
        }
    }
}

TEST(MatrixAmp, SingleCategoryIsAllOnes) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 90, 70, 1);
    const Vector pi = Vector::Ones(1);
    const RowMatrix B = sample_pooled_signal(70, pi, 1);
    const PooledInstance P = observe_pooled(d, B, pi, Matrix::Zero(1, 1), NoiseScaling::raw_variance, 1);
    MatrixAmpOptions mo;
    mo.config.max_iters = 1;
    const auto res = run_matrix_sc_amp(d, P.Yt, pi, P.noise_cov, mo);
    EXPECT_LE((res.B_hat - RowMatrix::Ones(70, 1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MatrixAmp, RowsStayInSimplex) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 270, 700, 2);
    const Vector pi = Vector::Constant(3, 1.0 / 3.0);
    const RowMatrix B = sample_pooled_signal(700, pi, 2);
    const PooledInstance P = observe_pooled(d, B, pi, Matrix::Zero(3, 3), NoiseScaling::raw_variance, 2);
    MatrixAmpOptions mo;
    mo.config.max_iters = 30;
    mo.observer = [&](const MatrixAmpIterate& it) {
        const RowMatrix& Bh = *it.B_hat;
        EXPECT_LE((Bh.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_GE(Bh.minCoeff(), 0.0);
        for (const auto& T : *it.tau) EXPECT_LE((T - T.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    };
    run_matrix_sc_amp(d, P.Yt, pi, P.noise_cov, mo);
}

TEST(ColumnwiseAmp, SingleColumnMatchesScalar) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 270, 700, 4);
    const double pi = 0.3;
    const Vector beta = sample_qgt_signal(700, pi, 4);
    const QgtInstance q = observe_qgt(d, beta, 0.0, NoiseScaling::raw_variance, 4);
    RowMatrix Yt(270, 1);
    Yt.col(0) = q.yt;
    const Vector piv = Vector::Constant(1, pi);
    const auto col = run_columnwise_sc_amp(d, Yt, piv, Vector::Zero(1));
    const auto ref = run_sc_amp_qgt(d, q.yt, pi, 0.0);
    EXPECT_TRUE(col.B_hat.col(0) == ref.beta_hat);
}

TEST(ColumnwiseAmp, DegenerateColumnIsConstant) {
    const BaseMatrix base = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(base, 90, 70, 1);
    Vector pi(3);
    pi << 0.5, 0.5, 0.0;
    const RowMatrix B = sample_pooled_signal(70, pi, 1);
    const PooledInstance P = observe_pooled(d, B, pi, Matrix::Zero(3, 3), NoiseScaling::raw_variance, 1);
    const auto res = run_columnwise_sc_amp(d, P.Yt, pi, Vector::Zero(3));
    EXPECT_EQ(res.B_hat.col(2).cwiseAbs().maxCoeff(), 0.0);
    for (const auto& e : res.errors) EXPECT_TRUE(e.empty());
}
