#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scamp/metrics.hpp"
#include "scamp/model.hpp"

using namespace scamp;

TEST(Mse, TrivialCases) {
    const Vector beta = sample_qgt_signal(1000, 0.3, 1);
    EXPECT_EQ(mse(beta, beta), 0.0);
    EXPECT_DOUBLE_EQ(mse(Vector(Vector::Ones(1000) - beta), beta), 1.0);
}

TEST(Mse, PriorMeanEstimate) {
    const Index p = 100000;
    const double pi = 0.3;
    const Vector beta = sample_qgt_signal(p, pi, 2);
    const double m = mse(Vector(Vector::Constant(p, pi)), beta);
    // (beta - pi)^2 takes values pi^2 and (1 - pi)^2.
    const double sd = std::abs((1 - pi) * (1 - pi) - pi * pi) * std::sqrt(pi * (1 - pi));
    EXPECT_LE(std::abs(m - pi * (1 - pi)), 5.0 * sd / std::sqrt(static_cast<double>(p)));
}

TEST(Mse, PooledFrobenius) {
    RowMatrix B = RowMatrix::Zero(2, 3);
    B(0, 0) = 1;
    B(1, 2) = 1;
    RowMatrix E = RowMatrix::Zero(2, 3);
    E(0, 1) = 1;
    E(1, 2) = 1;
    EXPECT_DOUBLE_EQ(mse(E, B), 1.0);
}

TEST(Correlation, TrivialCases) {
    Vector a(4);
    a << 1, 0, 1, 0;
    Vector b(4);
    b << 0, 1, 0, 1;
    EXPECT_DOUBLE_EQ(normalized_sq_correlation(a, a), 1.0);
    EXPECT_DOUBLE_EQ(normalized_sq_correlation(a, b), 0.0);
    Vector e(4);
    e << 0.9, 0.2, 0.7, 0.1;
    EXPECT_NEAR(normalized_sq_correlation(Vector(2.0 * e), a), normalized_sq_correlation(e, a), 1e-15);
}

TEST(Correlation, ZeroNormIsFlagged) {
    const FlaggedValue v = normalized_sq_correlation_flagged(Vector::Zero(3), Vector::Ones(3));
    EXPECT_EQ(v.value, 0.0);
    EXPECT_TRUE(v.undefined);
    EXPECT_FALSE(normalized_sq_correlation_flagged(Vector::Ones(3), Vector::Ones(3)).undefined);
}

TEST(Correlation, PooledIsRowOverlap) {
    RowMatrix B = RowMatrix::Zero(4, 2);
    B(0, 0) = B(1, 1) = B(2, 0) = B(3, 0) = 1;
    EXPECT_DOUBLE_EQ(normalized_sq_correlation(B, B), 1.0);
    RowMatrix E = RowMatrix::Constant(4, 2, 0.5);
    EXPECT_DOUBLE_EQ(normalized_sq_correlation(E, B), 0.5);
}

TEST(ErrorRatesTest, TrivialCases) {
    Vector truth(4);
    truth << 1, 0, 1, 0;
    ErrorRates e = fpr_fnr(truth, truth);
    EXPECT_EQ(e.fpr, 0.0);
    EXPECT_EQ(e.fnr, 0.0);
    e = fpr_fnr(Vector::Ones(4), truth);
    EXPECT_EQ(e.fpr, 1.0);
    EXPECT_EQ(e.fnr, 0.0);
}

TEST(ErrorRatesTest, UndefinedRatesAreNanWithFlag) {
    const ErrorRates e = fpr_fnr(Vector::Ones(3), Vector::Zero(3));
    EXPECT_TRUE(e.fnr_undefined);
    EXPECT_TRUE(std::isnan(e.fnr));
    EXPECT_FALSE(e.fpr_undefined);
    EXPECT_EQ(e.fpr, 1.0);
    const ErrorRates f = fpr_fnr(Vector::Zero(3), Vector::Ones(3));
    EXPECT_TRUE(f.fpr_undefined);
    EXPECT_TRUE(std::isnan(f.fpr));
}

TEST(ErrorRatesTest, IndependentGuessing) {
    const Index p = 100000;
    const double q = 0.2;
    const Vector truth = sample_qgt_signal(p, 0.3, 3);
    std::mt19937_64 eng(17);
    std::bernoulli_distribution coin(q);
    Vector guess(p);
    for (Index j = 0; j < p; ++j) guess[j] = coin(eng) ? 1.0 : 0.0;
    const ErrorRates e = fpr_fnr(guess, truth);
    const double neg = p - truth.sum();
    const double pos = truth.sum();
    EXPECT_LE(std::abs(e.fpr - q), 5.0 * std::sqrt(q * (1 - q) / neg));
    EXPECT_LE(std::abs(e.fnr - (1 - q)), 5.0 * std::sqrt(q * (1 - q) / pos));
}

TEST(HardDecision, IsStrict) {
    Vector e(3);
    e << 0.5, 0.50001, 0.2;
    const Vector d = hard_decision(e, 0.5);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[1], 1.0);
    EXPECT_EQ(d[2], 0.0);
}

TEST(Hamming, Rates) {
    const Vector truth = sample_qgt_signal(100, 0.5, 4);
    EXPECT_EQ(hamming_error_rate(truth, truth), 0.0);
    Vector flipped = truth;
    flipped[17] = 1.0 - flipped[17];
    EXPECT_DOUBLE_EQ(hamming_error_rate(flipped, truth), 0.01);

    RowMatrix B = RowMatrix::Zero(4, 2);
    B.col(0).setOnes();
    RowMatrix E = B;
    E(2, 0) = 0;
    E(2, 1) = 1;
    EXPECT_DOUBLE_EQ(hamming_error_rate(E, B), 0.25);
}

TEST(Hamming, BoundedByFourMse) {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vector truth = sample_qgt_signal(5000, 0.3, 5);
    Vector est(5000);
    for (Index j = 0; j < 5000; ++j) est[j] = 0.6 * truth[j] + 0.4 * u(eng);
    Vector q = (est.array() > 0.5).cast<double>().matrix();
    EXPECT_TRUE(hamming_within_mse_bound(est, q, truth));
    EXPECT_LE(hamming_error_rate(q, truth), 4.0 * mse(est, truth));
}

TEST(Summary, SampleStandardDeviation) {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const Summary s = summarize(v);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(s.count, 4);
    EXPECT_EQ(summarize(std::vector<double>{7.0}).sd, 0.0);
}
