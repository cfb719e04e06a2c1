#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scamp/potential.hpp"
#include "scamp/state_evolution.hpp"

using namespace scamp;

TEST(MutualInfo, Limits) {
    EXPECT_EQ(mutual_info_bernoulli(0.0, 0.3), 0.0);
    EXPECT_NEAR(mutual_info_bernoulli(1e6, 0.3), binary_entropy(0.3), 1e-3);
}

TEST(MutualInfo, MonteCarloOracle) {
    // I = E[log p(y | beta) - log p(y)] with y = beta + G, beta ~ Bernoulli(1/2), s = 1.
    std::mt19937_64 eng(77);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> g;
    const int N = 10000000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double b = coin(eng) ? 1.0 : 0.0;
        const double y = b + g(eng);
        const double l1 = -0.5 * (y - 1) * (y - 1);
        const double l0 = -0.5 * y * y;
        const double lb = b == 1.0 ? l1 : l0;
        const double m = std::max(l0, l1);
        const double v = lb - (m + std::log(0.5 * std::exp(l0 - m) + 0.5 * std::exp(l1 - m)));
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / N;
    const double se = std::sqrt((sum2 / N - mean * mean) / N);
    EXPECT_LE(std::abs(mutual_info_bernoulli(1.0, 0.5) - mean), 3.0 * se);
}

TEST(MutualInfo, NondecreasingInSnr) {
    double prev = 0.0;
    for (double s = 0.0; s <= 50.0; s += 0.5) {
        const double v = mutual_info_bernoulli(s, 0.2);
        EXPECT_GE(v, prev - 1e-14);
        prev = v;
    }
}

TEST(Potential, ValueAtZero) {
    const double sigma2 = 0.04;
    EXPECT_NEAR(potential_value(0.0, 0.3, 0.1, sigma2), 2.0 * mutual_info_bernoulli(1.0 / sigma2, 0.1), 1e-14);
    EXPECT_THROW(potential_value(0.5, 0.3, 0.1, sigma2), ConfigError);
}

TEST(Potential, FiniteInNoiselessMode) {
    const double s2 = kNoiselessSigma * kNoiselessSigma;
    const auto curve = find_argmin_and_stationary(0.05, 0.1, s2, 500);
    ASSERT_EQ(curve.grid.size(), 500u);
    EXPECT_EQ(curve.grid.front(), 0.0);
    EXPECT_NEAR(curve.grid.back(), 0.09, 1e-15);
    for (double v : curve.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Potential, MinimizerAtZeroForSmallDelta) {
    const double s2 = kNoiselessSigma * kNoiselessSigma;
    for (double delta : {0.02, 0.05}) {
        const auto curve = find_argmin_and_stationary(delta, 0.1, s2, 500);
        EXPECT_EQ(curve.argmin_b, 0.0) << delta;
    }
    EXPECT_GT(find_argmin_and_stationary(0.02, 0.1, s2, 500).largest_stationary_b, 0.01);
}

TEST(Potential, OverdeterminedLimit) {
    const auto curve = find_argmin_and_stationary(10.0, 0.3, 1e-8, 500);
    EXPECT_LT(curve.argmin_b, 1e-8);
    EXPECT_LT(curve.largest_stationary_b, 1e-8);
}

TEST(Potential, LargestStationaryPointIsIidFixedPoint) {
    for (double pi : {0.1, 0.3}) {
        for (double delta : {0.2, 0.35, 0.6}) {
            for (double sigma2 : {1e-4, 1e-2}) {
                const auto se = iterate_scalar_se(iid_base_matrix(0.5), delta, pi, sigma2);
                const auto curve = find_argmin_and_stationary(delta, pi, sigma2, 500);
                EXPECT_NEAR(curve.largest_stationary_b, se.psi[0], 1e-6)
                    << "pi=" << pi << " delta=" << delta << " sigma2=" << sigma2;
            }
        }
    }
}

TEST(Potential, RejectsSmallGrid) { EXPECT_THROW(find_argmin_and_stationary(0.3, 0.3, 1e-3, 50), ConfigError); }

TEST(Lemma, BoundValues) {
    EXPECT_NEAR(lemma_bound(0.3, 0.1, 1e-4), 1.05 * std::pow(1e-4, 4.0 / 3.0), 1e-20);
    EXPECT_NEAR(lemma_bound(0.3, 1e-12, 1e-3), 3.5 * 0.3 * 1e-6, 1e-15);
    EXPECT_THROW(lemma_rate_check(0.3, 0.3, 0.3, {1e-3}), ConfigError);
}

TEST(Lemma, HoldsAtSmallSigma) {
    const auto table = lemma_rate_check(0.3, 0.1, 0.1, {1e-4});
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_TRUE(table.rows[0].holds);
}
