#include <gtest/gtest.h>

#include <cmath>

#include "scamp/design.hpp"

using namespace scamp;

TEST(BaseMatrix, TrivialBaseIsOne) {
    const BaseMatrix b = build_base_matrix(1, 1, 0.5);
    ASSERT_EQ(b.rows(), 1);
    ASSERT_EQ(b.cols(), 1);
    EXPECT_DOUBLE_EQ(b.W(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(b.W_tilde(0, 0), 1.0);
}

TEST(BaseMatrix, BandValueAndShape) {
    const BaseMatrix b = build_base_matrix(3, 7, 0.5);
    ASSERT_EQ(b.rows(), 9);
    ASSERT_EQ(b.cols(), 7);
    const double v = 1.0 - std::sqrt(2.0 / 3.0);
    EXPECT_NEAR(v, 0.183503, 1e-6);
    for (Index r = 0; r < 9; ++r) {
        for (Index c = 0; c < 7; ++c) {
            const bool band = c <= r && r <= c + 2;
            if (band) {
                EXPECT_NEAR(b.W(r, c), v, 1e-15);
                EXPECT_NEAR(b.W_tilde(r, c), 1.0 / 3.0, 1e-15);
            } else {
                EXPECT_EQ(b.W(r, c), 0.0);
                EXPECT_EQ(b.W_tilde(r, c), 0.0);
            }
        }
    }
}

TEST(BaseMatrix, VarianceProfileColumnsSumToOne) {
    for (double alpha : {0.1, 0.5, 0.8}) {
        const BaseMatrix b = build_base_matrix(6, 40, alpha);
        for (Index c = 0; c < b.cols(); ++c) EXPECT_NEAR(b.W_tilde.col(c).sum(), 1.0, 1e-12);
        for (Index r = 0; r < b.rows(); ++r) {
            for (Index c = 0; c < b.cols(); ++c) {
                if (!b.on_band(r, c)) continue;
                const double w = b.W(r, c);
                EXPECT_NEAR(w * (1.0 - alpha * w) / (1.0 - alpha), 1.0 / 6.0, 1e-12);
                EXPECT_LT(w * alpha, 1.0);
            }
        }
    }
}

TEST(BaseMatrix, LargeAlphaUsesPlusRoot) {
    const double alpha = 0.8;
    const BaseMatrix b = build_base_matrix(3, 7, alpha);
    const double expect = (1.0 + std::sqrt(1.0 - 4.0 * alpha * (1.0 - alpha) / 3.0)) / (2.0 * alpha);
    EXPECT_NEAR(b.W(0, 0), expect, 1e-15);
}

TEST(BaseMatrix, RejectsBadParameters) {
    EXPECT_THROW(build_base_matrix(3, 4, 0.5), ConfigError);
    EXPECT_THROW(build_base_matrix(3, 7, 0.0), ConfigError);
    EXPECT_THROW(build_base_matrix(3, 7, 1.0), ConfigError);
    EXPECT_THROW(build_base_matrix(0, 7, 0.5), ConfigError);
}

TEST(Design, TrivialBaseFourByFour) {
    const Design d = Design::sample(build_base_matrix(1, 1, 0.5), 4, 4, 11);
    EXPECT_DOUBLE_EQ(d.scale(), 1.0);
    for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 4; ++j) {
            const int x = d.entry(i, j);
            EXPECT_TRUE(x == 0 || x == 1);
            EXPECT_DOUBLE_EQ(d.rescaled(i, j), x - 0.5);
        }
    }
}

TEST(Design, OffBandEntriesAreZero) {
    const Design d = Design::sample(build_base_matrix(3, 7, 0.5), 90, 70, 3);
    const Matrix X = d.dense_raw();
    const Matrix Xt = d.dense_rescaled();
    for (Index i = 0; i < 90; ++i) {
        for (Index j = 0; j < 70; ++j) {
            const Index r = i / 10;
            const Index c = j / 10;
            if (r < c || r > c + 2) {
                EXPECT_EQ(X(i, j), 0.0);
                EXPECT_EQ(Xt(i, j), 0.0);
            }
        }
    }
}

TEST(Design, RescaledEntriesFollowDefinition) {
    const BaseMatrix b = build_base_matrix(3, 7, 0.5);
    const Design d = Design::sample(b, 90, 70, 4);
    const double scale = std::sqrt(90 * 0.25 / 9.0);
    EXPECT_NEAR(d.scale(), scale, 1e-15);
    for (Index i = 0; i < 90; ++i) {
        for (Index j = 0; j < 70; ++j) {
            const Index r = i / 10;
            const Index c = j / 10;
            if (!b.on_band(r, c)) continue;
            EXPECT_NEAR(d.rescaled(i, j), (d.entry(i, j) - 0.5 * b.W(r, c)) / scale, 1e-14);
        }
    }
}

TEST(Design, VarianceProfile) {
    const Design d = Design::sample(build_base_matrix(3, 7, 0.5), 90, 70, 1);
    const Matrix v = d.variance_profile();
    EXPECT_NEAR(v(0, 0), 1.0 / 30.0, 1e-15);
    EXPECT_NEAR(v(4, 2), 1.0 / 30.0, 1e-15);
    EXPECT_EQ(v(0, 1), 0.0);
    EXPECT_EQ(v(8, 0), 0.0);

    const Design iid = Design::sample(iid_base_matrix(0.5), 50, 80, 1, DesignKind::iid);
    const Matrix vi = iid.variance_profile();
    ASSERT_EQ(vi.size(), 1);
    EXPECT_NEAR(vi(0, 0), 1.0 / 50.0, 1e-15);
}

TEST(Design, DivisibilityIsEnforced) {
    const BaseMatrix b = build_base_matrix(3, 7, 0.5);
    try {
        Design::sample(b, 91, 70, 0);
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n=91"), std::string::npos);
    }
    EXPECT_THROW(Design::sample(b, 90, 71, 0), ConfigError);
}

TEST(Design, RoundDimensions) {
    const BaseMatrix b = build_base_matrix(6, 40, 0.5);
    const Dimensions dm = round_dimensions(b, 0.38, 20000);
    EXPECT_EQ(dm.n % 45, 0);
    EXPECT_EQ(dm.n, 7605);
    EXPECT_NEAR(dm.delta_actual, 7605.0 / 20000.0, 1e-15);
    EXPECT_THROW(round_dimensions(b, 0.38, 20001), ConfigError);
}

TEST(Design, BlockMomentsWithinFiveStandardErrors) {
    const BaseMatrix b = build_base_matrix(3, 7, 0.5);
    const Index n = 900;
    const Index p = 700;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Design d = Design::sample(b, n, p, seed);
        const Matrix Xt = d.dense_rescaled();
        for (Index r = 0; r < b.rows(); ++r) {
            for (Index c = b.first_col(r); c <= b.last_col(r); ++c) {
                const auto blk = Xt.block(r * 100, c * 100, 100, 100);
                const double size = static_cast<double>(blk.size());
                const double var = b.rows() * b.W_tilde(r, c) / static_cast<double>(n);
                EXPECT_LE(std::abs(blk.mean()), 5.0 * std::sqrt(var / size));
                // Second moment: the entry square is a scaled Bernoulli.
                const double q = 0.5 * b.W(r, c);
                const double s2 = d.scale() * d.scale();
                const double a = (1.0 - q) * (1.0 - q) / s2;
                const double z = q * q / s2;
                const double sd = std::abs(a - z) * std::sqrt(q * (1.0 - q));
                EXPECT_LE(std::abs(blk.array().square().mean() - var), 5.0 * sd / std::sqrt(size));
            }
        }
    }
}

TEST(Design, ScWithTrivialBaseMatchesIid) {
    const Design a = Design::sample(build_base_matrix(1, 1, 0.5), 30, 40, 9, DesignKind::sc);
    const Design b = Design::sample(iid_base_matrix(0.5), 30, 40, 9, DesignKind::iid);
    EXPECT_EQ(a.dense_raw(), b.dense_raw());
    EXPECT_EQ(a.dense_rescaled(), b.dense_rescaled());
}

TEST(Design, SameSeedSameDesign) {
    const BaseMatrix b = build_base_matrix(3, 7, 0.5);
    EXPECT_EQ(Design::sample(b, 90, 70, 5).dense_raw(), Design::sample(b, 90, 70, 5).dense_raw());
    EXPECT_NE(Design::sample(b, 90, 70, 5).dense_raw(), Design::sample(b, 90, 70, 6).dense_raw());
}

TEST(Design, ItemsPerTestNearQuarterOfBlock) {
    const BaseMatrix b = build_base_matrix(6, 40, 0.5);
    const Design d = Design::sample(b, 45 * 20, 40 * 100, 2);
    const Vector items = d.items_per_test();
    // Interior rows touch omega column blocks, each with mean 0.5 W pc items.
    const double bound = 100.0 * 3.0 * (1.0 - std::sqrt(1.0 - 1.0 / 6.0));
    double interior = 0.0;
    Index count = 0;
    for (Index i = 0; i < d.rows(); ++i) {
        const Index r = d.row_block(i);
        if (r >= 5 && r < 40) {
            interior += items[i];
            ++count;
        }
    }
    EXPECT_NEAR(interior / count, bound, 1.0);
    EXPECT_NEAR(bound, 100.0 / 4.0, 2.5);
}

TEST(Design, ProductsMatchDenseForm) {
    const Design d = Design::sample(build_base_matrix(3, 7, 0.5), 90, 70, 8);
    const Matrix Xt = d.dense_rescaled();
    Vector v = Vector::LinSpaced(70, -1.0, 2.0);
    Vector z = Vector::LinSpaced(90, 0.5, -0.7);
    EXPECT_LE((d.rescaled_times(v) - Xt * v).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((d.rescaled_transpose_times(z) - Xt.transpose() * z).cwiseAbs().maxCoeff(), 1e-12);
    RowMatrix V(70, 3);
    V.col(0) = v;
    V.col(1) = v.array().square();
    V.col(2).setOnes();
    EXPECT_LE((d.rescaled_times(V) - Xt * V).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((d.raw_times(v) - d.dense_raw() * v).cwiseAbs().maxCoeff(), 1e-12);
}
