#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "duwak/stats.hpp"
#include "oracles.hpp"

using namespace duwak;

using namespace testing_support;

TEST(NormalCdf, MatchesErfSeriesOnGrid) {
    double worst = 0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = -10.0 + 20.0 * i / 10000.0;
        worst = std::max(worst, std::abs(normal_cdf(x) - static_cast<double>(phi_oracle(x))));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(NormalCdf, Examples) {
    EXPECT_EQ(normal_cdf(0.0), 0.5);
    for (double x : {0.1, 1.0, 2.5, 7.0}) EXPECT_NEAR(normal_cdf(x) + normal_cdf(-x), 1.0, 1e-15);
    EXPECT_NEAR(normal_cdf(2.0), 0.9772498680518208, 1e-15);
    EXPECT_NEAR(normal_sf(2.0) / 0.022750131948179207, 1.0, 1e-15);
}

TEST(NormalCdf, MonotoneAndTail) {
    double prev = 0;
    for (double x = -40; x <= 40; x += 0.01) {
        const double v = normal_cdf(x);
        ASSERT_GE(v, prev);
        prev = v;
    }
    // Relative accuracy deep in the upper tail.
    EXPECT_NEAR(normal_sf(10.0) / 7.619853024160527e-24, 1.0, 1e-12);
}

TEST(Chi2Cdf4, MatchesSimpsonOnGrid) {
    double worst = 0;
    for (double x = 0; x <= 60; x += 0.37) {
        worst = std::max(worst, std::abs(chi2_cdf_4(x) - static_cast<double>(chi2_4_oracle(x))));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Chi2Cdf4, Examples) {
    EXPECT_EQ(chi2_cdf_4(0.0), 0.0);
    EXPECT_NEAR(chi2_cdf_4(9.488), 0.950005594422005, 1e-12);
    double prev = 0;
    for (double x = 0; x < 200; x += 0.5) {
        ASSERT_GE(chi2_cdf_4(x), prev);
        prev = chi2_cdf_4(x);
    }
    EXPECT_EQ(chi2_cdf_4(1e4), 1.0);
    EXPECT_THROW(chi2_cdf_4(-1.0), std::exception);
    EXPECT_NEAR(chi2_sf_4(9.488), 1 - 0.950005594422005, 1e-12);
}

TEST(Fisher, Examples) {
    EXPECT_EQ(fisher_combine(1.0, 1.0), 1.0);
    EXPECT_NEAR(fisher_combine(0.05, 0.05), 0.01747, 1e-4);
    EXPECT_NEAR(fisher_combine(0.05, 0.05), 0.017478661367769957, 1e-15);
    EXPECT_NEAR(fisher_combine(0.1, 1.0), 0.33025850929940457, 1e-15);
    // (p, 1) reduces to p (1 - ln p).
    for (double p : {0.5, 0.01, 1e-6}) EXPECT_NEAR(fisher_combine(p, 1.0), p * (1 - std::log(p)), 1e-15);
    EXPECT_EQ(fisher_combine(0.3, 0.7), fisher_combine(0.7, 0.3));
}

TEST(Fisher, ClampsUnderflow) {
    const double at_floor = fisher_combine(kMinP, 1.0);
    EXPECT_EQ(fisher_combine(0.0, 1.0), at_floor);
    EXPECT_EQ(fisher_combine(1e-300, 1.0), at_floor);
    EXPECT_GT(at_floor, 0.0);
    EXPECT_THROW(fisher_combine(std::numeric_limits<double>::quiet_NaN(), 0.5), std::exception);
}

TEST(FisherProperty, DominanceOnGrid) {
    for (int i = 1; i <= 200; ++i) {
        for (int j = 1; j <= 200; ++j) {
            const double a = i / 200.0, b = j / 200.0;
            const double p = fisher_combine(a, b);
            ASSERT_LE(p, 1.0);
            ASSERT_GT(p, 0.0);
            if (a <= 0.05 && b <= 0.05) ASSERT_LT(p, 0.05);
            // Agrees with the chi-square route.
            ASSERT_NEAR(p, 1.0 - chi2_cdf_4(-2 * (std::log(a) + std::log(b))), 1e-14);
        }
    }
}

TEST(GammaQ, MatchesPoissonSum) {
    double worst = 0;
    for (int T = 1; T <= 512; T += (T < 20 ? 1 : 17)) {
        for (double f : {0.0, 0.25, 0.5, 0.8, 0.95, 1.0, 1.05, 1.2, 1.5, 2.0, 3.0}) {
            const double x = f * T + (f == 0.0 ? 1e-3 : 0.0);
            worst = std::max(worst, std::abs(gamma_q(T, x) - static_cast<double>(gamma_q_oracle(T, x))));
        }
        for (int k = -4; k <= 4; ++k) {
            const double x = std::max(1e-3, T + k * std::sqrt(static_cast<double>(T)));
            worst = std::max(worst, std::abs(gamma_q(T, x) - static_cast<double>(gamma_q_oracle(T, x))));
        }
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(GammaQ, Examples) {
    EXPECT_NEAR(gamma_q(1, 3.0), std::exp(-3.0), 1e-15);
    EXPECT_NEAR(gamma_q(5, 7.0), 0.17299160788207135, 1e-14);
    EXPECT_EQ(gamma_q(3, 0.0), 1.0);
}

TEST(Median, Cases) {
    EXPECT_EQ(median({3, 1, 2}), 2.0);
    EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(median({1, inf, inf}), inf);
    EXPECT_EQ(median({1, 2, inf, inf}), inf);
    EXPECT_EQ(median({1, 5, 7, inf}), 6.0);
}
