#include "neuralign/errors.hpp"
#include "neuralign/stats.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace stats = neuralign::stats;
using neuralign::Rng;

TEST(TTest, SymmetricSampleHasZeroStatistic) {
    const std::vector<double> x{1, -1, 1, -1};
    const auto r = stats::t_test_one_sample(x, 0.0);
    EXPECT_EQ(r.t, 0.0);
    EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(TTest, ZeroSdThrows) {
    const std::vector<double> x{1, 1, 1, 1};
    EXPECT_THROW(stats::t_test_one_sample(x, 0.0), neuralign::DegenerateInputError);
}

TEST(TTest, ThreeSampleMatchesQuadrature) {
    const std::vector<double> x{2, 4, 6};
    const auto r = stats::t_test_one_sample(x, 0.0);
    EXPECT_NEAR(r.t, 4.0 / (2.0 / std::sqrt(3.0)), 1e-12);
    EXPECT_NEAR(r.t, 3.4641, 1e-4);
    EXPECT_EQ(r.df, 2u);
    const double oracle_p = 2.0 * (1.0 - oracle::t_cdf_quadrature(r.t, 2.0));
    EXPECT_NEAR(r.p, oracle_p, 1e-6);
}

TEST(StudentT, CdfMatchesQuadratureAcrossDf) {
    const std::vector<double> ts{-9.0, -2.5, -0.3, 0.0, 0.7, 1.96, 4.2, 15.0};
    for (int df = 1; df <= 100; df += 3) {
        for (double t : ts) {
            EXPECT_NEAR(stats::student_t_cdf(t, df), oracle::t_cdf_quadrature(t, df), 1e-8)
                << "df=" << df << " t=" << t;
        }
    }
}

TEST(StudentT, ExtremeTailStaysPositive) {
    const double p = stats::student_t_two_sided(40.0, 100.0);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1e-12);
}

TEST(Wilcoxon, AllPositiveFiveExact) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y(5, 0.0);
    const auto r = stats::wilcoxon_signed_rank(x, y);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_DOUBLE_EQ(r.p, 2.0 / 32.0);
    EXPECT_TRUE(r.exact);
}

TEST(Wilcoxon, IdenticalSamplesThrow) {
    const std::vector<double> x{1, 2, 3};
    EXPECT_THROW(stats::wilcoxon_signed_rank(x, x), neuralign::DegenerateInputError);
}

TEST(Wilcoxon, FourSubjectFloor) {
    // With n = 4 the smallest attainable two-sided p is 2/16.
    const std::vector<double> x{0.3, 0.5, 0.2, 0.9}, y(4, 0.0);
    const auto r = stats::wilcoxon_signed_rank(x, y);
    EXPECT_DOUBLE_EQ(r.p, 0.125);
    EXPECT_DOUBLE_EQ(oracle::wilcoxon_enumeration_p(x, y), 0.125);
}

TEST(Wilcoxon, ZeroDifferencesDroppedAndCounted) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6}, y{0, 2, 0, 0, 0, 0};
    const auto r = stats::wilcoxon_signed_rank(x, y);
    EXPECT_EQ(r.n_zero_dropped, 1u);
    EXPECT_EQ(r.n_used, 5u);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = std::round(rng.normal() * 3) / 2;  // coarse grid -> ties and zeros
            y[i] = std::round(rng.normal() * 3) / 2;
        }
        if (x == y) continue;
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) any |= x[i] != y[i];
        if (!any) continue;
        EXPECT_DOUBLE_EQ(stats::wilcoxon_signed_rank(x, y).p, oracle::wilcoxon_enumeration_p(x, y));
    }
}

TEST(Wilcoxon, LargeSampleUsesNormalApproximation) {
    // Reference values frozen from scipy.stats.wilcoxon(x, method="approx", correction=True).
    const std::vector<double> x{-0.302, -0.824, 0.252,  0.92,   1.636, 0.61,   -0.053, -0.285,
                                1.249,  2.135,  0.773,  -0.733, -0.458, 2.1,   0.703,  -1.232,
                                0.416,  -0.663, -0.129, 0.012,  -0.213, 1.053, 0.437,  -0.089,
                                0.91,   1.33,   -1.143, 0.243,  -0.481, 0.327, -0.789, 0.521,
                                0.462,  0.196,  -0.548, 0.104,  -0.591, -0.855, 0.725, -0.609};
    const std::vector<double> y(x.size(), 0.0);
    const auto r = stats::wilcoxon_signed_rank(x, y);
    EXPECT_FALSE(r.exact);
    EXPECT_EQ(r.statistic, 335.0);
    EXPECT_NEAR(r.p, 0.3166447486698757, 1e-12);
}

TEST(FdrBh, HandComputedStepUp) {
    const std::vector<double> p{0.01, 0.02, 0.03, 0.04};
    const auto set = stats::fdr_bh(p, 0.05);
    const auto mask = set.rejected_at.at(0.05);
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 4);
    for (double a : set.adjusted) EXPECT_NEAR(a, 0.04, 1e-15);
}

TEST(FdrBh, AllOnes) {
    const std::vector<double> p(6, 1.0);
    const auto set = stats::fdr_bh(p, 0.05);
    EXPECT_EQ(set.count_rejected(0.05), 0u);
    for (double a : set.adjusted) EXPECT_EQ(a, 1.0);
}

TEST(FdrBh, SingleTestReducesToRawThreshold) {
    const std::vector<double> p{0.009};
    EXPECT_TRUE(stats::fdr_bh(p, 0.01).rejected_at.at(0.01)[0]);
}

TEST(FdrBh, StepUpRejectsBeyondFirstFailure) {
    // 0.04 > 2*0.05/4 but 0.05 <= 4*0.05/4 rescues everything below it.
    const std::vector<double> p{0.001, 0.04, 0.045, 0.05};
    EXPECT_EQ(stats::fdr_bh(p, 0.05).count_rejected(0.05), 4u);
}

TEST(FdrBh, RangeCheck) {
    const std::vector<double> p{0.2, 1.5};
    EXPECT_THROW(stats::fdr_bh(p, 0.05), neuralign::NumericalError);
}

TEST(FdrBh, RandomProperties) {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> p(1 + rng.below(40));
        for (auto& v : p) v = std::pow(rng.uniform(), 3);
        const auto set = stats::fdr_bh(p, 0.05);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_GE(set.adjusted[i], p[i]);
            EXPECT_LE(set.adjusted[i], 1.0);
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (p[i] < p[j]) EXPECT_LE(set.adjusted[i], set.adjusted[j]);
            }
            // Adjusted-p thresholding agrees with the step-up rule.
            EXPECT_EQ(set.adjusted[i] <= 0.05, set.rejected_at.at(0.05)[i]);
        }
        const auto small = set.reject(0.01);
        const auto large = set.reject(0.1);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (small[i]) EXPECT_TRUE(large[i]);
        }
    }
}

TEST(PearsonP, ZeroCorrelation) {
    EXPECT_DOUBLE_EQ(stats::pearson_p(0.0, 10).p, 1.0);
}

TEST(PearsonP, MatchesQuadrature) {
    const double r = 0.8;
    const double t = r * std::sqrt(28.0 / (1 - r * r));
    const double oracle_p = 2.0 * (1.0 - oracle::t_cdf_quadrature(t, 28.0));
    EXPECT_NEAR(stats::pearson_p(r, 30).p, oracle_p, 1e-6);
}

TEST(PearsonP, MonotoneTowardOne) {
    double prev = 1.0;
    for (double r : {0.1, 0.5, 0.9, 0.99, 0.999, 0.99999}) {
        const double p = stats::pearson_p(r, 20).p;
        EXPECT_LT(p, prev);
        prev = p;
    }
    const auto degenerate = stats::pearson_p(1.0, 20);
    EXPECT_EQ(degenerate.p, 0.0);
    EXPECT_TRUE(degenerate.degenerate);
    EXPECT_THROW(stats::pearson_p(0.5, 3), neuralign::DegenerateInputError);
}
