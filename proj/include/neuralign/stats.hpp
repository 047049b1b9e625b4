#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace neuralign::stats {

/// Regularized incomplete beta I_x(a, b), continued fraction (Lentz), 1e-12 convergence.
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

/// One-sample two-sided t-test of mean(x) against mu0. Throws on n < 2 or zero SD.
TTestResult t_test_one_sample(std::span<const double> x, double mu0);

struct WilcoxonResult {
    double statistic = 0.0;  ///< min(W+, W-)
    double p = 1.0;          ///< two-sided
    std::size_t n_used = 0;
    std::size_t n_zero_dropped = 0;
    bool exact = true;
};

/// Cut-off: exact null distribution up to this many nonzero differences.
inline constexpr std::size_t kWilcoxonExactMaxN = 25;

/// Paired Wilcoxon signed-rank test on x - y. Zero differences are dropped
/// and counted; tied |d| receive average ranks.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

struct PValueSet {
    std::vector<double> raw;
    std::vector<double> adjusted;
    std::map<double, std::vector<bool>> rejected_at;

    /// Rejection mask at level q, derived from the adjusted p-values.
    std::vector<bool> reject(double q) const;
    std::size_t count_rejected(double q) const;
};

/// Benjamini-Hochberg step-up procedure at level q.
PValueSet fdr_bh(std::span<const double> p, double q);

struct CorrelationP {
    double p = 1.0;
    bool degenerate = false;  ///< |r| == 1, p reported as exactly 0
};

/// Two-sided p-value for a Pearson r from n samples (t-test with n-2 df).
CorrelationP pearson_p(double r, std::size_t n);

}  // namespace neuralign::stats
