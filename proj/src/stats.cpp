#include "neuralign/stats.hpp"

#include "neuralign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

namespace neuralign::stats {
namespace {

constexpr double kBetaEps = 1e-12;
constexpr double kTiny = 1e-300;
constexpr int kBetaMaxIter = 10000;

// Continued fraction for I_x(a,b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    double last_delta = 1.0;
    for (int m = 1; m <= kBetaMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        last_delta = std::abs(del - 1.0);
        if (last_delta < 1e-15) return h;
    }
    if (last_delta < kBetaEps) return h;
    throw NumericalError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw NumericalError("incomplete_beta: a, b must be positive");
    if (std::isnan(x)) throw NumericalError("incomplete_beta: x is NaN");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw NumericalError("student_t: df must be positive");
    if (std::isnan(t)) throw NumericalError("student_t: t is NaN");
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    // I_{df/(df+t^2)}(df/2, 1/2); for small t evaluate the complement directly.
    if (t2 < df) {
        return 1.0 - incomplete_beta(0.5, 0.5 * df, t2 / (df + t2));
    }
    return incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

double student_t_cdf(double t, double df) {
    const double tail = 0.5 * student_t_two_sided(t, df);
    return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult t_test_one_sample(std::span<const double> x, double mu0) {
    const std::size_t n = x.size();
    if (n < 2) throw DegenerateInputError("t_test_one_sample: need at least 2 samples");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 1e-14 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateInputError("t_test_one_sample: zero standard deviation");
    }
    TTestResult r;
    r.df = n - 1;
    r.t = (mean - mu0) / (sd / std::sqrt(static_cast<double>(n)));
    r.p = std::clamp(student_t_two_sided(r.t, static_cast<double>(r.df)), 0.0, 1.0);
    return r;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DegenerateInputError("wilcoxon_signed_rank: length mismatch");
    }
    std::vector<double> diffs;
    WilcoxonResult res;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (std::isnan(d)) throw NumericalError("wilcoxon_signed_rank: NaN difference");
        if (d == 0.0) {
            ++res.n_zero_dropped;
        } else {
            diffs.push_back(d);
        }
    }
    const std::size_t n = diffs.size();
    if (n == 0) throw DegenerateInputError("wilcoxon_signed_rank: all differences are zero");
    res.n_used = n;

    // Average ranks of |d|, kept doubled so ties stay integral.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(diffs[a]) < std::abs(diffs[b]);
    });
    std::vector<std::uint64_t> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
        // ranks i+1..j+1, doubled average = (i+1)+(j+1)
        const std::uint64_t avg2 = (i + 1) + (j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = avg2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    std::uint64_t plus2 = 0;
    std::uint64_t total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (diffs[i] > 0.0) plus2 += rank2[i];
    }
    const std::uint64_t minus2 = total2 - plus2;
    const std::uint64_t stat2 = std::min(plus2, minus2);
    res.statistic = static_cast<double>(stat2) / 2.0;

    if (n <= kWilcoxonExactMaxN) {
        // Number of sign patterns reaching each doubled positive-rank sum.
        std::vector<std::uint64_t> counts(total2 + 1, 0);
        counts[0] = 1;
        std::uint64_t reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t r = rank2[i];
            reach += r;
            for (std::uint64_t s = reach; s >= r; --s) {
                counts[s] += counts[s - r];
                if (s == r) break;
            }
        }
        std::uint64_t lower = 0;
        for (std::uint64_t s = 0; s <= stat2; ++s) lower += counts[s];
        const double total = std::ldexp(1.0, static_cast<int>(n));
        res.p = std::min(1.0, 2.0 * static_cast<double>(lower) / total);
        res.exact = true;
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) throw DegenerateInputError("wilcoxon_signed_rank: zero variance");
    const double z = std::min(0.0, (res.statistic - mean + 0.5) / std::sqrt(var));
    res.p = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    res.exact = false;
    return res;
}

namespace {

std::vector<std::size_t> ascending_order(std::span<const double> p) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    return order;
}

std::vector<bool> step_up(std::span<const double> p, double q) {
    const std::size_t m = p.size();
    const auto order = ascending_order(p);
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double threshold = static_cast<double>(i + 1) * q / static_cast<double>(m);
        if (p[order[i]] <= threshold) k = i + 1;
    }
    std::vector<bool> mask(m, false);
    for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
    return mask;
}

}  // namespace

std::vector<bool> PValueSet::reject(double q) const {
    return step_up(raw, q);
}

std::size_t PValueSet::count_rejected(double q) const {
    const auto mask = reject(q);
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

PValueSet fdr_bh(std::span<const double> p, double q) {
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw NumericalError("fdr_bh: p-value outside [0,1]: " + std::to_string(v));
        }
    }
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("fdr_bh: q must lie in (0,1]");
    PValueSet out;
    out.raw.assign(p.begin(), p.end());
    const std::size_t m = p.size();
    out.adjusted.assign(m, 1.0);
    const auto order = ascending_order(p);
    double running = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double candidate = static_cast<double>(m) * p[order[i]] / static_cast<double>(i + 1);
        running = std::min(running, candidate);
        out.adjusted[order[i]] = std::min(1.0, std::max(running, p[order[i]]));
    }
    out.rejected_at.emplace(q, step_up(p, q));
    return out;
}

CorrelationP pearson_p(double r, std::size_t n) {
    if (n < 4) {
        throw DegenerateInputError("pearson_p: need at least 4 samples, got " + std::to_string(n));
    }
    if (std::isnan(r)) throw NumericalError("pearson_p: r is NaN");
    CorrelationP out;
    if (std::abs(r) >= 1.0) {
        out.p = 0.0;
        out.degenerate = true;
        return out;
    }
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    out.p = std::clamp(student_t_two_sided(t, df), 0.0, 1.0);
    return out;
}

}  // namespace neuralign::stats
