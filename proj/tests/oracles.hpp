// Independent reference computations used only by tests. Nothing here calls
// into the library's numeric paths; FoldPlan is used only to name the splits.
#pragma once

#include "neuralign/numeric.hpp"
#include "neuralign/random.hpp"
#include "neuralign/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using neuralign::Matrix;

inline Matrix random_matrix(neuralign::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

/// Plain loops, no Eigen kernels.
inline std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()),
                                         std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

/// Solves A X = B by Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::vector<double>> gauss_jordan(std::vector<std::vector<double>> a,
                                                     std::vector<std::vector<double>> b) {
    const std::size_t n = a.size();
    const std::size_t m = b.empty() ? 0 : b[0].size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0) throw std::runtime_error("singular system");
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        const double inv = 1.0 / a[c][c];
        for (std::size_t k = 0; k < n; ++k) a[c][k] *= inv;
        for (std::size_t k = 0; k < m; ++k) b[c][k] *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < n; ++k) a[r][k] -= f * a[c][k];
            for (std::size_t k = 0; k < m; ++k) b[r][k] -= f * b[c][k];
        }
    }
    return b;
}

/// Ridge weights from the normal equations (X^T X + lambda I)^{-1} X^T Y,
/// optionally on column-centered data.
inline Matrix normal_equation_ridge(const Matrix& xin, const Matrix& yin, double lambda, bool center) {
    auto x = to_rows(xin);
    auto y = to_rows(yin);
    const std::size_t n = x.size(), d = xin.cols(), m = yin.cols();
    if (center) {
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += x[i][j];
            s /= n;
            for (std::size_t i = 0; i < n; ++i) x[i][j] -= s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += y[i][j];
            s /= n;
            for (std::size_t i = 0; i < n; ++i) y[i][j] -= s;
        }
    }
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> b(d, std::vector<double>(m, 0.0));
    for (std::size_t p = 0; p < d; ++p) {
        for (std::size_t q = 0; q < d; ++q) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += x[i][p] * x[i][q];
            a[p][q] = s + (p == q ? lambda : 0.0);
        }
        for (std::size_t q = 0; q < m; ++q) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += x[i][p] * y[i][q];
            b[p][q] = s;
        }
    }
    const auto w = gauss_jordan(a, b);
    Matrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < m; ++q) out(p, q) = w[p][q];
    return out;
}

/// Predictions of a centered normal-equation ridge fit on new rows.
inline Matrix normal_equation_predict(const Matrix& xtr, const Matrix& ytr, double lambda,
                                      const Matrix& xte) {
    const Matrix w = normal_equation_ridge(xtr, ytr, lambda, true);
    Matrix out(xte.rows(), ytr.cols());
    for (Eigen::Index i = 0; i < xte.rows(); ++i) {
        for (Eigen::Index q = 0; q < ytr.cols(); ++q) {
            double ym = 0;
            for (Eigen::Index r = 0; r < ytr.rows(); ++r) ym += ytr(r, q);
            ym /= static_cast<double>(ytr.rows());
            double s = ym;
            for (Eigen::Index p = 0; p < xtr.cols(); ++p) {
                double xm = 0;
                for (Eigen::Index r = 0; r < xtr.rows(); ++r) xm += xtr(r, p);
                xm /= static_cast<double>(xtr.rows());
                s += (xte(i, p) - xm) * w(p, q);
            }
            out(i, q) = s;
        }
    }
    return out;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

/// Student-t CDF by composite Simpson quadrature of the density over [0, |t|].
inline double t_cdf_quadrature(double t, double df, int intervals = 20000) {
    const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                        0.5 * std::log(df * std::numbers::pi);
    auto f = [&](double x) { return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df)); };
    const double b = std::abs(t);
    const double h = b / intervals;
    double s = f(0) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
    const double half_mass = s * h / 3;
    return t >= 0 ? 0.5 + half_mass : 0.5 - half_mass;
}

/// Two-sided exact Wilcoxon p by walking all 2^n sign patterns of the ranks.
inline double wilcoxon_enumeration_p(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) d.push_back(x[i] - y[i]);
    const std::size_t n = d.size();
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(d[j]) < std::abs(d[i])) ++less;
            else if (std::abs(d[j]) == std::abs(d[i])) ++equal;
        }
        ranks[i] = less + (equal + 1) / 2;
    }
    double wplus = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += ranks[i];
        if (d[i] > 0) wplus += ranks[i];
    }
    const double stat = std::min(wplus, total - wplus);
    std::uint64_t hits = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) s += ranks[i];
        if (s <= stat + 1e-9) ++hits;
    }
    return std::min(1.0, 2.0 * static_cast<double>(hits) / static_cast<double>(patterns));
}

inline Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
    return out;
}

// Brute force: refit every lambda on every inner split with the normal equations.
inline std::size_t brute_force_choice(const Matrix& x, const Matrix& y,
                                      const neuralign::ridge::LambdaGrid& grid,
                                      const neuralign::ridge::SelectionConfig& cfg,
                                      std::vector<double>* scores_out) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::vector<std::size_t>> train, valid;
    if (cfg.mode == neuralign::ridge::SelectionMode::gcv) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> tr;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) tr.push_back(j);
            train.push_back(tr);
            valid.push_back({i});
        }
    } else {
        const auto plan = neuralign::ridge::FoldPlan::make(n, cfg.inner_folds, cfg.seed);
        for (std::size_t f = 0; f < plan.n_splits; ++f) {
            train.push_back(plan.train_indices(f));
            valid.push_back(plan.test_indices(f));
        }
    }
    std::vector<double> scores;
    for (double lambda : grid.values) {
        double sse = 0;
        for (std::size_t s = 0; s < train.size(); ++s) {
            const Matrix pred = normal_equation_predict(rows_of(x, train[s]), rows_of(y, train[s]), lambda,
                                                        rows_of(x, valid[s]));
            sse += (pred - rows_of(y, valid[s])).squaredNorm();
        }
        scores.push_back(-sse / static_cast<double>(n * y.cols()));
    }
    if (scores_out) *scores_out = scores;
    // Exhaustive argmax, ties to the larger lambda.
    std::size_t best = 0;
    for (std::size_t g = 1; g < scores.size(); ++g) {
        if (scores[g] >= scores[best] - 1e-12 * std::abs(scores[best])) best = g;
    }
    return best;
}

}  // namespace oracle
