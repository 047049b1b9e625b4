#include "neuralign/numeric.hpp"

#include "neuralign/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

namespace neuralign::numeric {

Standardized center_standardize(const Matrix& m, ScaleMode mode) {
    const auto n = m.rows();
    if (n < 2) {
        throw DegenerateInputError("center_standardize: need at least 2 rows, got " +
                                   std::to_string(n));
    }
    Standardized out;
    out.means = m.colwise().mean().transpose();
    out.values = m.rowwise() - out.means.transpose();
    out.scales = Vector::Ones(m.cols());
    out.constant_columns.assign(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double ss = out.values.col(j).squaredNorm();
        // Constant up to rounding of the mean.
        const double tol = 1e-13 * std::abs(out.means(j));
        if (ss <= static_cast<double>(n) * tol * tol || !(ss > 1e-300)) {
            out.constant_columns[static_cast<std::size_t>(j)] = true;
            continue;
        }
        if (mode == ScaleMode::zscore) {
            const double sd = std::sqrt(ss / static_cast<double>(n - 1));
            out.scales(j) = sd;
            out.values.col(j) /= sd;
        }
    }
    return out;
}

Matrix apply_standardization(const Matrix& m, const Vector& means, const Vector& scales) {
    Matrix out = m.rowwise() - means.transpose();
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) /= scales(j);
    return out;
}

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

SvdFactors thin_svd(const Matrix& m) {
    if (!all_finite(m)) throw NumericalError("thin_svd: non-finite input");
    SvdFactors f;
    if (m.size() == 0) {
        f.u = Matrix(m.rows(), 0);
        f.s = Vector(0);
        f.vt = Matrix(0, m.cols());
        return f;
    }
    // Column-major copy; JacobiSVD's QR preconditioner picks the cheaper side.
    const Eigen::MatrixXd a = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    f.u = svd.matrixU();
    f.s = svd.singularValues();
    f.vt = svd.matrixV().transpose();
    return f;
}

Matrix reconstruct(const SvdFactors& f) {
    return f.u * f.s.asDiagonal() * f.vt;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DegenerateInputError("pearson: length mismatch (" + std::to_string(x.size()) +
                                   " vs " + std::to_string(y.size()) + ")");
    }
    const std::size_t n = x.size();
    if (n < 3) throw DegenerateInputError("pearson: need at least 3 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!std::isfinite(sxy) || !std::isfinite(sxx) || !std::isfinite(syy)) {
        throw NumericalError("pearson: non-finite input");
    }
    // Relative floor: a column that is constant up to rounding of its mean.
    const double floor_x = 1e-28 * std::max(1.0, mx * mx) * static_cast<double>(n);
    const double floor_y = 1e-28 * std::max(1.0, my * my) * static_cast<double>(n);
    if (sxx <= floor_x || syy <= floor_y) {
        throw UndefinedCorrelationError("pearson: constant input, correlation undefined");
    }
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

double pearson(const Vector& x, const Vector& y) {
    return pearson(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                   std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers =
        static_cast<std::size_t>(std::clamp<long long>(threads, 1, static_cast<long long>(count)));
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    // Lowest index wins so the reported failure is thread-count independent.
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace neuralign::numeric
