#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace neuralign {

/// Dense row-major double matrix. Rows are stimuli throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

namespace numeric {

enum class ScaleMode { center, zscore };

struct Standardized {
    Matrix values;
    Vector means;
    /// Sample SD per column (n-1 denominator) in zscore mode, 1 in center mode
    /// and for constant columns.
    Vector scales;
    std::vector<bool> constant_columns;
};

/// Column-wise centering or z-scoring. Needs at least two rows.
Standardized center_standardize(const Matrix& m, ScaleMode mode);

/// Applies stored means/scales to new rows (e.g. a test split).
Matrix apply_standardization(const Matrix& m, const Vector& means, const Vector& scales);

struct SvdFactors {
    Matrix u;   // n x r
    Vector s;   // r, descending
    Matrix vt;  // r x d
};

/// Thin SVD with r = min(rows, cols). Deterministic (one-sided Jacobi).
SvdFactors thin_svd(const Matrix& m);

Matrix reconstruct(const SvdFactors& f);

/// Pearson correlation. Throws UndefinedCorrelationError on constant input,
/// DegenerateInputError when lengths differ or are below 3.
double pearson(std::span<const double> x, std::span<const double> y);
double pearson(const Vector& x, const Vector& y);

bool all_finite(const Matrix& m);

/// Evaluates fn(i) for i in [0, count) on up to `threads` workers. Each index
/// must write only its own output slot; callers reduce afterwards in index
/// order so results do not depend on the thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace numeric
}  // namespace neuralign
