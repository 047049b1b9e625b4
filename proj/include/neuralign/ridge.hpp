#pragma once

#include "neuralign/numeric.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace neuralign::ridge {

struct LambdaGrid {
    std::vector<double> values;  ///< ascending, all >= 0

    /// Ten values log-spaced over [1e0, 1e8]: exponents 0, 8/9, ..., 8.
    static LambdaGrid default_grid();
    static LambdaGrid log_spaced(double lo, double hi, std::size_t count);
    void validate() const;
};

/// Outer cross-validation split: a seeded shuffle cut into contiguous blocks.
struct FoldPlan {
    std::size_t n_splits = 5;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;  ///< stimulus index -> fold id

    static FoldPlan make(std::size_t n_stimuli, std::size_t n_splits, std::uint64_t seed);

    std::size_t size() const { return assignment.size(); }
    std::vector<std::size_t> train_indices(std::size_t fold) const;
    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> fold_sizes() const;

    /// The same plan after stimulus i moved to position perm[i].
    FoldPlan permuted(std::span<const std::size_t> perm) const;
};

enum class SelectionMode { gcv, kfold };

struct SelectionConfig {
    SelectionMode mode = SelectionMode::gcv;
    std::size_t inner_folds = 5;  ///< kfold only
    std::uint64_t seed = 0;       ///< kfold only
    bool per_target = false;
};

struct FitOptions {
    /// Fit an unpenalized intercept by centering X and Y on the training rows.
    bool center = true;
    /// Column scaling of X when centering (Y is only ever centered).
    numeric::ScaleMode x_scaling = numeric::ScaleMode::center;
};

struct RidgeFit {
    Matrix weights;               ///< d x m
    std::vector<double> lambdas;  ///< one shared value, or one per target
    Vector x_means;
    Vector x_scales;
    Vector y_means;
    bool min_norm = false;  ///< lambda = 0 on a rank-deficient X

    Matrix predict(const Matrix& x) const;
};

/// Ridge solutions for many lambdas from a single SVD of the preprocessed X.
class RidgePath {
public:
    RidgePath(const Matrix& x, const Matrix& y, const FitOptions& options = {});

    Matrix weights(double lambda) const;
    /// Column j solved with lambdas[j].
    Matrix weights(std::span<const double> lambdas) const;
    RidgeFit fit(double lambda) const;
    RidgeFit fit(std::span<const double> lambdas) const;

    /// Exact leave-one-out residuals (n x m) for one lambda.
    Matrix loo_residuals(double lambda) const;

    bool rank_deficient() const { return rank_ < svd_.s.size(); }
    const FitOptions& options() const { return options_; }
    Eigen::Index rows() const { return svd_.u.rows(); }
    Eigen::Index targets() const { return uty_.cols(); }
    const std::vector<bool>& constant_targets() const { return constant_targets_; }

private:
    Vector shrinkage(double lambda) const;  ///< s / (s^2 + lambda)

    FitOptions options_;
    numeric::SvdFactors svd_;
    Matrix uty_;  ///< U^T Y, r x m
    Matrix y_centered_;
    Vector x_means_;
    Vector x_scales_;
    Vector y_means_;
    Eigen::Index rank_ = 0;
    std::vector<bool> constant_targets_;
};

/// Minimizes ||Y - XW||^2 + lambda ||W||^2 (on centered data when options.center).
RidgeFit fit_ridge(const Matrix& x, const Matrix& y, double lambda, const FitOptions& options = {});

struct Selection {
    /// One value (shared) or one per target.
    std::vector<double> lambdas;
    /// Validation score per grid value, averaged over targets (negative MSE).
    std::vector<double> grid_scores;
    /// Per grid value and target (grid x m).
    Matrix target_scores;
};

/// Index of the best score; near-ties (1e-12 relative) go to the larger lambda.
std::size_t best_grid_index(std::span<const double> scores);

Selection select_lambda(const Matrix& x, const Matrix& y, const LambdaGrid& grid,
                        const SelectionConfig& config, const FitOptions& options = {});

struct EncodeOptions {
    LambdaGrid grid = LambdaGrid::default_grid();
    SelectionConfig selection;
    numeric::ScaleMode x_scaling = numeric::ScaleMode::center;
    int threads = 1;
    /// Keep each outer fold's fitted model in EncodingResult::fold_fits.
    bool keep_fits = false;
};

struct EncodingResult {
    Vector per_target_r;  ///< mean of per_fold_r over folds, NaN where masked
    Matrix per_fold_r;    ///< n_splits x m, NaN where undefined
    std::vector<std::vector<double>> lambda_per_fold;
    std::vector<bool> mask;  ///< true when the target is excluded
    std::size_t n_splits = 0;
    std::uint64_t seed = 0;
    std::vector<RidgeFit> fold_fits;  ///< only with EncodeOptions::keep_fits

    std::size_t masked_count() const;
    /// Mean of per_target_r over unmasked targets.
    double mean_r() const;
};

EncodingResult encode(const Matrix& x, const Matrix& y, const FoldPlan& plan,
                      const EncodeOptions& options);

/// Same, after verifying that both matrices carry the same ordered stimuli.
EncodingResult encode(const Matrix& x, std::span<const std::string> x_ids, const Matrix& y,
                      std::span<const std::string> y_ids, const FoldPlan& plan,
                      const EncodeOptions& options);

}  // namespace neuralign::ridge
