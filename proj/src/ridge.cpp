#include "neuralign/ridge.hpp"

#include "neuralign/errors.hpp"
#include "neuralign/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace neuralign::ridge {
namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

LambdaGrid LambdaGrid::default_grid() {
    return log_spaced(1.0, 1e8, 10);
}

LambdaGrid LambdaGrid::log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) {
        throw ConfigError("lambda grid: need 0 < lo <= hi and count >= 1");
    }
    LambdaGrid g;
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double e = count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
        g.values.push_back(std::pow(10.0, e));
    }
    return g;
}

void LambdaGrid::validate() const {
    if (values.empty()) throw ConfigError("lambda grid: empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
            throw ConfigError("lambda grid: values must be finite and >= 0");
        }
        if (i > 0 && !(values[i] > values[i - 1])) {
            throw ConfigError("lambda grid: values must be strictly ascending");
        }
    }
}

FoldPlan FoldPlan::make(std::size_t n_stimuli, std::size_t n_splits, std::uint64_t seed) {
    if (n_splits < 2) throw ConfigError("folds: need at least 2 splits");
    if (n_stimuli < n_splits) {
        throw ConfigError("folds: " + std::to_string(n_stimuli) + " stimuli cannot fill " +
                          std::to_string(n_splits) + " splits");
    }
    FoldPlan plan;
    plan.n_splits = n_splits;
    plan.seed = seed;
    std::vector<std::size_t> order(n_stimuli);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    plan.assignment.assign(n_stimuli, 0);
    const std::size_t base = n_stimuli / n_splits;
    const std::size_t extra = n_stimuli % n_splits;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < n_splits; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) plan.assignment[order[pos++]] = f;
    }
    return plan;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) idx.push_back(i);
    }
    return idx;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) idx.push_back(i);
    }
    return idx;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(n_splits, 0);
    for (auto f : assignment) ++sizes.at(f);
    return sizes;
}

FoldPlan FoldPlan::permuted(std::span<const std::size_t> perm) const {
    if (perm.size() != assignment.size()) throw ConfigError("fold plan: permutation size mismatch");
    FoldPlan out = *this;
    for (std::size_t i = 0; i < perm.size(); ++i) out.assignment.at(perm[i]) = assignment[i];
    return out;
}

RidgePath::RidgePath(const Matrix& x, const Matrix& y, const FitOptions& options)
    : options_(options) {
    if (x.rows() != y.rows()) {
        throw ConfigError("ridge: X has " + std::to_string(x.rows()) + " rows, Y has " +
                          std::to_string(y.rows()));
    }
    if (x.rows() == 0) throw DegenerateInputError("ridge: no training rows");
    if (!x.allFinite() || !y.allFinite()) throw NumericalError("ridge: non-finite training data");

    Matrix xp;
    if (options.center) {
        auto xs = numeric::center_standardize(x, options.x_scaling);
        auto ys = numeric::center_standardize(y, numeric::ScaleMode::center);
        xp = std::move(xs.values);
        x_means_ = std::move(xs.means);
        x_scales_ = std::move(xs.scales);
        y_centered_ = std::move(ys.values);
        y_means_ = std::move(ys.means);
        constant_targets_ = std::move(ys.constant_columns);
    } else {
        xp = x;
        x_means_ = Vector::Zero(x.cols());
        x_scales_ = Vector::Ones(x.cols());
        y_centered_ = y;
        y_means_ = Vector::Zero(y.cols());
        constant_targets_.assign(static_cast<std::size_t>(y.cols()), false);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            constant_targets_[static_cast<std::size_t>(j)] = y.col(j).isZero(0.0);
        }
    }
    svd_ = numeric::thin_svd(xp);
    const double smax = svd_.s.size() > 0 ? svd_.s(0) : 0.0;
    const double tol = static_cast<double>(std::max(xp.rows(), xp.cols())) *
                       std::numeric_limits<double>::epsilon() * smax;
    rank_ = 0;
    for (Eigen::Index j = 0; j < svd_.s.size(); ++j) {
        if (svd_.s(j) > tol) ++rank_;
    }
    uty_ = svd_.u.transpose() * y_centered_;
}

Vector RidgePath::shrinkage(double lambda) const {
    Vector g = Vector::Zero(svd_.s.size());
    for (Eigen::Index j = 0; j < rank_; ++j) {
        const double s = svd_.s(j);
        g(j) = s / (s * s + lambda);
    }
    return g;
}

Matrix RidgePath::weights(double lambda) const {
    if (!(lambda >= 0.0)) throw ConfigError("ridge: lambda must be >= 0");
    return svd_.vt.transpose() * (shrinkage(lambda).asDiagonal() * uty_);
}

Matrix RidgePath::weights(std::span<const double> lambdas) const {
    if (static_cast<Eigen::Index>(lambdas.size()) != uty_.cols()) {
        throw ConfigError("ridge: need one lambda per target");
    }
    Matrix w(svd_.vt.cols(), uty_.cols());
    for (Eigen::Index j = 0; j < uty_.cols(); ++j) {
        const double lambda = lambdas[static_cast<std::size_t>(j)];
        if (!(lambda >= 0.0)) throw ConfigError("ridge: lambda must be >= 0");
        w.col(j) = svd_.vt.transpose() * shrinkage(lambda).cwiseProduct(uty_.col(j));
    }
    return w;
}

RidgeFit RidgePath::fit(double lambda) const {
    RidgeFit f;
    f.weights = weights(lambda);
    f.lambdas = {lambda};
    f.x_means = x_means_;
    f.x_scales = x_scales_;
    f.y_means = y_means_;
    f.min_norm = lambda == 0.0 && rank_deficient();
    return f;
}

RidgeFit RidgePath::fit(std::span<const double> lambdas) const {
    RidgeFit f;
    f.weights = weights(lambdas);
    f.lambdas.assign(lambdas.begin(), lambdas.end());
    f.x_means = x_means_;
    f.x_scales = x_scales_;
    f.y_means = y_means_;
    f.min_norm = rank_deficient() &&
                 std::any_of(lambdas.begin(), lambdas.end(), [](double l) { return l == 0.0; });
    return f;
}

Matrix RidgePath::loo_residuals(double lambda) const {
    const Eigen::Index n = svd_.u.rows();
    Vector gain = shrinkage(lambda).cwiseProduct(svd_.s);  // s^2 / (s^2 + lambda)
    const Matrix fitted = svd_.u * (gain.asDiagonal() * uty_);
    Matrix resid = y_centered_ - fitted;
    const double base = options_.center ? 1.0 / static_cast<double>(n) : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double h = base;
        for (Eigen::Index j = 0; j < gain.size(); ++j) h += svd_.u(i, j) * svd_.u(i, j) * gain(j);
        const double denom = 1.0 - h;
        if (denom <= 1e-12) {
            resid.row(i).setConstant(std::numeric_limits<double>::infinity());
        } else {
            resid.row(i) /= denom;
        }
    }
    return resid;
}

Matrix RidgeFit::predict(const Matrix& x) const {
    if (x.cols() != weights.rows()) {
        throw ConfigError("ridge predict: X has " + std::to_string(x.cols()) +
                          " features, model expects " + std::to_string(weights.rows()));
    }
    Matrix out = numeric::apply_standardization(x, x_means, x_scales) * weights;
    out.rowwise() += y_means.transpose();
    return out;
}

RidgeFit fit_ridge(const Matrix& x, const Matrix& y, double lambda, const FitOptions& options) {
    return RidgePath(x, y, options).fit(lambda);
}

std::size_t best_grid_index(std::span<const double> scores) {
    if (scores.empty()) throw ConfigError("lambda selection: empty score list");
    auto clean = [](double s) { return std::isfinite(s) ? s : kNegInf; };
    std::size_t best = 0;
    double best_score = clean(scores[0]);
    for (std::size_t g = 1; g < scores.size(); ++g) {
        const double s = clean(scores[g]);
        bool take = false;
        if (best_score == kNegInf) {
            take = true;
        } else if (s != kNegInf) {
            const double tol = 1e-12 * std::max(std::abs(s), std::abs(best_score));
            take = s >= best_score - tol;
        }
        if (take) {
            best = g;
            best_score = std::max(best_score, s);
        }
    }
    return best;
}

namespace {

Selection finish_selection(const LambdaGrid& grid, Matrix target_scores, bool per_target) {
    Selection sel;
    const auto n_grid = static_cast<Eigen::Index>(grid.values.size());
    sel.grid_scores.resize(grid.values.size());
    for (Eigen::Index g = 0; g < n_grid; ++g) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < target_scores.cols(); ++j) sum += target_scores(g, j);
        sel.grid_scores[static_cast<std::size_t>(g)] = sum / static_cast<double>(target_scores.cols());
    }
    if (per_target) {
        std::vector<double> column(grid.values.size());
        for (Eigen::Index j = 0; j < target_scores.cols(); ++j) {
            for (Eigen::Index g = 0; g < n_grid; ++g) column[static_cast<std::size_t>(g)] = target_scores(g, j);
            sel.lambdas.push_back(grid.values[best_grid_index(column)]);
        }
    } else {
        sel.lambdas = {grid.values[best_grid_index(sel.grid_scores)]};
    }
    sel.target_scores = std::move(target_scores);
    return sel;
}

Selection select_gcv(const RidgePath& path, const LambdaGrid& grid, bool per_target) {
    const auto n = static_cast<double>(path.rows());
    Matrix scores(static_cast<Eigen::Index>(grid.values.size()), path.targets());
    for (std::size_t g = 0; g < grid.values.size(); ++g) {
        const Matrix e = path.loo_residuals(grid.values[g]);
        for (Eigen::Index j = 0; j < e.cols(); ++j) {
            scores(static_cast<Eigen::Index>(g), j) = -e.col(j).squaredNorm() / n;
        }
    }
    return finish_selection(grid, std::move(scores), per_target);
}

void require_some_variance(const std::vector<bool>& constant_targets) {
    if (std::all_of(constant_targets.begin(), constant_targets.end(), [](bool c) { return c; })) {
        throw DegenerateInputError("lambda selection: every target is constant on the training rows");
    }
}

}  // namespace

Selection select_lambda(const Matrix& x, const Matrix& y, const LambdaGrid& grid,
                        const SelectionConfig& config, const FitOptions& options) {
    grid.validate();
    if (y.cols() == 0) throw DegenerateInputError("lambda selection: no targets");
    if (config.mode == SelectionMode::gcv) {
        const RidgePath path(x, y, options);
        require_some_variance(path.constant_targets());
        return select_gcv(path, grid, config.per_target);
    }

    const auto n = static_cast<std::size_t>(x.rows());
    if (x.rows() != y.rows()) throw ConfigError("lambda selection: X/Y row mismatch");
    {
        std::vector<bool> constant(static_cast<std::size_t>(y.cols()));
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            constant[static_cast<std::size_t>(j)] = (y.col(j).array() == y(0, j)).all();
        }
        require_some_variance(constant);
    }
    const FoldPlan inner = FoldPlan::make(n, config.inner_folds, config.seed);
    Matrix sse = Matrix::Zero(static_cast<Eigen::Index>(grid.values.size()), y.cols());
    for (std::size_t f = 0; f < inner.n_splits; ++f) {
        const auto tr = inner.train_indices(f);
        const auto va = inner.test_indices(f);
        const Matrix xva = gather_rows(x, va);
        const Matrix yva = gather_rows(y, va);
        const RidgePath path(gather_rows(x, tr), gather_rows(y, tr), options);
        for (std::size_t g = 0; g < grid.values.size(); ++g) {
            const Matrix err = path.fit(grid.values[g]).predict(xva) - yva;
            sse.row(static_cast<Eigen::Index>(g)) += err.colwise().squaredNorm();
        }
    }
    Matrix scores = -sse / static_cast<double>(n);
    return finish_selection(grid, std::move(scores), config.per_target);
}

std::size_t EncodingResult::masked_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

double EncodingResult::mean_r() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < per_target_r.size(); ++j) {
        if (mask[static_cast<std::size_t>(j)]) continue;
        sum += per_target_r(j);
        ++count;
    }
    if (count == 0) throw DegenerateInputError("encoding: every target is masked");
    return sum / static_cast<double>(count);
}

EncodingResult encode(const Matrix& x, const Matrix& y, const FoldPlan& plan,
                      const EncodeOptions& options) {
    options.grid.validate();
    if (x.rows() != y.rows() || static_cast<std::size_t>(x.rows()) != plan.size()) {
        throw AlignmentError("encode: X has " + std::to_string(x.rows()) + " stimuli, Y has " +
                             std::to_string(y.rows()) + ", fold plan covers " +
                             std::to_string(plan.size()));
    }
    const Eigen::Index m = y.cols();
    const std::size_t k = plan.n_splits;
    const auto sizes = plan.fold_sizes();
    for (std::size_t f = 0; f < k; ++f) {
        if (sizes[f] < 3) {
            throw DegenerateInputError("encode: fold " + std::to_string(f) + " has " +
                                       std::to_string(sizes[f]) + " test stimuli (need >= 3)");
        }
    }

    EncodingResult res;
    res.n_splits = k;
    res.seed = plan.seed;
    res.per_fold_r = Matrix::Constant(static_cast<Eigen::Index>(k), m,
                                      std::numeric_limits<double>::quiet_NaN());
    res.lambda_per_fold.resize(k);
    if (options.keep_fits) res.fold_fits.resize(k);

    FitOptions fit_options;
    fit_options.center = true;
    fit_options.x_scaling = options.x_scaling;

    numeric::parallel_for(k, options.threads, [&](std::size_t f) {
        const auto tr = plan.train_indices(f);
        const auto te = plan.test_indices(f);
        const Matrix xtr = gather_rows(x, tr);
        const Matrix ytr = gather_rows(y, tr);
        const RidgePath path(xtr, ytr, fit_options);
        require_some_variance(path.constant_targets());

        std::vector<double> lambdas;
        if (options.selection.mode == SelectionMode::gcv) {
            lambdas = select_gcv(path, options.grid, options.selection.per_target).lambdas;
        } else {
            lambdas = select_lambda(xtr, ytr, options.grid, options.selection, fit_options).lambdas;
        }
        const RidgeFit fit = lambdas.size() == 1 ? path.fit(lambdas[0]) : path.fit(lambdas);
        const Matrix pred = fit.predict(gather_rows(x, te));
        const Matrix yte = gather_rows(y, te);
        for (Eigen::Index j = 0; j < m; ++j) {
            const Vector p = pred.col(j);
            const Vector o = yte.col(j);
            try {
                res.per_fold_r(static_cast<Eigen::Index>(f), j) = numeric::pearson(p, o);
            } catch (const UndefinedCorrelationError&) {
                // left NaN; the target is masked below
            }
        }
        res.lambda_per_fold[f] = std::move(lambdas);
        if (options.keep_fits) res.fold_fits[f] = fit;
    });

    res.per_target_r = Vector::Constant(m, std::numeric_limits<double>::quiet_NaN());
    res.mask.assign(static_cast<std::size_t>(m), false);
    for (Eigen::Index j = 0; j < m; ++j) {
        double sum = 0.0;
        bool defined = true;
        for (std::size_t f = 0; f < k; ++f) {
            const double r = res.per_fold_r(static_cast<Eigen::Index>(f), j);
            if (std::isnan(r)) {
                defined = false;
                break;
            }
            sum += r;
        }
        if (defined) {
            res.per_target_r(j) = sum / static_cast<double>(k);
        } else {
            res.mask[static_cast<std::size_t>(j)] = true;
        }
    }
    return res;
}

EncodingResult encode(const Matrix& x, std::span<const std::string> x_ids, const Matrix& y,
                      std::span<const std::string> y_ids, const FoldPlan& plan,
                      const EncodeOptions& options) {
    if (x_ids.size() != y_ids.size() || !std::equal(x_ids.begin(), x_ids.end(), y_ids.begin())) {
        std::ostringstream msg;
        msg << "encode: stimulus order differs between activations and responses";
        for (std::size_t i = 0; i < std::min(x_ids.size(), y_ids.size()); ++i) {
            if (x_ids[i] != y_ids[i]) {
                msg << " (first mismatch at row " << i << ": '" << x_ids[i] << "' vs '" << y_ids[i]
                    << "')";
                break;
            }
        }
        if (x_ids.size() != y_ids.size()) {
            msg << " (" << x_ids.size() << " vs " << y_ids.size() << " ids)";
        }
        throw AlignmentError(msg.str());
    }
    if (static_cast<Eigen::Index>(x_ids.size()) != x.rows() ||
        static_cast<Eigen::Index>(y_ids.size()) != y.rows()) {
        throw AlignmentError("encode: id list length does not match matrix rows");
    }
    return encode(x, y, plan, options);
}

}  // namespace neuralign::ridge
