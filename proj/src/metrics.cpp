#include "neuralign/metrics.hpp"

#include "neuralign/errors.hpp"
#include "neuralign/geometry.hpp"
#include "neuralign/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace neuralign::metrics {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Strictly-greater argmax over finite entries: ties keep the shallower layer.
int argmax_layer(const Matrix& scores, Eigen::Index column) {
    int best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < scores.rows(); ++l) {
        const double v = scores(l, column);
        if (std::isnan(v)) continue;
        if (best < 0 || v > best_value) {
            best = static_cast<int>(l);
            best_value = v;
        }
    }
    return best;
}

void check_depths(std::span<const double> depths, Eigen::Index layers) {
    if (static_cast<Eigen::Index>(depths.size()) != layers) {
        throw ConfigError("layer depths: " + std::to_string(depths.size()) + " depths for " +
                          std::to_string(layers) + " layers");
    }
}

}  // namespace

void LayerActivations::validate() const {
    if (layers.empty()) throw ConfigError("layer activations: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const double d = layers[i].depth;
        if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("layer activations: depth outside [0,1]");
        if (i > 0 && !(d > layers[i - 1].depth)) {
            throw ConfigError("layer activations: depths must be strictly increasing");
        }
        if (layers[i].activations.rows() != layers[0].activations.rows()) {
            throw ConfigError("layer activations: layers disagree on stimulus count");
        }
    }
    if (layers.size() > 1 && (layers.front().depth != 0.0 || layers.back().depth != 1.0)) {
        throw ConfigError("layer activations: first depth must be 0 and last depth 1");
    }
}

std::size_t LayerActivations::stimuli() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().activations.rows());
}

std::vector<double> LayerActivations::depths() const {
    std::vector<double> d;
    for (const auto& l : layers) d.push_back(l.depth);
    return d;
}

std::vector<ridge::EncodingResult> encode_layers(const LayerActivations& model, const Matrix& y,
                                                 const ridge::FoldPlan& plan, const ridge::EncodeOptions& options) {
    model.validate();
    std::vector<ridge::EncodingResult> out;
    out.reserve(model.layers.size());
    for (const auto& layer : model.layers) out.push_back(ridge::encode(layer.activations, y, plan, options));
    return out;
}

std::vector<std::size_t> subsample_layer_indices(std::size_t available, std::size_t requested) {
    if (available == 0 || requested == 0) throw ConfigError("layer subsampling: empty request");
    if (requested >= available) {
        std::vector<std::size_t> all(available);
        for (std::size_t i = 0; i < available; ++i) all[i] = i;
        return all;
    }
    if (requested == 1) return {available - 1};
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < requested; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(available - 1) /
                           static_cast<double>(requested - 1);
        idx.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    return idx;
}

LayerActivations subsample_layers(const LayerActivations& all, std::size_t requested) {
    LayerActivations out;
    out.model_tag = all.model_tag;
    out.checkpoint_step = all.checkpoint_step;
    for (auto i : subsample_layer_indices(all.layers.size(), requested)) out.layers.push_back(all.layers[i]);
    return out;
}

Eigen::Vector3d VoxelGeometry::v1() const {
    if (v1_reference) return *v1_reference;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    for (std::size_t i = 0; i < roi_labels.size(); ++i) {
        if (roi_labels[i] == "V1") {
            sum += coordinates.row(static_cast<Eigen::Index>(i)).transpose();
            ++count;
        }
    }
    if (count == 0) {
        throw ConfigError("geometry: no v1_reference and no targets labelled V1");
    }
    return sum / static_cast<double>(count);
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y) {
    CorrelationResult out;
    out.n = x.size();
    out.r = numeric::pearson(x, y);
    if (out.n >= 4) {
        const auto p = stats::pearson_p(out.r, out.n);
        out.p = p.p;
        out.p_degenerate = p.degenerate;
    }
    return out;
}

std::vector<double> normalize_scores(std::span<const double> scores) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : scores) {
        if (!std::isnan(v)) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) {
        throw DegenerateInputError("normalize_scores: maximum score must be positive");
    }
    std::vector<double> out;
    out.reserve(scores.size());
    for (double v : scores) out.push_back(std::isnan(v) ? kNaN : v / peak);
    return out;
}

Matrix layer_score_matrix(std::span<const ridge::EncodingResult> per_layer) {
    if (per_layer.empty()) throw ConfigError("layer scores: no layers");
    const Eigen::Index m = per_layer.front().per_target_r.size();
    Matrix out(static_cast<Eigen::Index>(per_layer.size()), m);
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
        if (per_layer[l].per_target_r.size() != m) {
            throw ConfigError("layer scores: layers disagree on target count");
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            out(static_cast<Eigen::Index>(l), j) =
                per_layer[l].mask[static_cast<std::size_t>(j)] ? kNaN : per_layer[l].per_target_r(j);
        }
    }
    return out;
}

BestLayerMap best_layer_map(const Matrix& layer_scores, std::span<const double> depths,
                            const std::vector<bool>& keep) {
    if (layer_scores.rows() < 2) throw DegenerateInputError("best_layer_map: need at least 2 layers");
    check_depths(depths, layer_scores.rows());
    const Eigen::Index m = layer_scores.cols();
    if (!keep.empty() && static_cast<Eigen::Index>(keep.size()) != m) {
        throw ConfigError("best_layer_map: significance mask length differs from target count");
    }
    BestLayerMap out;
    out.k_star.assign(static_cast<std::size_t>(m), kNaN);
    out.layer_index.assign(static_cast<std::size_t>(m), -1);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const int best = (keep.empty() || keep[ju]) ? argmax_layer(layer_scores, j) : -1;
        if (best < 0) {
            out.excluded.push_back(ju);
            continue;
        }
        out.layer_index[ju] = best;
        out.k_star[ju] = depths[static_cast<std::size_t>(best)];
    }
    return out;
}

BestLayerMap best_layer_map(std::span<const ridge::EncodingResult> per_layer,
                            std::span<const double> depths, const std::vector<bool>& keep) {
    return best_layer_map(layer_score_matrix(per_layer), depths, keep);
}

SpatialScore spatial_score(const Matrix& layer_scores, std::span<const double> depths,
                           const VoxelGeometry& geometry, Level level, std::span<const RoiGroup> rois,
                           const std::vector<bool>& keep, const std::vector<bool>& roi_keep) {
    check_depths(depths, layer_scores.rows());
    if (geometry.coordinates.rows() != layer_scores.cols() || geometry.coordinates.cols() != 3) {
        throw ConfigError("spatial_score: geometry must hold one 3-D coordinate per target");
    }
    const Eigen::Vector3d v1 = geometry.v1();
    SpatialScore out;
    out.level = level;
    std::vector<double> distance, k_star;

    if (level == Level::voxel) {
        const auto best = best_layer_map(layer_scores, depths, keep);
        const auto dist = data::distance_from_v1(geometry.coordinates, v1);
        for (std::size_t j = 0; j < best.k_star.size(); ++j) {
            if (best.layer_index[j] < 0) {
                out.excluded.push_back(std::to_string(j));
                continue;
            }
            out.points.push_back({std::to_string(j), dist[j], best.k_star[j]});
        }
    } else {
        if (rois.empty()) throw ConfigError("spatial_score: ROI level needs an ROI table");
        if (!roi_keep.empty() && roi_keep.size() != rois.size()) {
            throw ConfigError("spatial_score: ROI mask length differs from ROI count");
        }
        for (std::size_t r = 0; r < rois.size(); ++r) {
            const auto& roi = rois[r];
            if (!roi_keep.empty() && !roi_keep[r]) {
                out.excluded.push_back(roi.name);
                continue;
            }
            Matrix curve(layer_scores.rows(), 1);
            bool defined = true;
            for (Eigen::Index l = 0; l < layer_scores.rows(); ++l) {
                double sum = 0.0;
                std::size_t count = 0;
                for (auto t : roi.targets) {
                    if (static_cast<Eigen::Index>(t) >= layer_scores.cols()) {
                        throw ConfigError("spatial_score: ROI " + roi.name + " references target " +
                                          std::to_string(t) + " out of range");
                    }
                    if (!keep.empty() && !keep[t]) continue;
                    const double v = layer_scores(l, static_cast<Eigen::Index>(t));
                    if (std::isnan(v)) continue;
                    sum += v;
                    ++count;
                }
                if (count == 0) {
                    defined = false;
                    break;
                }
                curve(l, 0) = sum / static_cast<double>(count);
            }
            if (!defined) {
                out.excluded.push_back(roi.name);
                continue;
            }
            const int best = argmax_layer(curve, 0);
            const double d = (roi.centroid - v1).norm();
            out.points.push_back({roi.name, d, depths[static_cast<std::size_t>(best)]});
        }
    }
    for (const auto& p : out.points) {
        distance.push_back(p.distance);
        k_star.push_back(p.k_star);
    }
    if (out.points.size() < 3) {
        throw UndefinedCorrelationError("spatial_score: correlation undefined with " + std::to_string(out.points.size()) +
                                        " surviving " + (level == Level::voxel ? "targets" : "ROIs") +
                                        ", need at least 3");
    }
    out.correlation = correlate(distance, k_star);
    return out;
}

double t_max(std::span<const double> times, std::span<const double> curve, double fraction) {
    if (curve.empty()) throw DegenerateInputError("t_max: empty curve");
    if (times.size() != curve.size()) throw ConfigError("t_max: times and curve differ in length");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("t_max: fraction must lie in (0,1]");
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : curve) {
        if (!std::isnan(v)) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) throw DegenerateInputError("t_max: curve has no positive maximum");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (std::isnan(curve[i])) continue;
        if (curve[i] / peak >= fraction) {
            sum += times[i];
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

TemporalProfile temporal_profile(const Matrix& layer_scores, std::span<const double> depths,
                                 std::size_t channels, std::span<const double> times, double fraction) {
    check_depths(depths, layer_scores.rows());
    const std::size_t n_times = times.size();
    if (channels == 0 || n_times == 0 ||
        static_cast<std::size_t>(layer_scores.cols()) != channels * n_times) {
        throw ConfigError("temporal_profile: scores do not form a channel x time grid");
    }
    TemporalProfile out;
    out.times.assign(times.begin(), times.end());
    out.depths.assign(depths.begin(), depths.end());
    out.fraction = fraction;
    out.curves = Matrix::Constant(layer_scores.rows(), static_cast<Eigen::Index>(n_times), kNaN);
    for (Eigen::Index l = 0; l < layer_scores.rows(); ++l) {
        for (std::size_t t = 0; t < n_times; ++t) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = layer_scores(l, static_cast<Eigen::Index>(c * n_times + t));
                if (std::isnan(v)) continue;
                sum += v;
                ++count;
            }
            if (count > 0) out.curves(l, static_cast<Eigen::Index>(t)) = sum / static_cast<double>(count);
        }
        const Vector row = out.curves.row(l).transpose();
        out.t_max.push_back(
            t_max(times, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), fraction));
    }
    return out;
}

CorrelationResult temporal_score(const TemporalProfile& profile) {
    if (profile.depths.size() < 3) throw DegenerateInputError("temporal_score: need at least 3 layers");
    return correlate(profile.depths, profile.t_max);
}

HalfTime half_time(const ScoreTrajectory& trajectory) {
    const auto& s = trajectory.steps;
    const auto& v = trajectory.values;
    if (s.size() != v.size()) throw ConfigError("half_time: steps and values differ in length");
    if (s.size() < 2) throw DegenerateInputError("half_time: need at least 2 checkpoints");
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!(s[i] > s[i - 1])) throw ConfigError("half_time: steps must be strictly increasing");
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericalError("half_time: non-finite trajectory value");
    }
    HalfTime out;
    const double final_value = v.back();
    if (!(final_value > 0.0)) {
        out.note = "final value is not positive";
        return out;
    }
    const double half = final_value * 0.5;
    std::size_t crossing = 0;
    if (v.front() >= half) {
        out.value = s.front();
    } else {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i] >= half) {
                crossing = i;
                break;
            }
        }
        const double frac = (half - v[crossing - 1]) / (v[crossing] - v[crossing - 1]);
        out.value = s[crossing - 1] + frac * (s[crossing] - s[crossing - 1]);
    }
    for (std::size_t i = crossing; i < v.size(); ++i) {
        if (v[i] < half) out.non_monotone = true;
    }
    return out;
}

PropertyCorrelation roi_property_correlation(const std::map<std::string, double>& half_times,
                                             const std::map<std::string, double>& property) {
    PropertyCorrelation out;
    for (const auto& [roi, ht] : half_times) {
        const auto it = property.find(roi);
        if (it == property.end()) continue;
        if (std::isnan(ht) || std::isnan(it->second)) {
            ++out.dropped;
            continue;
        }
        out.rois.push_back(roi);
        out.half_times.push_back(ht);
        out.values.push_back(it->second);
    }
    if (out.rois.size() < 3) {
        throw DegenerateInputError("roi_property_correlation: " + std::to_string(out.rois.size()) +
                                   " joined ROI pairs, need at least 3");
    }
    out.correlation = correlate(out.half_times, out.values);
    return out;
}

namespace {

// Two-sided p of mean != 0 that tolerates zero spread.
double fold_p_value(const std::vector<double>& folds, double& mean) {
    mean = 0.0;
    for (double v : folds) mean += v;
    mean /= static_cast<double>(folds.size());
    try {
        return stats::t_test_one_sample(folds, 0.0).p;
    } catch (const DegenerateInputError&) {
        return mean != 0.0 ? 0.0 : 1.0;
    }
}

// Per-fold R of one target averaged over layers; empty when masked everywhere.
std::vector<double> layer_averaged_folds(std::span<const ridge::EncodingResult> per_layer, Eigen::Index j) {
    const std::size_t k = per_layer.front().n_splits;
    std::vector<double> folds(k, 0.0);
    std::size_t layers = 0;
    for (const auto& res : per_layer) {
        bool usable = true;
        for (std::size_t f = 0; f < k; ++f) usable &= !std::isnan(res.per_fold_r(static_cast<Eigen::Index>(f), j));
        if (!usable) continue;
        for (std::size_t f = 0; f < k; ++f) folds[f] += res.per_fold_r(static_cast<Eigen::Index>(f), j);
        ++layers;
    }
    if (layers == 0) return {};
    for (auto& v : folds) v /= static_cast<double>(layers);
    return folds;
}

}  // namespace

SignificanceMask significance_mask(std::span<const ridge::EncodingResult> per_layer, double q) {
    if (per_layer.empty()) throw ConfigError("significance_mask: no layers");
    const Eigen::Index m = per_layer.front().per_target_r.size();
    SignificanceMask out;
    std::vector<double> means(static_cast<std::size_t>(m), 0.0);
    out.p_raw.assign(static_cast<std::size_t>(m), 1.0);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto folds = layer_averaged_folds(per_layer, j);
        if (folds.empty()) continue;
        double mean = 0.0;
        out.p_raw[static_cast<std::size_t>(j)] = fold_p_value(folds, mean);
        means[static_cast<std::size_t>(j)] = mean;
    }
    const auto fdr = stats::fdr_bh(out.p_raw, q);
    out.p_adjusted = fdr.adjusted;
    const auto& rejected = fdr.rejected_at.at(q);
    out.keep.resize(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < out.keep.size(); ++j) out.keep[j] = rejected[j] && means[j] > 0.0;
    return out;
}

std::vector<bool> select_rois(std::span<const ridge::EncodingResult> per_layer,
                              std::span<const RoiGroup> rois, RoiRule rule, double alpha) {
    std::vector<bool> keep(rois.size(), false);
    if (rois.empty()) return keep;
    if (rule == RoiRule::test_then_average) {
        const auto voxel = significance_mask(per_layer, alpha);
        for (std::size_t r = 0; r < rois.size(); ++r) {
            if (rois[r].targets.empty()) continue;
            double sum = 0.0;
            for (auto t : rois[r].targets) sum += voxel.p_adjusted.at(t);
            keep[r] = sum / static_cast<double>(rois[r].targets.size()) < alpha;
        }
        return keep;
    }
    const std::size_t k = per_layer.front().n_splits;
    std::vector<double> p(rois.size(), 1.0), means(rois.size(), 0.0);
    for (std::size_t r = 0; r < rois.size(); ++r) {
        std::vector<double> folds(k, 0.0);
        std::size_t used = 0;
        for (auto t : rois[r].targets) {
            const auto tf = layer_averaged_folds(per_layer, static_cast<Eigen::Index>(t));
            if (tf.empty()) continue;
            for (std::size_t f = 0; f < k; ++f) folds[f] += tf[f];
            ++used;
        }
        if (used == 0) continue;
        for (auto& v : folds) v /= static_cast<double>(used);
        p[r] = fold_p_value(folds, means[r]);
    }
    const auto fdr = stats::fdr_bh(p, alpha);
    const auto& rejected = fdr.rejected_at.at(alpha);
    for (std::size_t r = 0; r < rois.size(); ++r) keep[r] = rejected[r] && means[r] > 0.0;
    return keep;
}

}  // namespace neuralign::metrics
