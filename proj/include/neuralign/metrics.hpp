#pragma once

#include "neuralign/numeric.hpp"
#include "neuralign/ridge.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neuralign::metrics {

struct Layer {
    double depth = 0.0;  ///< 0 = first layer, 1 = last
    Matrix activations;  ///< stimuli x features
};

struct LayerActivations {
    std::vector<Layer> layers;
    std::string model_tag;
    double checkpoint_step = 1.0;

    /// Depths strictly increasing from 0 to 1; every layer has the same stimulus count.
    void validate() const;
    std::size_t stimuli() const;
    std::vector<double> depths() const;
};

/// Cross-validated encoding of `y` from every layer with one shared fold plan.
std::vector<ridge::EncodingResult> encode_layers(const LayerActivations& model, const Matrix& y,
                                                 const ridge::FoldPlan& plan, const ridge::EncodeOptions& options);

/// Evenly spaced layer indices that always include the first and last layer.
std::vector<std::size_t> subsample_layer_indices(std::size_t available, std::size_t requested);
LayerActivations subsample_layers(const LayerActivations& all, std::size_t requested);

struct VoxelGeometry {
    Matrix coordinates;                   ///< targets x 3, MNI mm
    std::vector<std::string> roi_labels;  ///< optional, one per target
    std::optional<Eigen::Vector3d> v1_reference;

    /// Explicit reference, else centroid of the targets labelled V1.
    Eigen::Vector3d v1() const;
};

/// Named target group as used by ROI-level scores.
struct RoiGroup {
    std::string name;
    std::vector<std::size_t> targets;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
};

struct CorrelationResult {
    double r = 0.0;
    std::optional<double> p;  ///< undefined below 4 samples
    bool p_degenerate = false;
    std::size_t n = 0;
};

/// Pearson r with its two-sided p-value.
CorrelationResult correlate(std::span<const double> x, std::span<const double> y);

/// R / max(R). NaN entries stay NaN and are ignored for the maximum.
std::vector<double> normalize_scores(std::span<const double> scores);

/// Per-layer scores as a layers x targets matrix, NaN where masked.
Matrix layer_score_matrix(std::span<const ridge::EncodingResult> per_layer);

struct BestLayerMap {
    std::vector<double> k_star;       ///< NaN for excluded targets
    std::vector<int> layer_index;     ///< -1 for excluded targets
    std::vector<std::size_t> excluded;
};

/// Argmax over layers per target, ties to the shallower layer. `keep` (may be
/// empty) drops targets that failed significance.
BestLayerMap best_layer_map(const Matrix& layer_scores, std::span<const double> depths,
                            const std::vector<bool>& keep = {});
BestLayerMap best_layer_map(std::span<const ridge::EncodingResult> per_layer,
                            std::span<const double> depths, const std::vector<bool>& keep = {});

enum class Level { voxel, roi };

struct SpatialPoint {
    std::string label;
    double distance = 0.0;  ///< mm from V1
    double k_star = 0.0;
};

struct SpatialScore {
    Level level = Level::voxel;
    CorrelationResult correlation;
    std::vector<SpatialPoint> points;
    std::vector<std::string> excluded;
};

/// Correlation between distance from V1 and best layer depth. At ROI level
/// each ROI's layer curve is the mean R over its kept targets, then argmax.
SpatialScore spatial_score(const Matrix& layer_scores, std::span<const double> depths,
                           const VoxelGeometry& geometry, Level level,
                           std::span<const RoiGroup> rois = {}, const std::vector<bool>& keep = {},
                           const std::vector<bool>& roi_keep = {});

/// Mean of the sample times where curve / max(curve) >= fraction.
double t_max(std::span<const double> times, std::span<const double> curve, double fraction = 0.95);

struct TemporalProfile {
    std::vector<double> times;
    std::vector<double> depths;
    Matrix curves;  ///< layers x times
    std::vector<double> t_max;
    double fraction = 0.95;
};

/// Layer curves R^k(t) averaged over channels for channel-major targets
/// (target = channel * n_times + time), and their T_max.
TemporalProfile temporal_profile(const Matrix& layer_scores, std::span<const double> depths,
                                 std::size_t channels, std::span<const double> times,
                                 double fraction = 0.95);

/// Correlation between layer depth and T_max.
CorrelationResult temporal_score(const TemporalProfile& profile);

struct ScoreTrajectory {
    std::vector<double> steps;   ///< relative training fractions, strictly increasing
    std::vector<double> values;
};

struct HalfTime {
    std::optional<double> value;
    bool non_monotone = false;  ///< drops back below half-final after the crossing
    std::string note;           ///< why the value is undefined
};

/// First step where the trajectory reaches half its final value, linearly
/// interpolated between checkpoints.
HalfTime half_time(const ScoreTrajectory& trajectory);

struct PropertyCorrelation {
    CorrelationResult correlation;
    std::size_t dropped = 0;  ///< ROIs with a missing value on either side
    std::vector<std::string> rois;
    std::vector<double> half_times;
    std::vector<double> values;
};

/// Pearson over ROIs present in both maps; NaN marks a missing value.
PropertyCorrelation roi_property_correlation(const std::map<std::string, double>& half_times,
                                             const std::map<std::string, double>& property);

struct SignificanceMask {
    std::vector<bool> keep;
    std::vector<double> p_raw;
    std::vector<double> p_adjusted;
};

/// Per-target t-test of the per-fold R (averaged over layers) against 0,
/// Benjamini-Hochberg across targets; keeps rejections with positive mean R.
SignificanceMask significance_mask(std::span<const ridge::EncodingResult> per_layer, double q);

enum class RoiRule { test_then_average, average_then_test };

/// ROI inclusion at level alpha: either the ROI-mean of voxel FDR-adjusted p
/// is below alpha, or the t-test of ROI-averaged per-fold R survives FDR across ROIs.
std::vector<bool> select_rois(std::span<const ridge::EncodingResult> per_layer,
                              std::span<const RoiGroup> rois, RoiRule rule, double alpha);

}  // namespace neuralign::metrics
