#pragma once

#include "neuralign/dataset.hpp"
#include "neuralign/meg.hpp"
#include "neuralign/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace neuralign::synth {

enum class Kind { hierarchical, temporal, trajectory };

struct TemporalGrid {
    double onset = 0.1;        ///< peak time of the depth-0 layer (s)
    double time_start = -0.05;
    double time_step = 0.0125;
    std::size_t n_times = 56;
    double width = 0.025;      ///< Gaussian gain SD (s)
    double gain = 2.0;         ///< gain amplitude at the peak
};

/// Generator parameters. Serialized as JSON; unknown keys are rejected.
struct PlantSpec {
    Kind kind = Kind::hierarchical;
    std::size_t n_stimuli = 200;
    std::size_t n_layers = 5;
    std::size_t features_per_layer = 16;
    std::size_t targets_per_layer = 10;  ///< voxels per layer, or MEG channels per layer
    double noise_sd = 0.0;
    double hierarchy_slope = 60.0;       ///< mm per unit depth
    double temporal_peaks = 0.4;         ///< s per unit depth; negative reverses the order
    std::vector<double> trajectory;      ///< per-layer learning rate, +inf = instant; empty = defaults
    std::vector<double> checkpoints;     ///< relative steps; empty = 12 evenly spaced in [0,1]
    std::uint64_t seed = 0;
    double fresh_fraction = 0.5;         ///< variance share of new components per layer
    Eigen::Vector3d v1_reference{10.0, -90.0, 0.0};
    TemporalGrid temporal;
    double property_noise_sd = 0.02;

    static PlantSpec from_json(const std::string& text);
    static PlantSpec load(const std::filesystem::path& path);
    std::string to_json() const;
    void validate() const;

    double depth(std::size_t layer) const;
    std::vector<double> rates() const;
    std::vector<double> checkpoint_steps() const;
};

struct HierarchicalTruth {
    std::vector<std::size_t> target_layer;
    std::vector<double> target_depth;
    std::vector<double> target_distance;  ///< mm from v1_reference
    double snr = 0.0;                     ///< signal SD / noise SD, inf when noiseless
};

struct HierarchicalData {
    metrics::LayerActivations model;
    Matrix response;  ///< stimuli x voxels
    metrics::VoxelGeometry geometry;
    data::RoiTable rois;  ///< one ROI per layer, the depth-0 ROI is V1
    HierarchicalTruth truth;
};

struct TemporalTruth {
    std::vector<std::size_t> channel_layer;
    std::vector<double> peak_times;  ///< per layer, on the time grid
    double snr_at_peak = 0.0;
};

struct TemporalData {
    metrics::LayerActivations model;
    data::MegResponse response;
    TemporalTruth truth;
};

struct PlantedProperty {
    double slope = 0.0;
    std::vector<double> values;  ///< per ROI
    double planted_r = 0.0;      ///< realized Pearson r with the true half times
};

struct TrajectoryTruth {
    std::vector<double> checkpoints;
    std::vector<double> rates;       ///< per layer
    std::vector<double> half_times;  ///< closed form, per layer (= per ROI)
    std::map<std::string, PlantedProperty> properties;
};

struct TrajectoryData {
    std::vector<metrics::LayerActivations> models;  ///< one per checkpoint
    Matrix response;
    metrics::VoxelGeometry geometry;
    data::RoiTable rois;
    HierarchicalTruth hierarchy;
    TrajectoryTruth truth;
};

HierarchicalData gen_hierarchical(const PlantSpec& spec);
TemporalData gen_temporal(const PlantSpec& spec);
TrajectoryData gen_trajectory(const PlantSpec& spec);

/// Interpolation weight of the final features at step s for rate r.
double planted_alpha(double rate, double step);
/// Step at which the population encoding R reaches half its final value.
double closed_form_half_time(double rate);

/// Writes manifest.json, matrices, metadata, rois.csv (fMRI kinds), spec.json
/// and truth.json into `dir`, creating it if needed.
void write_dataset(const std::filesystem::path& dir, const PlantSpec& spec);

}  // namespace neuralign::synth
