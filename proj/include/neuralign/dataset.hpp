#pragma once

#include "neuralign/geometry.hpp"
#include "neuralign/meg.hpp"
#include "neuralign/metrics.hpp"
#include "neuralign/numeric.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace neuralign::data {

enum class Modality { fmri, meg };

const char* to_string(Modality m);

struct ActivationEntry {
    double depth = 0.0;
    double checkpoint = 1.0;  ///< relative training step
    std::string path;
    std::vector<std::string> stimulus_ids;  ///< row order of the file; empty = manifest order
    std::string model_tag;
};

struct ResponseEntry {
    Modality modality = Modality::fmri;
    std::string path;
    std::string metadata;  ///< geometry JSON (fmri) or time-axis JSON (meg)
    std::vector<std::string> stimulus_ids;
};

/// Dataset description, JSON with "schema": 1. Relative paths resolve against
/// the manifest's directory.
struct Manifest {
    int schema = 1;
    std::vector<std::string> stimulus_ids;
    std::vector<ActivationEntry> activations;
    ResponseEntry response;
    std::string roi_table;
    std::vector<std::string> property_maps;
    std::filesystem::path base_dir;

    static Manifest parse(const std::string& json_text, const std::filesystem::path& base_dir);
    static Manifest load(const std::filesystem::path& path);
    std::string dump() const;

    /// Structural checks only: schema, unique IDs, depth range, unique (depth, checkpoint).
    void validate() const;
    std::filesystem::path resolve(const std::string& relative) const;
    std::vector<double> checkpoints() const;
};

/// Rows of `m` (labelled by `row_ids`) rearranged into `order`. Errors name
/// duplicate, missing or surplus IDs.
Matrix align_rows(const Matrix& m, const std::vector<std::string>& row_ids, const std::vector<std::string>& order,
                  const std::string& what);

struct RoiEntry {
    std::string name;
    std::vector<std::size_t> targets;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    std::map<std::string, double> properties;  ///< NaN marks a missing value
};

inline const std::vector<std::string>& standard_properties() {
    static const std::vector<std::string> names{"expansion", "thickness", "timescale", "myelin"};
    return names;
}

struct RoiTable {
    std::vector<RoiEntry> rois;

    /// Member indices in range and disjoint; centroids match member coordinates.
    void validate(std::size_t n_targets, const Matrix* coordinates = nullptr) const;
    std::vector<metrics::RoiGroup> groups() const;
    std::vector<std::string> property_names() const;
    const RoiEntry* find(const std::string& name) const;
};

/// CSV: roi,target_indices,centroid_x,centroid_y,centroid_z[,property...];
/// target indices separated by ';'.
RoiTable read_roi_table(const std::filesystem::path& path);
void write_roi_table(const std::filesystem::path& path, const RoiTable& table);

/// CSV: roi,<property>... Values merge into the table; empty or NaN = missing.
void merge_property_map(RoiTable& table, const std::filesystem::path& path);

metrics::VoxelGeometry read_geometry(const std::filesystem::path& path);
void write_geometry(const std::filesystem::path& path, const metrics::VoxelGeometry& geometry);

std::vector<double> read_times(const std::filesystem::path& path);
void write_times(const std::filesystem::path& path, const std::vector<double>& times);

/// Throws ConfigError when no V1 reference can be established.
std::vector<double> distance_from_v1(const metrics::VoxelGeometry& geometry);

/// Everything a manifest references, aligned to the manifest stimulus order.
struct Dataset {
    Manifest manifest;
    Modality modality = Modality::fmri;
    std::vector<double> checkpoints;                   ///< ascending
    std::vector<metrics::LayerActivations> models;     ///< one per checkpoint
    Matrix response;                                   ///< stimuli x targets
    std::optional<metrics::VoxelGeometry> geometry;    ///< fmri
    std::optional<MegResponse> meg;                    ///< meg, not z-scored
    std::optional<RoiTable> rois;

    const metrics::LayerActivations& final_model() const { return models.back(); }
};

/// Loads and aligns every referenced file.
Dataset load_dataset(const Manifest& manifest);

}  // namespace neuralign::data
