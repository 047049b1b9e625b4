#pragma once

#include "neuralign/meg.hpp"
#include "neuralign/metrics.hpp"
#include "neuralign/ridge.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace neuralign::cli {

enum class ScoreKind { automatic, spatial, temporal, both };

/// Resolved settings of one command. Precedence: flags > config file > defaults.
struct RunConfig {
    std::string command;
    std::string manifest;
    std::string out = ".";
    std::vector<double> lambda_grid = ridge::LambdaGrid::default_grid().values;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    ridge::SelectionMode lambda_mode = ridge::SelectionMode::gcv;
    bool lambda_per_target = false;
    std::size_t inner_folds = 5;
    metrics::Level level = metrics::Level::voxel;
    double tmax_frac = 0.95;
    double fdr_q = 0.01;
    bool mask = true;  ///< drop targets failing the FDR t-test before scoring
    metrics::RoiRule roi_rule = metrics::RoiRule::test_then_average;
    int threads = 1;
    std::size_t layers = 0;  ///< evenly subsample to this many layers; 0 = all
    std::optional<Eigen::Vector3d> v1;
    std::vector<data::TimeWindow> windows;
    ScoreKind score = ScoreKind::automatic;
    std::string metric = "encoding";  ///< property-corr: which half-time metric to correlate
    std::string spec;                 ///< synth
    std::string halftimes;            ///< property-corr: half-time CSV from `halftime`

    /// Merges keys from a JSON config file; unknown keys are rejected.
    void apply_json(const nlohmann::json& j);
    void validate() const;

    /// Provenance echo. Thread count and output directory are excluded since
    /// they must not change results.
    nlohmann::ordered_json to_json() const;

    ridge::EncodeOptions encode_options() const;
};

const char* to_string(ScoreKind s);
const char* to_string(metrics::Level l);
const char* to_string(metrics::RoiRule r);
const char* to_string(ridge::SelectionMode m);

metrics::Level parse_level(const std::string& s);
metrics::RoiRule parse_roi_rule(const std::string& s);
ridge::SelectionMode parse_lambda_mode(const std::string& s);
ScoreKind parse_score(const std::string& s);
/// "0.08:0.13,0.13:0.18"
std::vector<data::TimeWindow> parse_windows(const std::string& s);
/// "x,y,z"
Eigen::Vector3d parse_point(const std::string& s);

}  // namespace neuralign::cli
