#include "neuralign/cli/config.hpp"

#include "neuralign/errors.hpp"

#include <cmath>
#include <sstream>

namespace neuralign::cli {
namespace {

using json = nlohmann::json;

template <class T>
T get(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config." + key + ": wrong type");
    }
}

std::size_t get_count(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config." + key + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(what + ": not a number '" + s + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(part);
    return out;
}

}  // namespace

const char* to_string(ScoreKind s) {
    switch (s) {
        case ScoreKind::automatic: return "auto";
        case ScoreKind::spatial: return "spatial";
        case ScoreKind::temporal: return "temporal";
        case ScoreKind::both: return "both";
    }
    return "";
}

const char* to_string(metrics::Level l) { return l == metrics::Level::voxel ? "voxel" : "roi"; }

const char* to_string(metrics::RoiRule r) {
    return r == metrics::RoiRule::test_then_average ? "test-then-average" : "average-then-test";
}

const char* to_string(ridge::SelectionMode m) { return m == ridge::SelectionMode::gcv ? "gcv" : "kfold"; }

metrics::Level parse_level(const std::string& s) {
    if (s == "voxel") return metrics::Level::voxel;
    if (s == "roi") return metrics::Level::roi;
    throw ConfigError("level: expected voxel or roi, got '" + s + "'");
}

metrics::RoiRule parse_roi_rule(const std::string& s) {
    if (s == "test-then-average") return metrics::RoiRule::test_then_average;
    if (s == "average-then-test") return metrics::RoiRule::average_then_test;
    throw ConfigError("roi-rule: expected test-then-average or average-then-test, got '" + s + "'");
}

ridge::SelectionMode parse_lambda_mode(const std::string& s) {
    if (s == "gcv") return ridge::SelectionMode::gcv;
    if (s == "kfold") return ridge::SelectionMode::kfold;
    throw ConfigError("lambda-mode: expected gcv or kfold, got '" + s + "'");
}

ScoreKind parse_score(const std::string& s) {
    if (s == "auto") return ScoreKind::automatic;
    if (s == "spatial") return ScoreKind::spatial;
    if (s == "temporal") return ScoreKind::temporal;
    if (s == "both") return ScoreKind::both;
    throw ConfigError("score: expected auto, spatial, temporal or both, got '" + s + "'");
}

std::vector<data::TimeWindow> parse_windows(const std::string& s) {
    std::vector<data::TimeWindow> out;
    for (const auto& part : split(s, ',')) {
        const auto ends = split(part, ':');
        if (ends.size() != 2) throw ConfigError("windows: expected start:end, got '" + part + "'");
        out.push_back({parse_double(ends[0], "windows"), parse_double(ends[1], "windows")});
    }
    return out;
}

Eigen::Vector3d parse_point(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 3) throw ConfigError("v1: expected x,y,z");
    return {parse_double(parts[0], "v1"), parse_double(parts[1], "v1"), parse_double(parts[2], "v1")};
}

void RunConfig::apply_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "manifest") manifest = get<std::string>(j, key);
        else if (key == "out") out = get<std::string>(j, key);
        else if (key == "lambda_grid") lambda_grid = get<std::vector<double>>(j, key);
        else if (key == "folds") folds = get_count(j, key);
        else if (key == "seed") seed = get_count(j, key);
        else if (key == "lambda_mode") lambda_mode = parse_lambda_mode(get<std::string>(j, key));
        else if (key == "lambda_per_target") lambda_per_target = get<bool>(j, key);
        else if (key == "inner_folds") inner_folds = get_count(j, key);
        else if (key == "level") level = parse_level(get<std::string>(j, key));
        else if (key == "tmax_frac") tmax_frac = get<double>(j, key);
        else if (key == "fdr_q") fdr_q = get<double>(j, key);
        else if (key == "mask") mask = get<bool>(j, key);
        else if (key == "roi_rule") roi_rule = parse_roi_rule(get<std::string>(j, key));
        else if (key == "threads") threads = static_cast<int>(get_count(j, key));
        else if (key == "layers") layers = get_count(j, key);
        else if (key == "v1") {
            const auto v = get<std::vector<double>>(j, key);
            if (v.size() != 3) throw ConfigError("config.v1: need 3 values");
            v1 = Eigen::Vector3d(v[0], v[1], v[2]);
        } else if (key == "windows") {
            windows.clear();
            for (const auto& w : get<std::vector<std::vector<double>>>(j, key)) {
                if (w.size() != 2) throw ConfigError("config.windows: each window needs [start, end]");
                windows.push_back({w[0], w[1]});
            }
        } else if (key == "score") score = parse_score(get<std::string>(j, key));
        else if (key == "metric") metric = get<std::string>(j, key);
        else if (key == "spec") spec = get<std::string>(j, key);
        else if (key == "halftimes") halftimes = get<std::string>(j, key);
        else throw ConfigError("config." + key + ": unknown field");
    }
}

void RunConfig::validate() const {
    ridge::LambdaGrid grid{lambda_grid};
    try {
        grid.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("lambda-grid: ") + e.what());
    }
    if (folds < 2) throw ConfigError("folds: need at least 2");
    if (inner_folds < 2) throw ConfigError("inner-folds: need at least 2");
    if (!(tmax_frac > 0.0 && tmax_frac <= 1.0)) throw ConfigError("tmax-frac: must lie in (0, 1]");
    if (!(fdr_q > 0.0 && fdr_q <= 1.0)) throw ConfigError("fdr-q: must lie in (0, 1]");
    if (threads < 1) throw ConfigError("threads: need at least 1");
    if (layers == 1) throw ConfigError("layers: need at least 2 when subsampling");
    if (v1 && !v1->allFinite()) throw ConfigError("v1: must be finite");
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["manifest"] = manifest;
    j["lambda_grid"] = lambda_grid;
    j["folds"] = folds;
    j["seed"] = seed;
    j["lambda_mode"] = to_string(lambda_mode);
    j["lambda_per_target"] = lambda_per_target;
    j["inner_folds"] = inner_folds;
    j["level"] = to_string(level);
    j["tmax_frac"] = tmax_frac;
    j["fdr_q"] = fdr_q;
    j["mask"] = mask;
    j["roi_rule"] = to_string(roi_rule);
    j["layers"] = layers;
    j["v1"] = v1 ? nlohmann::ordered_json::array({(*v1)(0), (*v1)(1), (*v1)(2)}) : nlohmann::ordered_json(nullptr);
    auto w = nlohmann::ordered_json::array();
    for (const auto& win : windows) w.push_back({win.start, win.end});
    j["windows"] = w;
    j["score"] = to_string(score);
    j["metric"] = metric;
    j["spec"] = spec;
    j["halftimes"] = halftimes;
    j["normalization"] = {{"t_max", "time, per layer"}, {"roi_curves", "layers, per ROI"}};
    return j;
}

ridge::EncodeOptions RunConfig::encode_options() const {
    ridge::EncodeOptions o;
    o.grid = ridge::LambdaGrid{lambda_grid};
    o.selection.mode = lambda_mode;
    o.selection.inner_folds = inner_folds;
    o.selection.seed = seed;
    o.selection.per_target = lambda_per_target;
    o.threads = threads;
    return o;
}

}  // namespace neuralign::cli
