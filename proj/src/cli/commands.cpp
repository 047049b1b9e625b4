#include "neuralign/cli/commands.hpp"

#include "neuralign/cli/config.hpp"
#include "neuralign/cli/report.hpp"
#include "neuralign/cli/svg.hpp"
#include "neuralign/dataset.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/metrics.hpp"
#include "neuralign/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

namespace neuralign::cli {
namespace {

using json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- analysis

struct LayerEncoding {
    std::vector<double> depths;
    std::vector<ridge::EncodingResult> results;
    Matrix scores;  ///< layers x targets, NaN where masked by encode
    metrics::SignificanceMask significance;
    std::vector<bool> keep;  ///< significance.keep, or all-true when masking is off
};

data::Dataset load(const RunConfig& cfg) {
    if (cfg.manifest.empty()) throw ConfigError("--manifest: required for '" + cfg.command + "'");
    return data::load_dataset(data::Manifest::load(cfg.manifest));
}

metrics::LayerActivations pick_layers(const metrics::LayerActivations& model, const RunConfig& cfg) {
    return cfg.layers == 0 ? model : metrics::subsample_layers(model, cfg.layers);
}

// MEG responses are z-scored per (channel, time) cell across stimuli.
Matrix response_matrix(const data::Dataset& ds, Report& report) {
    if (ds.modality == data::Modality::fmri) return ds.response;
    const auto z = data::zscore_meg(*ds.meg);
    std::size_t constant = 0;
    for (bool c : z.constant_cells) constant += c;
    if (constant > 0) report.warn(std::to_string(constant) + " constant MEG (channel, time) cells left centred");
    return z.data;
}

LayerEncoding encode_model(const metrics::LayerActivations& model, const Matrix& y, const RunConfig& cfg) {
    LayerEncoding e;
    e.depths = model.depths();
    const auto plan = ridge::FoldPlan::make(static_cast<std::size_t>(y.rows()), cfg.folds, cfg.seed);
    e.results = metrics::encode_layers(model, y, plan, cfg.encode_options());
    e.scores = metrics::layer_score_matrix(e.results);
    e.significance = metrics::significance_mask(e.results, cfg.fdr_q);
    e.keep = cfg.mask ? e.significance.keep : std::vector<bool>(static_cast<std::size_t>(y.cols()), true);
    return e;
}

double nan_mean(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        sum += x;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : kNaN;
}

// Per-target max over layers.
std::vector<double> best_r(const Matrix& scores) {
    std::vector<double> out(static_cast<std::size_t>(scores.cols()), kNaN);
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        for (Eigen::Index l = 0; l < scores.rows(); ++l) {
            const double v = scores(l, j);
            if (!std::isnan(v) && (std::isnan(out[j]) || v > out[j])) out[j] = v;
        }
    }
    return out;
}

std::size_t count_true(const std::vector<bool>& v) {
    std::size_t n = 0;
    for (bool b : v) n += b;
    return n;
}

json encoding_summary(const LayerEncoding& e, const RunConfig& cfg) {
    json layers = json::array();
    for (std::size_t l = 0; l < e.results.size(); ++l) {
        const auto& r = e.results[l];
        json lambdas = json::array();
        for (const auto& f : r.lambda_per_fold) lambdas.push_back(f);
        std::vector<double> row(r.per_target_r.data(), r.per_target_r.data() + r.per_target_r.size());
        layers.push_back({{"depth", e.depths[l]},
                          {"mean_r", number_or_null(nan_mean(row))},
                          {"masked_targets", r.masked_count()},
                          {"lambda_per_fold", lambdas}});
    }
    const auto best = best_r(e.scores);
    std::vector<double> kept_best;
    for (std::size_t j = 0; j < best.size(); ++j) {
        if (e.significance.keep[j]) kept_best.push_back(best[j]);
    }
    json j;
    j["n_targets"] = e.scores.cols();
    j["n_layers"] = e.scores.rows();
    j["mean_r"] = number_or_null(nan_mean(best));
    j["mean_r_significant"] = number_or_null(nan_mean(kept_best));
    j["layers"] = layers;
    j["significance"] = {{"test", "one-sample t-test of layer-averaged per-fold R, BH-FDR across targets"},
                         {"q", cfg.fdr_q},
                         {"significant_targets", count_true(e.significance.keep)}};
    return j;
}

json correlation_json(const metrics::CorrelationResult& c) {
    json j;
    j["r"] = c.r;
    j["p"] = c.p ? number_or_null(*c.p) : json(nullptr);
    j["p_degenerate"] = c.p_degenerate;
    j["n"] = c.n;
    return j;
}

metrics::VoxelGeometry geometry_for(const data::Dataset& ds, const RunConfig& cfg) {
    if (!ds.geometry) throw ConfigError("manifest.response.metadata: spatial scores need a geometry file");
    auto g = *ds.geometry;
    if (cfg.v1) g.v1_reference = *cfg.v1;
    return g;
}

metrics::SpatialScore spatial_for(const LayerEncoding& e, const data::Dataset& ds, const RunConfig& cfg) {
    const auto g = geometry_for(ds, cfg);
    if (cfg.level == metrics::Level::voxel) {
        return metrics::spatial_score(e.scores, e.depths, g, metrics::Level::voxel, {}, e.keep);
    }
    if (!ds.rois) throw ConfigError("--level roi: the manifest has no roi_table");
    const auto groups = ds.rois->groups();
    std::vector<bool> roi_keep;
    if (cfg.mask) roi_keep = metrics::select_rois(e.results, groups, cfg.roi_rule, cfg.fdr_q);
    return metrics::spatial_score(e.scores, e.depths, g, metrics::Level::roi, groups, e.keep, roi_keep);
}

metrics::TemporalProfile temporal_for(const LayerEncoding& e, const data::Dataset& ds, const RunConfig& cfg) {
    Matrix masked = e.scores;
    for (std::size_t j = 0; j < e.keep.size(); ++j) {
        if (!e.keep[j]) masked.col(static_cast<Eigen::Index>(j)).setConstant(kNaN);
    }
    return metrics::temporal_profile(masked, e.depths, ds.meg->channels, ds.meg->times, cfg.tmax_frac);
}

bool wants_spatial(const RunConfig& cfg, const data::Dataset& ds) {
    const bool want = cfg.score == ScoreKind::spatial || cfg.score == ScoreKind::both ||
                      (cfg.score == ScoreKind::automatic && ds.modality == data::Modality::fmri);
    if (want && ds.modality != data::Modality::fmri) throw ConfigError("--score: spatial scores need an fmri response");
    return want;
}

bool wants_temporal(const RunConfig& cfg, const data::Dataset& ds) {
    const bool want = cfg.score == ScoreKind::temporal || cfg.score == ScoreKind::both ||
                      (cfg.score == ScoreKind::automatic && ds.modality == data::Modality::meg);
    if (want && ds.modality != data::Modality::meg) throw ConfigError("--score: temporal scores need a meg response");
    return want;
}

// --------------------------------------------------------------- half times

struct Trajectory {
    std::string roi;  ///< "all" for whole-dataset metrics
    std::string metric;
    double best_depth = kNaN;
    metrics::ScoreTrajectory values;
    metrics::HalfTime half;
};

std::vector<Trajectory> halftime_analysis(const data::Dataset& ds, const RunConfig& cfg, Report& report) {
    if (ds.checkpoints.size() < 2) {
        throw ConfigError("manifest.activations: a trajectory needs at least 2 checkpoints, found " +
                          std::to_string(ds.checkpoints.size()));
    }
    const Matrix y = response_matrix(ds, report);
    std::vector<LayerEncoding> per_ckpt;
    for (const auto& model : ds.models) per_ckpt.push_back(encode_model(pick_layers(model, cfg), y, cfg));
    const auto& last = per_ckpt.back();
    const auto& keep = last.keep;

    std::vector<Trajectory> out;
    if (ds.rois) {
        for (const auto& roi : ds.rois->rois) {
            // best layer from the final checkpoint's ROI-mean curve
            std::vector<std::size_t> members;
            for (auto t : roi.targets) {
                if (keep[t]) members.push_back(t);
            }
            auto roi_mean = [&](const Matrix& scores, Eigen::Index layer) {
                std::vector<double> v;
                for (auto t : members) v.push_back(scores(layer, static_cast<Eigen::Index>(t)));
                return nan_mean(v);
            };
            int best = -1;
            double best_value = kNaN;
            for (Eigen::Index l = 0; l < last.scores.rows(); ++l) {
                const double v = roi_mean(last.scores, l);
                if (!std::isnan(v) && (best < 0 || v > best_value)) {
                    best = static_cast<int>(l);
                    best_value = v;
                }
            }
            if (best < 0) {
                report.warn("ROI " + roi.name + ": no significant targets, half time skipped");
                continue;
            }
            Trajectory t{roi.name, "encoding", last.depths[static_cast<std::size_t>(best)], {}, {}};
            for (std::size_t c = 0; c < per_ckpt.size(); ++c) {
                const double v = roi_mean(per_ckpt[c].scores, best);
                if (std::isnan(v)) {
                    report.warn("ROI " + roi.name + ": encoding undefined at checkpoint " +
                                format_number(ds.checkpoints[c]) + ", dropped");
                    continue;
                }
                t.values.steps.push_back(ds.checkpoints[c]);
                t.values.values.push_back(v);
            }
            out.push_back(std::move(t));
        }
    }

    Trajectory enc{"all", "encoding", kNaN, {}, {}};
    for (std::size_t c = 0; c < per_ckpt.size(); ++c) {
        const auto best = best_r(per_ckpt[c].scores);
        std::vector<double> kept;
        for (std::size_t j = 0; j < best.size(); ++j) {
            if (keep[j]) kept.push_back(best[j]);
        }
        const double v = nan_mean(kept);
        if (std::isnan(v)) continue;
        enc.values.steps.push_back(ds.checkpoints[c]);
        enc.values.values.push_back(v);
    }
    out.push_back(std::move(enc));

    const bool spatial = ds.modality == data::Modality::fmri && ds.geometry;
    Trajectory hier{"all", spatial ? "spatial" : "temporal", kNaN, {}, {}};
    for (std::size_t c = 0; c < per_ckpt.size(); ++c) {
        LayerEncoding e = per_ckpt[c];
        e.keep = keep;  // same targets at every checkpoint
        try {
            const double r = spatial ? spatial_for(e, ds, cfg).correlation.r
                                     : metrics::temporal_score(temporal_for(e, ds, cfg)).r;
            hier.values.steps.push_back(ds.checkpoints[c]);
            hier.values.values.push_back(r);
        } catch (const NumericalError& err) {
            report.warn(hier.metric + " score undefined at checkpoint " + format_number(ds.checkpoints[c]) +
                        ", dropped (" + err.what() + ")");
        }
    }
    if (spatial || ds.modality == data::Modality::meg) out.push_back(std::move(hier));

    for (auto& t : out) {
        const std::string who = t.roi == "all" ? t.metric : "ROI " + t.roi + " " + t.metric;
        if (t.values.steps.size() < 2) {
            t.half.note = "fewer than 2 defined checkpoints";
            report.warn(who + ": half time undefined (" + t.half.note + ")");
            continue;
        }
        t.half = metrics::half_time(t.values);
        if (!t.half.value) report.warn(who + ": half time undefined (" + t.half.note + ")");
        if (t.half.non_monotone) report.warn(who + ": trajectory drops below half its final value after crossing");
    }
    return out;
}

json trajectory_json(const Trajectory& t) {
    json j;
    j["roi"] = t.roi;
    j["metric"] = t.metric;
    if (t.roi != "all") j["best_layer_depth"] = t.best_depth;
    j["half_time"] = t.half.value ? json(*t.half.value) : json(nullptr);
    j["non_monotone"] = t.half.non_monotone;
    if (!t.half.note.empty()) j["note"] = t.half.note;
    j["steps"] = t.values.steps;
    j["values"] = t.values.values;
    return j;
}

// ----------------------------------------------------------------- commands

void cmd_encode(const RunConfig& cfg, Report& report) {
    const auto ds = load(cfg);
    const Matrix y = response_matrix(ds, report);
    const auto e = encode_model(pick_layers(ds.final_model(), cfg), y, cfg);
    report.results["encoding"] = encoding_summary(e, cfg);
    report.results["modality"] = data::to_string(ds.modality);
    report.results["n_stimuli"] = y.rows();
    report.results["checkpoint"] = ds.final_model().checkpoint_step;
    const auto plan = ridge::FoldPlan::make(static_cast<std::size_t>(y.rows()), cfg.folds, cfg.seed);
    report.results["fold_sizes"] = plan.fold_sizes();

    if (!cfg.windows.empty()) {
        if (!ds.meg) throw ConfigError("--windows: time windows need a meg response");
        json windows = json::array();
        for (const auto& slice : data::select_time_windows(*ds.meg, cfg.windows)) {
            json per_layer = json::array();
            for (Eigen::Index l = 0; l < e.scores.rows(); ++l) {
                std::vector<double> v;
                for (auto t : slice.targets) v.push_back(e.scores(l, static_cast<Eigen::Index>(t)));
                per_layer.push_back(number_or_null(nan_mean(v)));
            }
            json times = json::array();
            for (auto i : slice.time_indices) times.push_back(ds.meg->times[i]);
            windows.push_back({{"start", slice.window.start},
                               {"end", slice.window.end},
                               {"times", times},
                               {"n_targets", slice.targets.size()},
                               {"layer_mean_r", per_layer}});
        }
        report.results["windows"] = windows;
    }

    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index j = 0; j < e.scores.cols(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        for (Eigen::Index l = 0; l < e.scores.rows(); ++l) {
            const auto& r = e.results[static_cast<std::size_t>(l)];
            rows.push_back({std::to_string(j), std::to_string(l), format_number(e.depths[static_cast<std::size_t>(l)]),
                            format_number(r.per_target_r(j)), r.mask[ju] ? "1" : "0",
                            e.significance.keep[ju] ? "1" : "0", format_number(e.significance.p_adjusted[ju])});
        }
    }
    write_csv(std::filesystem::path(cfg.out) / "per_target_scores.csv",
              {"target", "layer", "depth", "r", "masked", "significant", "p_adjusted"}, rows);
}

void cmd_scores(const RunConfig& cfg, Report& report) {
    const auto ds = load(cfg);
    const bool spatial = wants_spatial(cfg, ds);
    const bool temporal = wants_temporal(cfg, ds);
    const Matrix y = response_matrix(ds, report);
    const auto e = encode_model(pick_layers(ds.final_model(), cfg), y, cfg);
    report.results["encoding"] = encoding_summary(e, cfg);
    const std::filesystem::path out(cfg.out);

    if (spatial) {
        const auto s = spatial_for(e, ds, cfg);
        json points = json::array();
        std::vector<double> xs, ys;
        for (const auto& p : s.points) {
            points.push_back({{"label", p.label}, {"distance_mm", p.distance}, {"k_star", p.k_star}});
            xs.push_back(p.distance);
            ys.push_back(p.k_star);
        }
        const auto v1 = geometry_for(ds, cfg).v1();
        json j = correlation_json(s.correlation);
        j["level"] = to_string(s.level);
        j["v1_reference"] = {v1(0), v1(1), v1(2)};
        j["excluded"] = s.excluded;
        j["points"] = points;
        report.results["spatial"] = j;
        if (!s.excluded.empty()) {
            report.warn(std::to_string(s.excluded.size()) + " " + (s.level == metrics::Level::voxel ? "targets" : "ROIs") +
                        " excluded from the spatial score");
        }
        svg::write(out / "spatial_scatter.svg",
                   svg::scatter({"Spatial score r = " + svg::num(s.correlation.r), "Distance from V1 (mm)",
                                 "Best layer depth k*"},
                                xs, ys, true));
    }
    if (temporal) {
        const auto profile = temporal_for(e, ds, cfg);
        const auto score = metrics::temporal_score(profile);
        json curves = json::array();
        std::vector<svg::Series> series;
        for (Eigen::Index l = 0; l < profile.curves.rows(); ++l) {
            std::vector<double> row(static_cast<std::size_t>(profile.curves.cols()));
            for (Eigen::Index t = 0; t < profile.curves.cols(); ++t) row[static_cast<std::size_t>(t)] = profile.curves(l, t);
            json c = json::array();
            for (double v : row) c.push_back(number_or_null(v));
            curves.push_back(c);
            const auto normalized = metrics::normalize_scores(row);
            series.push_back({"k=" + svg::num(profile.depths[static_cast<std::size_t>(l)]), profile.times, normalized});
        }
        json j = correlation_json(score);
        j["fraction"] = profile.fraction;
        j["depths"] = profile.depths;
        j["t_max"] = profile.t_max;
        j["times"] = profile.times;
        j["curves"] = curves;
        report.results["temporal"] = j;
        svg::write(out / "temporal_scatter.svg",
                   svg::scatter({"Temporal score r = " + svg::num(score.r), "Layer depth k", "T_max (s)"},
                                profile.depths, profile.t_max, true));
        svg::write(out / "temporal_curves.svg",
                   svg::lines({"Normalized layer curves", "Time (s)", "R / max R"}, series));
    }
}

void write_halftime_outputs(const std::vector<Trajectory>& trajs, const RunConfig& cfg, Report& report) {
    const std::filesystem::path out(cfg.out);
    json rois = json::array(), global = json::array();
    std::vector<std::vector<std::string>> ht_rows, traj_rows;
    std::vector<svg::Series> roi_series, global_series;
    for (const auto& t : trajs) {
        (t.roi == "all" ? global : rois).push_back(trajectory_json(t));
        ht_rows.push_back({t.roi, t.metric, t.half.value ? format_number(*t.half.value) : "nan",
                           t.half.non_monotone ? "1" : "0",
                           t.values.values.empty() ? "nan" : format_number(t.values.values.back()), t.half.note});
        for (std::size_t i = 0; i < t.values.steps.size(); ++i) {
            traj_rows.push_back({t.roi, t.metric, format_number(t.values.steps[i]), format_number(t.values.values[i])});
        }
        (t.roi == "all" ? global_series : roi_series)
            .push_back({t.roi == "all" ? t.metric : t.roi, t.values.steps, t.values.values});
    }
    report.results["rois"] = rois;
    report.results["global"] = global;
    write_csv(out / "halftimes.csv", {"roi", "metric", "half_time", "non_monotone", "final_value", "note"}, ht_rows);
    write_csv(out / "trajectories.csv", {"roi", "metric", "step", "value"}, traj_rows);
    if (!roi_series.empty()) {
        svg::write(out / "halftime_rois.svg",
                   svg::lines({"ROI encoding over training", "Relative training step", "Mean R"}, roi_series));
    }
    svg::write(out / "halftime_metrics.svg",
               svg::lines({"Metrics over training", "Relative training step", "Score"}, global_series));
}

void cmd_halftime(const RunConfig& cfg, Report& report) {
    const auto ds = load(cfg);
    const auto trajs = halftime_analysis(ds, cfg, report);
    report.results["checkpoints"] = ds.checkpoints;
    write_halftime_outputs(trajs, cfg, report);
}

void cmd_property_corr(const RunConfig& cfg, Report& report) {
    const auto ds = load(cfg);
    if (!ds.rois) throw ConfigError("manifest.roi_table: property correlations need an ROI table");
    std::map<std::string, double> half_times;
    if (!cfg.halftimes.empty()) {
        for (const auto& rec : read_csv_records(cfg.halftimes)) {
            if (!rec.count("roi") || !rec.count("metric") || !rec.count("half_time")) {
                throw ConfigError("--halftimes: CSV needs roi, metric and half_time columns");
            }
            if (rec.at("roi") == "all" || rec.at("metric") != cfg.metric) continue;
            const auto& v = rec.at("half_time");
            half_times[rec.at("roi")] = (v.empty() || v == "nan") ? kNaN : std::stod(v);
        }
        report.results["half_time_source"] = cfg.halftimes;
    } else {
        if (cfg.metric != "encoding") throw ConfigError("--metric: only 'encoding' half times are per ROI");
        for (const auto& t : halftime_analysis(ds, cfg, report)) {
            if (t.roi != "all" && t.metric == cfg.metric) half_times[t.roi] = t.half.value.value_or(kNaN);
        }
        report.results["half_time_source"] = "computed";
    }
    if (half_times.empty()) throw ConfigError("--halftimes: no per-ROI half times for metric '" + cfg.metric + "'");

    const auto names = ds.rois->property_names();
    if (names.empty()) throw ConfigError("roi table: no property columns");
    json props = json::object();
    for (const auto& name : names) {
        std::map<std::string, double> values;
        bool any = false;
        for (const auto& roi : ds.rois->rois) {
            const auto it = roi.properties.find(name);
            const double v = it == roi.properties.end() ? kNaN : it->second;
            values[roi.name] = v;
            any |= !std::isnan(v);
        }
        if (!any) {
            report.warn("property " + name + ": all values missing, skipped");
            continue;
        }
        const auto pc = metrics::roi_property_correlation(half_times, values);
        json j = correlation_json(pc.correlation);
        j["dropped"] = pc.dropped;
        j["rois"] = pc.rois;
        j["half_times"] = pc.half_times;
        j["values"] = pc.values;
        props[name] = j;
        if (pc.dropped > 0) report.warn("property " + name + ": " + std::to_string(pc.dropped) + " ROIs with missing values dropped");
        svg::write(std::filesystem::path(cfg.out) / ("property_" + name + ".svg"),
                   svg::scatter({name + " vs half time, r = " + svg::num(pc.correlation.r), "Half time (relative step)", name},
                                pc.half_times, pc.values, true));
    }
    report.results["properties"] = props;
}

void cmd_validate(const RunConfig& cfg, Report& report) {
    const auto ds = load(cfg);
    json j;
    j["valid"] = true;
    j["modality"] = data::to_string(ds.modality);
    j["n_stimuli"] = ds.response.rows();
    j["n_targets"] = ds.response.cols();
    j["checkpoints"] = ds.checkpoints;
    j["layer_depths"] = ds.final_model().depths();
    j["n_rois"] = ds.rois ? ds.rois->rois.size() : 0;
    j["properties"] = ds.rois ? ds.rois->property_names() : std::vector<std::string>{};
    if (ds.meg) j["meg"] = {{"channels", ds.meg->channels}, {"n_times", ds.meg->n_times()}, {"step", ds.meg->step()}};
    report.results = j;
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
    if (cfg.spec.empty()) throw ConfigError("--spec: required for 'synth'");
    const auto spec = synth::PlantSpec::load(cfg.spec);
    synth::write_dataset(cfg.out, spec);
    const auto ds = data::load_dataset(data::Manifest::load(std::filesystem::path(cfg.out) / "manifest.json"));
    out << "wrote " << ds.manifest.activations.size() << " activation files, " << ds.response.cols()
        << " targets to " << cfg.out << "\n";
}

// ---------------------------------------------------------------- parsing

struct Flags {
    std::string config, manifest, out, lambda_grid, lambda_mode, level, roi_rule, windows, score, v1, metric, spec,
        halftimes;
    std::size_t folds = 0, inner_folds = 0, layers = 0;
    std::uint64_t seed = 0;
    double tmax_frac = 0, fdr_q = 0;
    int threads = 0;
    bool per_target = false, no_mask = false;
};

struct Options {
    std::map<std::string, CLI::Option*> by_name;
    bool given(const std::string& name) const {
        const auto it = by_name.find(name);
        return it != by_name.end() && it->second->count() > 0;
    }
};

void add_options(CLI::App* sub, Flags& f, Options& o) {
    o.by_name["config"] = sub->add_option("--config", f.config, "JSON config file (flags take precedence)");
    o.by_name["manifest"] = sub->add_option("--manifest", f.manifest, "Dataset manifest JSON");
    o.by_name["out"] = sub->add_option("--out", f.out, "Output directory");
    o.by_name["lambda-grid"] = sub->add_option("--lambda-grid", f.lambda_grid, "Comma-separated ascending lambdas");
    o.by_name["folds"] = sub->add_option("--folds", f.folds, "Outer cross-validation folds");
    o.by_name["inner-folds"] = sub->add_option("--inner-folds", f.inner_folds, "Inner folds for --lambda-mode kfold");
    o.by_name["seed"] = sub->add_option("--seed", f.seed, "Fold shuffle seed");
    o.by_name["lambda-mode"] = sub->add_option("--lambda-mode", f.lambda_mode, "gcv | kfold");
    o.by_name["lambda-per-target"] = sub->add_flag("--lambda-per-target", f.per_target, "Select lambda per target");
    o.by_name["level"] = sub->add_option("--level", f.level, "voxel | roi");
    o.by_name["tmax-frac"] = sub->add_option("--tmax-frac", f.tmax_frac, "T_max threshold fraction");
    o.by_name["fdr-q"] = sub->add_option("--fdr-q", f.fdr_q, "FDR level for target and ROI selection");
    o.by_name["no-mask"] = sub->add_flag("--no-mask", f.no_mask, "Keep targets that fail the FDR test");
    o.by_name["roi-rule"] = sub->add_option("--roi-rule", f.roi_rule, "test-then-average | average-then-test");
    o.by_name["threads"] = sub->add_option("--threads", f.threads, "Worker threads");
    o.by_name["layers"] = sub->add_option("--layers", f.layers, "Evenly subsample to N layers");
    o.by_name["v1"] = sub->add_option("--v1", f.v1, "V1 reference x,y,z in MNI mm");
    o.by_name["windows"] = sub->add_option("--windows", f.windows, "MEG time windows start:end,...");
    o.by_name["score"] = sub->add_option("--score", f.score, "auto | spatial | temporal | both");
    o.by_name["metric"] = sub->add_option("--metric", f.metric, "Half-time metric for property-corr");
    o.by_name["spec"] = sub->add_option("--spec", f.spec, "Plant spec JSON for synth");
    o.by_name["halftimes"] = sub->add_option("--halftimes", f.halftimes, "halftimes.csv from the halftime command");
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw ConfigError("--lambda-grid: not a number '" + part + "'");
        }
    }
    return out;
}

RunConfig resolve(const std::string& command, const Flags& f, const Options& o) {
    RunConfig cfg;
    cfg.command = command;
    if (o.given("config")) {
        std::ifstream in(f.config, std::ios::binary);
        if (!in) throw ConfigError("--config: cannot open " + f.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("--config: invalid JSON (" + std::string(e.what()) + ")");
        }
        cfg.apply_json(j);
    }
    if (o.given("manifest")) cfg.manifest = f.manifest;
    if (o.given("out")) cfg.out = f.out;
    if (o.given("lambda-grid")) cfg.lambda_grid = parse_grid(f.lambda_grid);
    if (o.given("folds")) cfg.folds = f.folds;
    if (o.given("inner-folds")) cfg.inner_folds = f.inner_folds;
    if (o.given("seed")) cfg.seed = f.seed;
    if (o.given("lambda-mode")) cfg.lambda_mode = parse_lambda_mode(f.lambda_mode);
    if (o.given("lambda-per-target")) cfg.lambda_per_target = f.per_target;
    if (o.given("level")) cfg.level = parse_level(f.level);
    if (o.given("tmax-frac")) cfg.tmax_frac = f.tmax_frac;
    if (o.given("fdr-q")) cfg.fdr_q = f.fdr_q;
    if (o.given("no-mask")) cfg.mask = !f.no_mask;
    if (o.given("roi-rule")) cfg.roi_rule = parse_roi_rule(f.roi_rule);
    if (o.given("threads")) cfg.threads = f.threads;
    if (o.given("layers")) cfg.layers = f.layers;
    if (o.given("v1")) cfg.v1 = parse_point(f.v1);
    if (o.given("windows")) cfg.windows = parse_windows(f.windows);
    if (o.given("score")) cfg.score = parse_score(f.score);
    if (o.given("metric")) cfg.metric = f.metric;
    if (o.given("spec")) cfg.spec = f.spec;
    if (o.given("halftimes")) cfg.halftimes = f.halftimes;
    cfg.validate();
    return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"neuralign: representational alignment between layered models and brain recordings"};
    app.require_subcommand(1);
    Flags flags;
    std::map<std::string, Options> options;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"encode", "Cross-validated ridge encoding scores per layer"},
        {"scores", "Spatial and/or temporal hierarchy scores"},
        {"halftime", "Half times of metric trajectories over training checkpoints"},
        {"property-corr", "Correlate ROI half times with cortical property maps"},
        {"synth", "Generate a synthetic dataset with planted ground truth"},
        {"validate", "Load and check a dataset manifest"}};
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        subs[name] = app.add_subcommand(name, help);
        add_options(subs[name], flags, options[name]);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    std::string command;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) command = name;
    }
    try {
        const auto start = std::chrono::steady_clock::now();
        const RunConfig cfg = resolve(command, flags, options[command]);
        if (command == "synth") {
            cmd_synth(cfg, out);
            return kOk;
        }
        std::filesystem::create_directories(cfg.out);
        Report report;
        report.config = cfg;
        if (command == "encode") cmd_encode(cfg, report);
        else if (command == "scores") cmd_scores(cfg, report);
        else if (command == "halftime") cmd_halftime(cfg, report);
        else if (command == "property-corr") cmd_property_corr(cfg, report);
        else cmd_validate(cfg, report);
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.write(cfg.out);
        for (const auto& w : report.warnings) err << "warning: " << w << "\n";
        out << command << ": wrote " << (std::filesystem::path(cfg.out) / "report.json").string() << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace neuralign::cli
