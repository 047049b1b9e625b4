#include "neuralign/synth.hpp"

#include "neuralign/errors.hpp"
#include "neuralign/matrix_io.hpp"
#include "neuralign/random.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace neuralign::synth {
namespace {

using json = nlohmann::ordered_json;
constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::hierarchical: return "hierarchical";
        case Kind::temporal: return "temporal";
        case Kind::trajectory: return "trajectory";
    }
    return "";
}

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Matrix zscore(const Matrix& m) { return numeric::center_standardize(m, numeric::ScaleMode::zscore).values; }

Matrix random_orthogonal(Rng& rng, Eigen::Index d) {
    const Matrix g = gaussian(rng, d, d);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    return q;
}

// Round to float32 so in-memory data equals what the files hold.
void float_round(Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data::widen(data::narrow(m.data()[i]));
}

std::string roi_name(std::size_t layer) {
    static const char* names[] = {"V1", "V2", "V3", "hV4", "LO", "PHC", "IPS", "FEF"};
    if (layer < std::size(names)) return names[layer];
    return "ROI" + std::to_string(layer);
}

std::vector<std::string> stimulus_ids(std::size_t n) {
    std::vector<std::string> ids;
    const int width = static_cast<int>(std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%0*zu", width, i);
        ids.push_back(buf);
    }
    return ids;
}

metrics::LayerActivations planted_layers(const PlantSpec& spec, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(spec.n_stimuli);
    const auto d = static_cast<Eigen::Index>(spec.features_per_layer);
    const double keep = std::sqrt(1.0 - spec.fresh_fraction);
    const double fresh = std::sqrt(spec.fresh_fraction);
    metrics::LayerActivations model;
    model.model_tag = "synth";
    Matrix x = zscore(gaussian(rng, n, d));
    for (std::size_t k = 0; k < spec.n_layers; ++k) {
        if (k > 0) {
            const Matrix q = random_orthogonal(rng, d);
            const Matrix h = zscore((x * q).cwiseMax(0.0));
            x = keep * h + fresh * zscore(gaussian(rng, n, d));
        }
        model.layers.push_back({spec.depth(k), x});
    }
    return model;
}

Vector readout(const Matrix& x, Rng& rng) {
    const Matrix w = gaussian(rng, x.cols(), 1);
    return zscore(x * w).col(0);
}

json vec3(const Eigen::Vector3d& v) { return json::array({v(0), v(1), v(2)}); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw ConfigError("write failed for " + path.string());
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + key + ": wrong type");
    }
}

std::vector<double> rate_list(const json& j) {
    if (!j.is_array()) throw ConfigError("plant spec.trajectory: expected an array of rates");
    std::vector<double> rates;
    for (const auto& v : j) {
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "Infinity")) {
            rates.push_back(kInf);
        } else if (v.is_number()) {
            rates.push_back(v.get<double>());
        } else {
            throw ConfigError("plant spec.trajectory: rates must be numbers or \"inf\"");
        }
    }
    return rates;
}

}  // namespace

PlantSpec PlantSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("plant spec: invalid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw ConfigError("plant spec: top level must be an object");
    PlantSpec s;
    const std::string w = "plant spec.";
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") {
            const auto k = get<std::string>(j, "kind", w);
            if (k == "hierarchical") s.kind = Kind::hierarchical;
            else if (k == "temporal") s.kind = Kind::temporal;
            else if (k == "trajectory") s.kind = Kind::trajectory;
            else throw ConfigError(w + "kind: expected hierarchical, temporal or trajectory");
        } else if (key == "n_stimuli" || key == "n_layers" || key == "features_per_layer" ||
                   key == "targets_per_layer") {
            if (!value.is_number_integer() || value.get<long long>() < 0) {
                throw ConfigError(w + key + ": expected a non-negative integer");
            }
            const auto v = value.get<std::size_t>();
            if (key == "n_stimuli") s.n_stimuli = v;
            else if (key == "n_layers") s.n_layers = v;
            else if (key == "features_per_layer") s.features_per_layer = v;
            else s.targets_per_layer = v;
        } else if (key == "noise_sd") {
            s.noise_sd = get<double>(j, "noise_sd", w);
        } else if (key == "hierarchy_slope") {
            s.hierarchy_slope = get<double>(j, "hierarchy_slope", w);
        } else if (key == "temporal_peaks") {
            s.temporal_peaks = get<double>(j, "temporal_peaks", w);
        } else if (key == "trajectory") {
            s.trajectory = rate_list(value);
        } else if (key == "checkpoints") {
            s.checkpoints = get<std::vector<double>>(j, "checkpoints", w);
        } else if (key == "seed") {
            if (!value.is_number_integer() || value.get<long long>() < 0) {
                throw ConfigError(w + "seed: expected a non-negative integer");
            }
            s.seed = value.get<std::uint64_t>();
        } else if (key == "fresh_fraction") {
            s.fresh_fraction = get<double>(j, "fresh_fraction", w);
        } else if (key == "v1_reference") {
            const auto v = get<std::vector<double>>(j, "v1_reference", w);
            if (v.size() != 3) throw ConfigError(w + "v1_reference: need 3 values");
            s.v1_reference = Eigen::Vector3d(v[0], v[1], v[2]);
        } else if (key == "property_noise_sd") {
            s.property_noise_sd = get<double>(j, "property_noise_sd", w);
        } else if (key == "temporal") {
            if (!value.is_object()) throw ConfigError(w + "temporal: expected an object");
            const std::string tw = w + "temporal.";
            for (const auto& [tk, tv] : value.items()) {
                if (tk == "onset") s.temporal.onset = get<double>(value, "onset", tw);
                else if (tk == "time_start") s.temporal.time_start = get<double>(value, "time_start", tw);
                else if (tk == "time_step") s.temporal.time_step = get<double>(value, "time_step", tw);
                else if (tk == "width") s.temporal.width = get<double>(value, "width", tw);
                else if (tk == "gain") s.temporal.gain = get<double>(value, "gain", tw);
                else if (tk == "n_times") {
                    if (!tv.is_number_integer() || tv.get<long long>() < 0) {
                        throw ConfigError(tw + "n_times: expected a non-negative integer");
                    }
                    s.temporal.n_times = tv.get<std::size_t>();
                } else {
                    throw ConfigError(tw + tk + ": unknown field");
                }
            }
        } else {
            throw ConfigError(w + key + ": unknown field");
        }
    }
    s.validate();
    return s;
}

PlantSpec PlantSpec::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("plant spec: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

std::string PlantSpec::to_json() const {
    json j;
    j["kind"] = kind_name(kind);
    j["n_stimuli"] = n_stimuli;
    j["n_layers"] = n_layers;
    j["features_per_layer"] = features_per_layer;
    j["targets_per_layer"] = targets_per_layer;
    j["noise_sd"] = noise_sd;
    j["hierarchy_slope"] = hierarchy_slope;
    j["temporal_peaks"] = temporal_peaks;
    json rates = json::array();
    for (double r : trajectory) rates.push_back(std::isinf(r) ? json("inf") : json(r));
    j["trajectory"] = rates;
    j["checkpoints"] = checkpoints;
    j["seed"] = seed;
    j["fresh_fraction"] = fresh_fraction;
    j["v1_reference"] = vec3(v1_reference);
    j["temporal"] = {{"onset", temporal.onset},         {"time_start", temporal.time_start},
                     {"time_step", temporal.time_step}, {"n_times", temporal.n_times},
                     {"width", temporal.width},         {"gain", temporal.gain}};
    j["property_noise_sd"] = property_noise_sd;
    return j.dump(2) + "\n";
}

void PlantSpec::validate() const {
    const std::string w = "plant spec.";
    if (n_stimuli < 10) throw ConfigError(w + "n_stimuli: need at least 10");
    if (n_layers < 1) throw ConfigError(w + "n_layers: need at least 1");
    if (features_per_layer < 1) throw ConfigError(w + "features_per_layer: need at least 1");
    if (targets_per_layer < 1) throw ConfigError(w + "targets_per_layer: need at least 1");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError(w + "noise_sd: must be finite and >= 0");
    if (!std::isfinite(hierarchy_slope) || hierarchy_slope < 0.0) {
        throw ConfigError(w + "hierarchy_slope: must be finite and >= 0");
    }
    if (!std::isfinite(temporal_peaks)) throw ConfigError(w + "temporal_peaks: must be finite");
    if (!(fresh_fraction >= 0.0 && fresh_fraction <= 1.0)) throw ConfigError(w + "fresh_fraction: outside [0,1]");
    if (!v1_reference.allFinite()) throw ConfigError(w + "v1_reference: must be finite");
    if (!(property_noise_sd >= 0.0) || !std::isfinite(property_noise_sd)) {
        throw ConfigError(w + "property_noise_sd: must be finite and >= 0");
    }
    if (!trajectory.empty() && trajectory.size() != n_layers) {
        throw ConfigError(w + "trajectory: need one rate per layer (" + std::to_string(n_layers) + ")");
    }
    for (double r : trajectory) {
        if (!(r >= 0.0)) throw ConfigError(w + "trajectory: rates must be >= 0");
    }
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (!(checkpoints[i] >= 0.0 && checkpoints[i] <= 1.0)) throw ConfigError(w + "checkpoints: outside [0,1]");
        if (i > 0 && !(checkpoints[i] > checkpoints[i - 1])) {
            throw ConfigError(w + "checkpoints: must be strictly increasing");
        }
    }
    if (kind == Kind::trajectory && !checkpoints.empty() && checkpoints.size() < 2) {
        throw ConfigError(w + "checkpoints: a trajectory needs at least 2");
    }
    if (kind == Kind::temporal) {
        const std::string tw = w + "temporal.";
        if (temporal.n_times < 1) throw ConfigError(tw + "n_times: need at least 1");
        if (!(temporal.time_step > 0.0) || !std::isfinite(temporal.time_step)) {
            throw ConfigError(tw + "time_step: must be positive");
        }
        if (!(temporal.width > 0.0) || !std::isfinite(temporal.width)) throw ConfigError(tw + "width: must be positive");
        if (!(temporal.gain > 0.0) || !std::isfinite(temporal.gain)) throw ConfigError(tw + "gain: must be positive");
        if (!std::isfinite(temporal.onset) || !std::isfinite(temporal.time_start)) {
            throw ConfigError(tw + "onset/time_start: must be finite");
        }
        for (std::size_t k = 0; k < n_layers; ++k) {
            const double depth_term = temporal_peaks >= 0.0 ? depth(k) : 1.0 - depth(k);
            const double peak = temporal.onset + std::abs(temporal_peaks) * depth_term;
            const double idx = std::round((peak - temporal.time_start) / temporal.time_step);
            if (idx < 0.0 || idx >= static_cast<double>(temporal.n_times)) {
                throw ConfigError(w + "temporal_peaks: planted peak outside the time grid");
            }
        }
    }
}

double PlantSpec::depth(std::size_t layer) const {
    return n_layers == 1 ? 0.0 : static_cast<double>(layer) / static_cast<double>(n_layers - 1);
}

std::vector<double> PlantSpec::rates() const {
    if (!trajectory.empty()) return trajectory;
    std::vector<double> r;
    for (std::size_t k = 0; k < n_layers; ++k) r.push_back(20.0 * std::pow(0.5 / 20.0, depth(k)));
    return r;
}

std::vector<double> PlantSpec::checkpoint_steps() const {
    if (!checkpoints.empty()) return checkpoints;
    std::vector<double> s;
    for (int i = 0; i < 12; ++i) s.push_back(static_cast<double>(i) / 11.0);
    return s;
}

double planted_alpha(double rate, double step) {
    if (std::isinf(rate)) return 1.0;
    if (rate == 0.0) return step;
    return std::expm1(-rate * step) / std::expm1(-rate);
}

double closed_form_half_time(double rate) {
    // R(a) = a / sqrt(a^2 + (1-a)^2) is half its final value 1 at a = 1/(1+sqrt 3).
    const double a_half = 1.0 / (1.0 + std::sqrt(3.0));
    if (std::isinf(rate)) return 0.0;
    if (rate == 0.0) return a_half;
    return -std::log1p(a_half * std::expm1(-rate)) / rate;
}

HierarchicalData gen_hierarchical(const PlantSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    HierarchicalData out;
    out.model = planted_layers(spec, rng);

    const std::size_t per = spec.targets_per_layer;
    const std::size_t m = spec.n_layers * per;
    const auto n = static_cast<Eigen::Index>(spec.n_stimuli);
    out.response.resize(n, static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t layer = j / per;
        out.response.col(static_cast<Eigen::Index>(j)) = readout(out.model.layers[layer].activations, rng);
    }
    if (spec.noise_sd > 0.0) out.response += spec.noise_sd * gaussian(rng, n, static_cast<Eigen::Index>(m));

    // Shared unit directions around a posterior-to-anterior axis, rotated per ROI.
    const Eigen::Vector3d axis = Eigen::Vector3d(0.0, 1.0, 0.3).normalized();
    std::vector<Eigen::Vector3d> pattern;
    for (std::size_t i = 0; i < per; ++i) {
        const Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal());
        pattern.push_back((axis + 0.3 * g).normalized());
    }
    out.geometry.coordinates.resize(static_cast<Eigen::Index>(m), 3);
    out.geometry.v1_reference = spec.v1_reference;
    for (std::size_t layer = 0; layer < spec.n_layers; ++layer) {
        Eigen::Matrix3d rot = random_orthogonal(rng, 3);
        if (rot.determinant() < 0) rot.col(0) *= -1.0;
        const double radius = spec.hierarchy_slope * spec.depth(layer);
        data::RoiEntry roi;
        roi.name = roi_name(layer);
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t j = layer * per + i;
            const Eigen::Vector3d c = spec.v1_reference + radius * (rot * pattern[i]);
            out.geometry.coordinates.row(static_cast<Eigen::Index>(j)) = c.transpose();
            out.geometry.roi_labels.push_back(roi.name);
            roi.targets.push_back(j);
            roi.centroid += c;
            out.truth.target_layer.push_back(layer);
            out.truth.target_depth.push_back(spec.depth(layer));
            out.truth.target_distance.push_back(radius);
        }
        roi.centroid /= static_cast<double>(per);
        out.rois.rois.push_back(std::move(roi));
    }
    out.truth.snr = spec.noise_sd > 0.0 ? 1.0 / spec.noise_sd : kInf;

    for (auto& l : out.model.layers) float_round(l.activations);
    float_round(out.response);
    return out;
}

TemporalData gen_temporal(const PlantSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    TemporalData out;
    out.model = planted_layers(spec, rng);
    const auto& tg = spec.temporal;
    const std::size_t channels = spec.n_layers * spec.targets_per_layer;
    const std::size_t nt = tg.n_times;
    const auto n = static_cast<Eigen::Index>(spec.n_stimuli);

    auto& resp = out.response;
    resp.channels = channels;
    for (std::size_t i = 0; i < nt; ++i) resp.times.push_back(tg.time_start + static_cast<double>(i) * tg.time_step);

    std::vector<long long> peak_index;
    for (std::size_t k = 0; k < spec.n_layers; ++k) {
        const double depth_term = spec.temporal_peaks >= 0.0 ? spec.depth(k) : 1.0 - spec.depth(k);
        const double peak = tg.onset + std::abs(spec.temporal_peaks) * depth_term;
        peak_index.push_back(std::llround((peak - tg.time_start) / tg.time_step));
        out.truth.peak_times.push_back(resp.times[static_cast<std::size_t>(peak_index.back())]);
    }

    resp.data.resize(n, static_cast<Eigen::Index>(channels * nt));
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t layer = c / spec.targets_per_layer;
        out.truth.channel_layer.push_back(layer);
        const Vector signal = readout(out.model.layers[layer].activations, rng);
        const Vector background = zscore(gaussian(rng, n, 1)).col(0);
        for (std::size_t t = 0; t < nt; ++t) {
            // Offsets are integer multiples of the step, so the gain is exactly symmetric about the peak.
            const double offset = static_cast<double>(static_cast<long long>(t) - peak_index[layer]) * tg.time_step;
            const double g = tg.gain * std::exp(-offset * offset / (2.0 * tg.width * tg.width));
            resp.data.col(static_cast<Eigen::Index>(c * nt + t)) = g * signal + background;
        }
    }
    if (spec.noise_sd > 0.0) resp.data += spec.noise_sd * gaussian(rng, n, resp.data.cols());
    out.truth.snr_at_peak = spec.noise_sd > 0.0 ? std::sqrt(tg.gain * tg.gain + 1.0) / spec.noise_sd : kInf;

    for (auto& l : out.model.layers) float_round(l.activations);
    float_round(resp.data);
    return out;
}

TrajectoryData gen_trajectory(const PlantSpec& spec) {
    auto base = gen_hierarchical(spec);
    Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ull);
    TrajectoryData out;
    out.response = std::move(base.response);
    out.geometry = std::move(base.geometry);
    out.rois = std::move(base.rois);
    out.hierarchy = std::move(base.truth);
    out.truth.checkpoints = spec.checkpoint_steps();
    out.truth.rates = spec.rates();

    const std::size_t n = spec.n_stimuli;
    std::vector<std::vector<std::size_t>> perms;
    for (std::size_t k = 0; k < spec.n_layers; ++k) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        rng.shuffle(p);
        perms.push_back(std::move(p));
        out.truth.half_times.push_back(closed_form_half_time(out.truth.rates[k]));
    }
    for (double s : out.truth.checkpoints) {
        metrics::LayerActivations model;
        model.model_tag = base.model.model_tag;
        model.checkpoint_step = s;
        for (std::size_t k = 0; k < spec.n_layers; ++k) {
            const Matrix& final_x = base.model.layers[k].activations;
            Matrix shuffled(final_x.rows(), final_x.cols());
            for (std::size_t i = 0; i < n; ++i) {
                shuffled.row(static_cast<Eigen::Index>(i)) = final_x.row(static_cast<Eigen::Index>(perms[k][i]));
            }
            const double a = planted_alpha(out.truth.rates[k], s);
            Matrix x = a * final_x + (1.0 - a) * shuffled;
            float_round(x);
            model.layers.push_back({base.model.layers[k].depth, std::move(x)});
        }
        out.models.push_back(std::move(model));
    }

    const std::pair<const char*, double> planted[] = {{"expansion", 1.0}, {"myelin", -1.0}};
    for (const auto& [name, slope] : planted) {
        PlantedProperty p;
        p.slope = slope;
        for (std::size_t k = 0; k < spec.n_layers; ++k) {
            p.values.push_back(slope * out.truth.half_times[k] + spec.property_noise_sd * rng.normal());
            out.rois.rois[k].properties[name] = p.values.back();
        }
        try {
            p.planted_r = numeric::pearson(out.truth.half_times, p.values);
        } catch (const NumericalError&) {
            p.planted_r = std::numeric_limits<double>::quiet_NaN();
        }
        out.truth.properties[name] = std::move(p);
    }
    return out;
}

namespace {

json hierarchy_truth_json(const HierarchicalTruth& t, const data::RoiTable& rois, const PlantSpec& spec) {
    json j;
    j["target_layer"] = t.target_layer;
    j["target_depth"] = t.target_depth;
    j["target_distance_mm"] = t.target_distance;
    j["v1_reference"] = vec3(spec.v1_reference);
    j["snr"] = finite_or_null(t.snr);
    json r = json::array();
    for (std::size_t k = 0; k < rois.rois.size(); ++k) {
        r.push_back({{"roi", rois.rois[k].name}, {"layer", k}, {"depth", spec.depth(k)}});
    }
    j["rois"] = r;
    return j;
}

void write_layers(const std::filesystem::path& dir, const metrics::LayerActivations& model, const std::string& prefix,
                  double checkpoint, data::Manifest& manifest) {
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        char name[64];
        std::snprintf(name, sizeof name, "%slayer%02zu.nmb", prefix.c_str(), k);
        data::write_matrix(dir / name, model.layers[k].activations);
        manifest.activations.push_back({model.layers[k].depth, checkpoint, name, {}, model.model_tag});
    }
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const PlantSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(dir);
    data::Manifest manifest;
    manifest.stimulus_ids = stimulus_ids(spec.n_stimuli);
    json truth;
    truth["kind"] = kind_name(spec.kind);
    truth["seed"] = spec.seed;

    if (spec.kind == Kind::hierarchical) {
        const auto d = gen_hierarchical(spec);
        write_layers(dir, d.model, "", 1.0, manifest);
        data::write_matrix(dir / "response.nmb", d.response);
        data::write_geometry(dir / "geometry.json", d.geometry);
        data::write_roi_table(dir / "rois.csv", d.rois);
        manifest.response = {data::Modality::fmri, "response.nmb", "geometry.json", {}};
        manifest.roi_table = "rois.csv";
        truth["hierarchy"] = hierarchy_truth_json(d.truth, d.rois, spec);
    } else if (spec.kind == Kind::temporal) {
        const auto d = gen_temporal(spec);
        write_layers(dir, d.model, "", 1.0, manifest);
        data::write_tensor(dir / "response.nmb", d.response.to_tensor());
        data::write_times(dir / "times.json", d.response.times);
        manifest.response = {data::Modality::meg, "response.nmb", "times.json", {}};
        truth["temporal"] = {{"channel_layer", d.truth.channel_layer},
                             {"peak_times", d.truth.peak_times},
                             {"time_step", spec.temporal.time_step},
                             {"snr_at_peak", finite_or_null(d.truth.snr_at_peak)}};
    } else {
        const auto d = gen_trajectory(spec);
        for (std::size_t c = 0; c < d.models.size(); ++c) {
            char prefix[32];
            std::snprintf(prefix, sizeof prefix, "ckpt%02zu_", c);
            write_layers(dir, d.models[c], prefix, d.truth.checkpoints[c], manifest);
        }
        data::write_matrix(dir / "response.nmb", d.response);
        data::write_geometry(dir / "geometry.json", d.geometry);
        data::write_roi_table(dir / "rois.csv", d.rois);
        manifest.response = {data::Modality::fmri, "response.nmb", "geometry.json", {}};
        manifest.roi_table = "rois.csv";
        truth["hierarchy"] = hierarchy_truth_json(d.hierarchy, d.rois, spec);
        json rates = json::array();
        for (double r : d.truth.rates) rates.push_back(std::isinf(r) ? json("inf") : json(r));
        json props;
        for (const auto& [name, p] : d.truth.properties) {
            props[name] = {{"slope", p.slope}, {"values", p.values}, {"planted_r", finite_or_null(p.planted_r)}};
        }
        json per_roi = json::object();
        for (std::size_t k = 0; k < d.rois.rois.size(); ++k) per_roi[d.rois.rois[k].name] = d.truth.half_times[k];
        truth["trajectory"] = {{"checkpoints", d.truth.checkpoints},
                               {"rates", rates},
                               {"half_times", d.truth.half_times},
                               {"roi_half_times", per_roi},
                               {"properties", props}};
    }
    manifest.validate();
    write_text(dir / "manifest.json", manifest.dump());
    write_text(dir / "spec.json", spec.to_json());
    write_text(dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace neuralign::synth
