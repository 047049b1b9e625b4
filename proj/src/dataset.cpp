#include "neuralign/dataset.hpp"

#include "neuralign/errors.hpp"
#include "neuralign/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace neuralign::data {
namespace {

using json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string read_text(const std::filesystem::path& path, const std::string& what) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(what + ": cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw ConfigError("write failed for " + path.string());
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": invalid JSON (" + e.what() + ")");
    }
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T optional_field(const json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return field<T>(j, key, where);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_number(const std::string& cell, const std::string& where, bool allow_missing) {
    const std::string t = trim(cell);
    if (allow_missing && (t.empty() || t == "nan" || t == "NaN" || t == "NA")) return kNaN;
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size() || !std::isfinite(v)) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not a number '" + t + "'");
    }
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& what) {
    std::istringstream in(read_text(path, what));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        for (auto& c : cells) c = trim(c);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw ConfigError(what + " " + path.string() + ": empty file");
    return rows;
}

std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 10) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
    if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

}  // namespace

const char* to_string(Modality m) { return m == Modality::fmri ? "fmri" : "meg"; }

std::vector<double> distance_from_v1(const Matrix& coordinates, const Eigen::Vector3d& reference) {
    if (coordinates.cols() != 3) throw ConfigError("geometry: coordinates must have 3 columns");
    if (!reference.allFinite() || !numeric::all_finite(coordinates)) {
        throw ConfigError("geometry: coordinates must be finite");
    }
    std::vector<double> d(static_cast<std::size_t>(coordinates.rows()));
    for (Eigen::Index i = 0; i < coordinates.rows(); ++i) {
        d[static_cast<std::size_t>(i)] = (coordinates.row(i).transpose() - reference).norm();
    }
    return d;
}

std::vector<double> distance_from_v1(const metrics::VoxelGeometry& geometry) {
    if (geometry.coordinates.rows() == 0) throw ConfigError("geometry: no coordinates");
    return distance_from_v1(geometry.coordinates, geometry.v1());
}

Manifest Manifest::parse(const std::string& json_text, const std::filesystem::path& base_dir) {
    const json j = parse_json(json_text, "manifest");
    if (!j.is_object()) throw ConfigError("manifest: top level must be an object");
    Manifest m;
    m.base_dir = base_dir;
    m.schema = field<int>(j, "schema", "manifest");
    if (m.schema != 1) throw ConfigError("manifest.schema: unsupported version " + std::to_string(m.schema));
    m.stimulus_ids = field<std::vector<std::string>>(j, "stimulus_ids", "manifest");
    if (!j.contains("activations") || !j.at("activations").is_array()) {
        throw ConfigError("manifest.activations: missing or not an array");
    }
    std::size_t i = 0;
    for (const auto& a : j.at("activations")) {
        const std::string where = "manifest.activations[" + std::to_string(i++) + "]";
        ActivationEntry e;
        e.depth = field<double>(a, "depth", where);
        e.checkpoint = optional_field<double>(a, "checkpoint", where, 1.0);
        e.path = field<std::string>(a, "path", where);
        e.stimulus_ids = optional_field<std::vector<std::string>>(a, "stimulus_ids", where, {});
        e.model_tag = optional_field<std::string>(a, "model_tag", where, "");
        m.activations.push_back(std::move(e));
    }
    if (!j.contains("response") || !j.at("response").is_object()) {
        throw ConfigError("manifest.response: missing or not an object");
    }
    const auto& r = j.at("response");
    const auto modality = field<std::string>(r, "modality", "manifest.response");
    if (modality == "fmri") {
        m.response.modality = Modality::fmri;
    } else if (modality == "meg") {
        m.response.modality = Modality::meg;
    } else {
        throw ConfigError("manifest.response.modality: expected fmri or meg, got '" + modality + "'");
    }
    m.response.path = field<std::string>(r, "path", "manifest.response");
    m.response.metadata = optional_field<std::string>(r, "metadata", "manifest.response", "");
    m.response.stimulus_ids = optional_field<std::vector<std::string>>(r, "stimulus_ids", "manifest.response", {});
    m.roi_table = optional_field<std::string>(j, "roi_table", "manifest", "");
    m.property_maps = optional_field<std::vector<std::string>>(j, "property_maps", "manifest", {});
    m.validate();
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
    if (path.empty()) throw ConfigError("manifest: no path given");
    if (!std::filesystem::exists(path)) throw ConfigError("manifest: " + path.string() + " does not exist");
    return parse(read_text(path, "manifest"), path.parent_path());
}

std::string Manifest::dump() const {
    json j;
    j["schema"] = schema;
    j["stimulus_ids"] = stimulus_ids;
    j["activations"] = json::array();
    for (const auto& a : activations) {
        json e;
        e["depth"] = a.depth;
        e["checkpoint"] = a.checkpoint;
        e["path"] = a.path;
        if (!a.stimulus_ids.empty()) e["stimulus_ids"] = a.stimulus_ids;
        if (!a.model_tag.empty()) e["model_tag"] = a.model_tag;
        j["activations"].push_back(e);
    }
    json r;
    r["modality"] = to_string(response.modality);
    r["path"] = response.path;
    if (!response.metadata.empty()) r["metadata"] = response.metadata;
    if (!response.stimulus_ids.empty()) r["stimulus_ids"] = response.stimulus_ids;
    j["response"] = r;
    if (!roi_table.empty()) j["roi_table"] = roi_table;
    if (!property_maps.empty()) j["property_maps"] = property_maps;
    return j.dump(2) + "\n";
}

void Manifest::validate() const {
    if (schema != 1) throw ConfigError("manifest.schema: unsupported version " + std::to_string(schema));
    if (stimulus_ids.empty()) throw ConfigError("manifest.stimulus_ids: empty");
    std::set<std::string> seen;
    for (const auto& id : stimulus_ids) {
        if (id.empty()) throw ConfigError("manifest.stimulus_ids: empty ID");
        if (!seen.insert(id).second) throw ConfigError("manifest.stimulus_ids: duplicate ID '" + id + "'");
    }
    if (activations.empty()) throw ConfigError("manifest.activations: empty");
    std::set<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < activations.size(); ++i) {
        const auto& a = activations[i];
        const std::string where = "manifest.activations[" + std::to_string(i) + "]";
        if (!(a.depth >= 0.0 && a.depth <= 1.0)) throw ConfigError(where + ".depth: outside [0,1]");
        if (!std::isfinite(a.checkpoint)) throw ConfigError(where + ".checkpoint: not finite");
        if (a.path.empty()) throw ConfigError(where + ".path: empty");
        if (!pairs.insert({a.depth, a.checkpoint}).second) {
            throw ConfigError(where + ": duplicate (depth, checkpoint) pair");
        }
    }
    for (double c : checkpoints()) {
        std::vector<double> depths;
        for (const auto& a : activations) {
            if (a.checkpoint == c) depths.push_back(a.depth);
        }
        std::sort(depths.begin(), depths.end());
        if (depths.size() > 1 && (depths.front() != 0.0 || depths.back() != 1.0)) {
            throw ConfigError("manifest.activations: checkpoint " + fmt(c) + " must span depths 0 to 1");
        }
    }
    if (response.path.empty()) throw ConfigError("manifest.response.path: empty");
}

std::filesystem::path Manifest::resolve(const std::string& relative) const {
    const std::filesystem::path p(relative);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<double> Manifest::checkpoints() const {
    std::set<double> s;
    for (const auto& a : activations) s.insert(a.checkpoint);
    return {s.begin(), s.end()};
}

Matrix align_rows(const Matrix& m, const std::vector<std::string>& row_ids, const std::vector<std::string>& order,
                  const std::string& what) {
    if (row_ids.empty()) {
        if (static_cast<std::size_t>(m.rows()) != order.size()) {
            throw AlignmentError(what + ": " + std::to_string(m.rows()) + " rows but the manifest lists " +
                                 std::to_string(order.size()) + " stimuli");
        }
        return m;
    }
    if (static_cast<std::size_t>(m.rows()) != row_ids.size()) {
        throw AlignmentError(what + ": " + std::to_string(m.rows()) + " rows but " + std::to_string(row_ids.size()) +
                             " stimulus IDs");
    }
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        if (!index.emplace(row_ids[i], static_cast<Eigen::Index>(i)).second) {
            throw AlignmentError(what + ": duplicate stimulus ID '" + row_ids[i] + "'");
        }
    }
    std::vector<std::string> missing;
    std::set<std::string> wanted(order.begin(), order.end());
    for (const auto& id : order) {
        if (!index.count(id)) missing.push_back(id);
    }
    if (missing.size() == order.size()) {
        throw AlignmentError(what + ": stimulus IDs are disjoint from the manifest; file has {" + join_ids(row_ids) +
                             "}, manifest has {" + join_ids(order) + "}");
    }
    if (!missing.empty()) throw AlignmentError(what + ": missing stimuli " + join_ids(missing));
    std::vector<std::string> surplus;
    for (const auto& id : row_ids) {
        if (!wanted.count(id)) surplus.push_back(id);
    }
    if (!surplus.empty()) throw AlignmentError(what + ": stimuli not in the manifest " + join_ids(surplus));
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(index.at(order[i]));
    return out;
}

void RoiTable::validate(std::size_t n_targets, const Matrix* coordinates) const {
    std::set<std::string> names;
    std::vector<int> owner(n_targets, -1);
    for (std::size_t r = 0; r < rois.size(); ++r) {
        const auto& roi = rois[r];
        if (roi.name.empty()) throw ConfigError("roi table: empty ROI name");
        if (!names.insert(roi.name).second) throw ConfigError("roi table: duplicate ROI '" + roi.name + "'");
        if (roi.targets.empty()) throw ConfigError("roi table: ROI '" + roi.name + "' has no targets");
        for (auto t : roi.targets) {
            if (t >= n_targets) {
                throw ConfigError("roi table: ROI '" + roi.name + "' target " + std::to_string(t) + " out of range");
            }
            if (owner[t] >= 0) {
                throw ConfigError("roi table: target " + std::to_string(t) + " is in both '" +
                                  rois[static_cast<std::size_t>(owner[t])].name + "' and '" + roi.name + "'");
            }
            owner[t] = static_cast<int>(r);
        }
        if (coordinates) {
            Eigen::Vector3d mean = Eigen::Vector3d::Zero();
            for (auto t : roi.targets) mean += coordinates->row(static_cast<Eigen::Index>(t)).transpose();
            mean /= static_cast<double>(roi.targets.size());
            if ((mean - roi.centroid).norm() > 1e-6 * (1.0 + mean.norm())) {
                throw ConfigError("roi table: centroid of '" + roi.name + "' differs from its member coordinates");
            }
        }
    }
}

std::vector<metrics::RoiGroup> RoiTable::groups() const {
    std::vector<metrics::RoiGroup> g;
    for (const auto& r : rois) g.push_back({r.name, r.targets, r.centroid});
    return g;
}

std::vector<std::string> RoiTable::property_names() const {
    std::vector<std::string> names;
    for (const auto& r : rois) {
        for (const auto& [k, v] : r.properties) {
            if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
        }
    }
    // standard properties first, in their documented order
    std::stable_sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        const auto& std_names = standard_properties();
        const auto ia = std::find(std_names.begin(), std_names.end(), a) - std_names.begin();
        const auto ib = std::find(std_names.begin(), std_names.end(), b) - std_names.begin();
        if (ia != ib) return ia < ib;
        return a < b;
    });
    return names;
}

const RoiEntry* RoiTable::find(const std::string& name) const {
    for (const auto& r : rois) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

RoiTable read_roi_table(const std::filesystem::path& path) {
    const auto rows = read_csv(path, "roi table");
    const auto& header = rows.front();
    const std::vector<std::string> fixed{"roi", "target_indices", "centroid_x", "centroid_y", "centroid_z"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
        throw ConfigError("roi table " + path.string() + ": header must start with roi,target_indices,centroid_x,"
                          "centroid_y,centroid_z");
    }
    RoiTable table;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::string where = "roi table " + path.string() + " line " + std::to_string(i + 1);
        if (row.size() != header.size()) throw ConfigError(where + ": expected " + std::to_string(header.size()) + " columns");
        RoiEntry e;
        e.name = row[0];
        for (const auto& idx : split(row[1], ';')) {
            const std::string t = trim(idx);
            if (t.empty()) continue;
            try {
                std::size_t used = 0;
                const unsigned long long v = std::stoull(t, &used);
                if (used != t.size() || t[0] == '-') throw std::invalid_argument(t);
                e.targets.push_back(static_cast<std::size_t>(v));
            } catch (const std::exception&) {
                throw ConfigError(where + ": bad target index '" + t + "'");
            }
        }
        for (int c = 0; c < 3; ++c) e.centroid(c) = parse_number(row[2 + static_cast<std::size_t>(c)], where, false);
        for (std::size_t c = fixed.size(); c < header.size(); ++c) {
            e.properties[header[c]] = parse_number(row[c], where + " column " + header[c], true);
        }
        table.rois.push_back(std::move(e));
    }
    return table;
}

void write_roi_table(const std::filesystem::path& path, const RoiTable& table) {
    const auto props = table.property_names();
    std::string out = "roi,target_indices,centroid_x,centroid_y,centroid_z";
    for (const auto& p : props) out += "," + p;
    out += "\n";
    for (const auto& r : table.rois) {
        out += r.name + ",";
        for (std::size_t i = 0; i < r.targets.size(); ++i) out += (i ? ";" : "") + std::to_string(r.targets[i]);
        for (int c = 0; c < 3; ++c) out += "," + fmt(r.centroid(c));
        for (const auto& p : props) {
            const auto it = r.properties.find(p);
            out += "," + (it == r.properties.end() ? std::string() : fmt(it->second));
        }
        out += "\n";
    }
    write_text(path, out);
}

void merge_property_map(RoiTable& table, const std::filesystem::path& path) {
    const auto rows = read_csv(path, "property map");
    const auto& header = rows.front();
    if (header.size() < 2 || header[0] != "roi") {
        throw ConfigError("property map " + path.string() + ": header must be roi,<property>...");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::string where = "property map " + path.string() + " line " + std::to_string(i + 1);
        if (row.size() != header.size()) throw ConfigError(where + ": expected " + std::to_string(header.size()) + " columns");
        auto it = std::find_if(table.rois.begin(), table.rois.end(), [&](const RoiEntry& r) { return r.name == row[0]; });
        if (it == table.rois.end()) throw ConfigError(where + ": unknown ROI '" + row[0] + "'");
        for (std::size_t c = 1; c < header.size(); ++c) it->properties[header[c]] = parse_number(row[c], where, true);
    }
    for (auto& r : table.rois) {
        for (std::size_t c = 1; c < header.size(); ++c) r.properties.try_emplace(header[c], kNaN);
    }
}

metrics::VoxelGeometry read_geometry(const std::filesystem::path& path) {
    const json j = parse_json(read_text(path, "geometry"), "geometry " + path.string());
    const std::string where = "geometry " + path.string();
    const auto coords = field<std::vector<std::vector<double>>>(j, "coordinates", where);
    metrics::VoxelGeometry g;
    g.coordinates.resize(static_cast<Eigen::Index>(coords.size()), 3);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i].size() != 3) throw ConfigError(where + ".coordinates[" + std::to_string(i) + "]: need 3 values");
        for (int c = 0; c < 3; ++c) g.coordinates(static_cast<Eigen::Index>(i), c) = coords[i][static_cast<std::size_t>(c)];
    }
    if (!numeric::all_finite(g.coordinates)) throw ConfigError(where + ".coordinates: non-finite value");
    g.roi_labels = optional_field<std::vector<std::string>>(j, "roi_labels", where, {});
    if (!g.roi_labels.empty() && g.roi_labels.size() != coords.size()) {
        throw ConfigError(where + ".roi_labels: one label per coordinate required");
    }
    if (j.contains("v1_reference") && !j.at("v1_reference").is_null()) {
        const auto ref = field<std::vector<double>>(j, "v1_reference", where);
        if (ref.size() != 3) throw ConfigError(where + ".v1_reference: need 3 values");
        g.v1_reference = Eigen::Vector3d(ref[0], ref[1], ref[2]);
    }
    return g;
}

void write_geometry(const std::filesystem::path& path, const metrics::VoxelGeometry& geometry) {
    json j;
    j["coordinates"] = json::array();
    for (Eigen::Index i = 0; i < geometry.coordinates.rows(); ++i) {
        j["coordinates"].push_back({geometry.coordinates(i, 0), geometry.coordinates(i, 1), geometry.coordinates(i, 2)});
    }
    if (!geometry.roi_labels.empty()) j["roi_labels"] = geometry.roi_labels;
    if (geometry.v1_reference) {
        const auto& r = *geometry.v1_reference;
        j["v1_reference"] = {r(0), r(1), r(2)};
    }
    write_text(path, j.dump(1) + "\n");
}

std::vector<double> read_times(const std::filesystem::path& path) {
    const json j = parse_json(read_text(path, "time axis"), "time axis " + path.string());
    return field<std::vector<double>>(j, "times", "time axis " + path.string());
}

void write_times(const std::filesystem::path& path, const std::vector<double>& times) {
    json j;
    j["times"] = times;
    write_text(path, j.dump() + "\n");
}

Dataset load_dataset(const Manifest& manifest) {
    manifest.validate();
    Dataset ds;
    ds.manifest = manifest;
    ds.modality = manifest.response.modality;
    ds.checkpoints = manifest.checkpoints();
    const auto& order = manifest.stimulus_ids;

    for (double c : ds.checkpoints) {
        metrics::LayerActivations model;
        model.checkpoint_step = c;
        std::vector<const ActivationEntry*> entries;
        for (const auto& a : manifest.activations) {
            if (a.checkpoint == c) entries.push_back(&a);
        }
        std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->depth < b->depth; });
        for (const auto* e : entries) {
            const Matrix raw = read_matrix(manifest.resolve(e->path));
            model.layers.push_back({e->depth, align_rows(raw, e->stimulus_ids, order, "activations " + e->path)});
            if (model.model_tag.empty()) model.model_tag = e->model_tag;
        }
        model.validate();
        ds.models.push_back(std::move(model));
    }

    const auto resp_path = manifest.resolve(manifest.response.path);
    const std::string resp_label = "response " + manifest.response.path;
    if (ds.modality == Modality::fmri) {
        ds.response = align_rows(read_matrix(resp_path), manifest.response.stimulus_ids, order, resp_label);
        if (!manifest.response.metadata.empty()) {
            ds.geometry = read_geometry(manifest.resolve(manifest.response.metadata));
            if (ds.geometry->coordinates.rows() != ds.response.cols()) {
                throw ConfigError("geometry: " + std::to_string(ds.geometry->coordinates.rows()) +
                                  " coordinates for " + std::to_string(ds.response.cols()) + " targets");
            }
        }
    } else {
        if (manifest.response.metadata.empty()) throw ConfigError("manifest.response.metadata: MEG needs a time axis file");
        MegResponse meg = MegResponse::from_tensor(read_tensor(resp_path), read_times(manifest.resolve(manifest.response.metadata)));
        meg.data = align_rows(meg.data, manifest.response.stimulus_ids, order, resp_label);
        ds.response = meg.data;
        ds.meg = std::move(meg);
    }

    if (!manifest.roi_table.empty()) {
        RoiTable table = read_roi_table(manifest.resolve(manifest.roi_table));
        for (const auto& p : manifest.property_maps) merge_property_map(table, manifest.resolve(p));
        table.validate(static_cast<std::size_t>(ds.response.cols()), ds.geometry ? &ds.geometry->coordinates : nullptr);
        ds.rois = std::move(table);
    } else if (!manifest.property_maps.empty()) {
        throw ConfigError("manifest.property_maps: given without a roi_table");
    }
    return ds;
}

}  // namespace neuralign::data
