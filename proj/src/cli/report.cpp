#include "neuralign/cli/report.hpp"

#include "neuralign/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace neuralign::cli {

nlohmann::ordered_json Report::payload() const {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["command"] = config.command;
    j["config"] = config.to_json();
    j["results"] = results;
    j["warnings"] = warnings;
    return j;
}

nlohmann::ordered_json Report::to_json() const {
    auto j = payload();
    j["runtime"] = {{"wall_seconds", wall_seconds}, {"threads", config.threads}, {"out", config.out}};
    return j;
}

void Report::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + (dir / "report.json").string());
    f << to_json().dump(2) << "\n";
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
        f << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
}

std::vector<std::map<std::string, std::string>> read_csv_records(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path.string());
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (header.empty()) {
            header = cells;
            continue;
        }
        if (cells.size() != header.size()) {
            throw ConfigError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(header.size()));
        }
        std::map<std::string, std::string> rec;
        for (std::size_t i = 0; i < header.size(); ++i) rec[header[i]] = cells[i];
        out.push_back(std::move(rec));
    }
    if (header.empty()) throw ConfigError(path.string() + ": empty CSV");
    return out;
}

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace neuralign::cli
