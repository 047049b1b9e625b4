#pragma once

#include "neuralign/cli/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace neuralign::cli {

constexpr int kReportSchema = 1;

/// report.json: {schema, command, config, results, warnings, runtime}. Only
/// `runtime` (wall clock, threads, output directory) may differ between
/// identical runs.
struct Report {
    RunConfig config;
    nlohmann::ordered_json results = nlohmann::ordered_json::object();
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
    nlohmann::ordered_json payload() const;
    nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

/// Shortest round-trip decimal, "nan" for NaN.
std::string format_number(double v);

/// Comma-separated file with a fixed header row.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Parses a CSV with header; returns rows as maps keyed by column name.
std::vector<std::map<std::string, std::string>> read_csv_records(const std::filesystem::path& path);

/// JSON number, or null when not finite.
nlohmann::ordered_json number_or_null(double v);

}  // namespace neuralign::cli
