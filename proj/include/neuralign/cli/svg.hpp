#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace neuralign::cli::svg {

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
};

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Scatter with an optional least-squares line. Non-finite points are skipped.
std::string scatter(const Axes& axes, const std::vector<double>& x, const std::vector<double>& y, bool fit_line);

/// One polyline with markers per series, legend on the right.
std::string lines(const Axes& axes, const std::vector<Series>& series);

/// 6 significant digits, no exponent noise for integers.
std::string num(double v);

void write(const std::filesystem::path& path, const std::string& svg);

}  // namespace neuralign::cli::svg
