#include "neuralign/meg.hpp"

#include "neuralign/errors.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace neuralign::data {
namespace {

constexpr double kTimeTol = 1e-9;

std::string fmt_seconds(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

double MegResponse::step() const { return times.size() < 2 ? 0.0 : times[1] - times[0]; }

void MegResponse::validate() const {
    if (times.empty() || channels == 0) throw ConfigError("meg response: empty channel or time axis");
    if (static_cast<std::size_t>(data.cols()) != channels * times.size()) {
        throw ConfigError("meg response: " + std::to_string(data.cols()) + " targets do not match " +
                          std::to_string(channels) + " channels x " + std::to_string(times.size()) + " times");
    }
    for (double t : times) {
        if (!std::isfinite(t)) throw ConfigError("meg response: non-finite time");
    }
    if (times.size() < 2) return;
    const double dt = step();
    if (!(dt > 0.0)) throw ConfigError("meg response: time axis must be ascending");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double d = times[i] - times[i - 1];
        if (!(d > 0.0)) throw ConfigError("meg response: time axis must be ascending");
        if (std::abs(d - dt) > 1e-6 * dt) throw ConfigError("meg response: time axis must be uniformly spaced");
    }
}

MegResponse MegResponse::from_tensor(const Tensor& t, std::vector<double> times) {
    if (t.dims.size() != 3) {
        throw ConfigError("meg response: expected a stimuli x channels x times tensor, got rank " +
                          std::to_string(t.dims.size()));
    }
    if (t.dims[2] != times.size()) {
        throw ConfigError("meg response: tensor has " + std::to_string(t.dims[2]) + " time samples, metadata lists " +
                          std::to_string(times.size()));
    }
    MegResponse r;
    r.channels = static_cast<std::size_t>(t.dims[1]);
    r.times = std::move(times);
    r.data.resize(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1] * t.dims[2]));
    std::copy(t.values.begin(), t.values.end(), r.data.data());
    r.validate();
    return r;
}

Tensor MegResponse::to_tensor() const {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(data.rows()), channels, times.size()};
    t.values.assign(data.data(), data.data() + data.size());
    return t;
}

MegResponse zscore_meg(const MegResponse& response) {
    response.validate();
    const Eigen::Index n = response.data.rows();
    if (n < 2) throw DegenerateInputError("zscore_meg: need at least 2 stimuli");
    MegResponse out = response;
    out.constant_cells.assign(static_cast<std::size_t>(response.data.cols()), false);
    for (Eigen::Index j = 0; j < response.data.cols(); ++j) {
        auto col = out.data.col(j);
        const double mean = col.mean();
        col.array() -= mean;
        const double ss = col.squaredNorm();
        if (ss <= static_cast<double>(n) * 1e-26 * std::max(1.0, mean * mean) || ss <= 1e-300) {
            out.constant_cells[static_cast<std::size_t>(j)] = true;
            col.setZero();
            continue;
        }
        col /= std::sqrt(ss / static_cast<double>(n));
    }
    return out;
}

std::vector<WindowSlice> select_time_windows(const MegResponse& response, const std::vector<TimeWindow>& windows) {
    response.validate();
    const auto& times = response.times;
    const double dt = times.size() > 1 ? response.step() : 0.0;
    std::vector<WindowSlice> out;
    for (const auto& w : windows) {
        const std::string label = "[" + fmt_seconds(w.start) + ", " + fmt_seconds(w.end) + ")";
        if (!(w.end > w.start)) throw ConfigError("time window " + label + " is empty");
        if (w.start < times.front() - dt - kTimeTol || w.end > times.back() + dt + kTimeTol) {
            throw ConfigError("time window " + label + " lies outside the time axis [" + fmt_seconds(times.front()) +
                              ", " + fmt_seconds(times.back()) + "]");
        }
        WindowSlice slice;
        slice.window = w;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] >= w.start - kTimeTol && times[i] < w.end - kTimeTol) slice.time_indices.push_back(i);
        }
        if (slice.time_indices.empty()) throw ConfigError("time window " + label + " contains no samples");
        for (std::size_t c = 0; c < response.channels; ++c) {
            for (auto t : slice.time_indices) slice.targets.push_back(response.target(c, t));
        }
        out.push_back(std::move(slice));
    }
    return out;
}

}  // namespace neuralign::data
