#pragma once

#include "neuralign/matrix_io.hpp"
#include "neuralign/numeric.hpp"

#include <cstddef>
#include <vector>

namespace neuralign::data {

/// Epoched stimuli x channels x times recording, flattened channel-major:
/// target index = channel * n_times + time.
struct MegResponse {
    Matrix data;
    std::size_t channels = 0;
    std::vector<double> times;         ///< seconds from onset, ascending, uniform
    std::vector<bool> constant_cells;  ///< set by zscore_meg

    std::size_t n_times() const { return times.size(); }
    std::size_t target(std::size_t channel, std::size_t time) const { return channel * times.size() + time; }
    double step() const;

    /// Shape agreement, ascending uniform time axis (relative tolerance 1e-6).
    void validate() const;

    static MegResponse from_tensor(const Tensor& t, std::vector<double> times);
    Tensor to_tensor() const;
};

/// Per (channel, time) cell: subtract the mean over stimuli and divide by the
/// population SD. Constant cells are flagged and only centred.
MegResponse zscore_meg(const MegResponse& response);

struct TimeWindow {
    double start = 0.0;
    double end = 0.0;
};

struct WindowSlice {
    TimeWindow window;
    std::vector<std::size_t> time_indices;
    std::vector<std::size_t> targets;  ///< channel-major order
};

/// Samples with start <= t < end (1e-9 s tolerance) for each window.
std::vector<WindowSlice> select_time_windows(const MegResponse& response, const std::vector<TimeWindow>& windows);

}  // namespace neuralign::data
