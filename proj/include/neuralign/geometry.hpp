#pragma once

#include "neuralign/numeric.hpp"

#include <vector>

namespace neuralign::data {

/// Euclidean distance (mm) of each coordinate row from the reference point.
std::vector<double> distance_from_v1(const Matrix& coordinates, const Eigen::Vector3d& reference);

}  // namespace neuralign::data
