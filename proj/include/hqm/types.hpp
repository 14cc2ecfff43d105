#pragma once

#include <random>

#include <Eigen/Core>

namespace hqm {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXd = Vector<double>;

using Eigen::Index;

/// Absolute tolerance for granularity and capacity checks.
inline constexpr double kTolerance = 1e-9;

inline constexpr double kSecondsPerHour = 3600.0;

using Rng = std::mt19937_64;

}  // namespace hqm
