// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>

namespace gridwatch {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3c = Eigen::Matrix3cd;

using BusId = int;
using SampleIndex = std::int64_t;

/// Phasor reporting rate of the field devices.
inline constexpr double kSampleRateHz = 120.0;
inline constexpr double kSamplePeriod = 1.0 / kSampleRateHz;
inline constexpr double kNominalHz = 60.0;
inline constexpr double kNominalPeriod = 1.0 / kNominalHz;

inline constexpr int kPhases = 3;

}  // namespace gridwatch
