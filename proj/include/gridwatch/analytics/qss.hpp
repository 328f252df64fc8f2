// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/types.hpp"

#include <Eigen/Dense>

#include <deque>
#include <optional>

namespace gridwatch::analytics {

using Mat63c = Eigen::Matrix<Complex, 6, 3>;

/// The last M (v, i) pairs of one line.
class WindowBuffer {
 public:
  explicit WindowBuffer(int capacity = 12);

  void push(const Vec3c& v, const Vec3c& i);
  bool full() const { return static_cast<int>(v_.size()) == capacity_; }
  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(v_.size()); }
  void clear();

  const std::deque<Vec3c>& voltages() const { return v_; }
  const std::deque<Vec3c>& currents() const { return i_; }

 private:
  int capacity_;
  std::deque<Vec3c> v_;
  std::deque<Vec3c> i_;
};

/// R = [sum i v^H ; sum v v^H] / (M - 1) over the window. Empty until full.
std::optional<Mat63c> qss_correlations(const WindowBuffer& window);

/// Distance of R R^H from its best rank-1 approximation in Frobenius norm,
/// sqrt(sum_{i>=2} sigma_i(R)^4).
double qss_residual(const Mat63c& R);

}  // namespace gridwatch::analytics
