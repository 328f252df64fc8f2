// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/qss.hpp"

#include <cmath>
#include <stdexcept>

namespace gridwatch::analytics {

WindowBuffer::WindowBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 2) throw std::invalid_argument("window needs at least 2 samples");
}

void WindowBuffer::push(const Vec3c& v, const Vec3c& i) {
  v_.push_back(v);
  i_.push_back(i);
  if (static_cast<int>(v_.size()) > capacity_) {
    v_.pop_front();
    i_.pop_front();
  }
}

void WindowBuffer::clear() {
  v_.clear();
  i_.clear();
}

std::optional<Mat63c> qss_correlations(const WindowBuffer& window) {
  if (!window.full()) return std::nullopt;
  Mat63c R = Mat63c::Zero();
  const auto& vs = window.voltages();
  const auto& is = window.currents();
  for (std::size_t r = 0; r < vs.size(); ++r) {
    R.topRows<3>() += is[r] * vs[r].adjoint();
    R.bottomRows<3>() += vs[r] * vs[r].adjoint();
  }
  R /= static_cast<double>(window.capacity() - 1);
  return R;
}

double qss_residual(const Mat63c& R) {
  Eigen::JacobiSVD<Mat63c> svd(R);
  const auto& s = svd.singularValues();
  double acc = 0.0;
  for (Eigen::Index i = 1; i < s.size(); ++i) acc += std::pow(s(i), 4);
  return std::sqrt(acc);
}

}  // namespace gridwatch::analytics
