// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace gridwatch::central {

struct SmallestDirection {
  /// Unit vector u minimizing |u^H A| (left singular vector of sigma_min).
  Eigen::VectorXcd u;
  double sigma_min = 0.0;
  /// How many singular values tie with sigma_min.
  int multiplicity = 1;
};

/// Left singular direction of the smallest singular value of A, counting the
/// zero singular values of a tall A. Ties are resolved by projecting the
/// first coordinate axis with a nonzero projection onto the tied subspace.
/// The result is phase-normalized: its first non-negligible entry is real
/// and positive.
SmallestDirection smallest_left_direction(const Eigen::MatrixXcd& A);

}  // namespace gridwatch::central
