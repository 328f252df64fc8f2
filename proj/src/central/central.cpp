// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/central/central.hpp"

#include "gridwatch/central/subspace.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::central {

namespace {

std::vector<Eigen::Index> live_index(const std::vector<bool>& live) {
  std::vector<Eigen::Index> idx;
  for (std::size_t r = 0; r < live.size(); ++r) {
    if (live[r]) idx.push_back(static_cast<Eigen::Index>(r));
  }
  return idx;
}

Eigen::MatrixXcd take_rows(const Eigen::MatrixXcd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

SmallestDirection smallest_left_direction(const Eigen::MatrixXcd& A) {
  SmallestDirection out;
  const Eigen::Index m = A.rows();
  out.u = Eigen::VectorXcd::Zero(m);
  if (m == 0) return out;
  if (A.cols() == 0) {
    out.u(0) = 1.0;
    return out;
  }

  const unsigned opts = A.rows() > A.cols() ? Eigen::ComputeFullU : Eigen::ComputeThinU;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, opts);
  const Eigen::MatrixXcd& U = svd.matrixU();
  // Left singular values: the computed ones, padded with zeros for the
  // directions a tall matrix cannot reach.
  Eigen::VectorXd sv = Eigen::VectorXd::Zero(m);
  sv.head(svd.singularValues().size()) = svd.singularValues();

  const double smin = sv(m - 1);
  out.sigma_min = smin;
  const double scale = std::max(smin, 1e-300);
  const double abs_floor = kTieTolerance * std::max(sv(0), 1e-300);
  std::vector<Eigen::Index> tied;
  for (Eigen::Index i = 0; i < m; ++i) {
    // A numerically zero sigma_min ties with every other numerically zero one.
    if (std::abs(sv(i) - smin) <= std::max(kTieTolerance * scale, smin <= abs_floor ? abs_floor : 0.0)) {
      tied.push_back(i);
    }
  }
  out.multiplicity = static_cast<int>(tied.size());

  Eigen::VectorXcd u;
  if (tied.size() == 1) {
    u = U.col(tied.front());
  } else {
    // Deterministic pick inside the tied subspace: the projection of the
    // first coordinate axis that is not orthogonal to it.
    Eigen::MatrixXcd basis(m, static_cast<Eigen::Index>(tied.size()));
    for (std::size_t c = 0; c < tied.size(); ++c) basis.col(static_cast<Eigen::Index>(c)) = U.col(tied[c]);
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXcd proj = basis * basis.row(j).adjoint();
      if (proj.norm() > 1e-8) {
        u = proj;
        break;
      }
    }
  }
  u.normalize();
  // Phase normalization: first component of non-negligible size is real > 0.
  for (Eigen::Index j = 0; j < m; ++j) {
    if (std::abs(u(j)) > 1e-12) {
      u *= std::conj(u(j)) / std::abs(u(j));
      break;
    }
  }
  out.u = u;
  return out;
}

CentralModel build_central_model(const model::PartitionedSystem& partition) {
  CentralModel cm;
  cm.partition = partition;
  const auto live = live_index(partition.live_rows);
  const Eigen::Index rows = partition.H_a.rows();
  const Eigen::MatrixXcd Hu = take_rows(partition.H_u, live);
  const Eigen::MatrixXcd Ha = take_rows(partition.H_a, live);
  const auto L = static_cast<Eigen::Index>(live.size());

  if (partition.H_u.cols() >= rows && partition.H_u.cols() > 0) {
    cm.mode = ProjectorMode::SmallestSingular;
    auto dir = smallest_left_direction(Hu);
    cm.sigma_min = dir.sigma_min;
    cm.u_us = Eigen::VectorXcd::Zero(rows);
    for (Eigen::Index r = 0; r < L; ++r) cm.u_us(live[static_cast<std::size_t>(r)]) = dir.u(r);
    cm.metric_op = dir.u.adjoint() * Ha;
  } else {
    cm.mode = ProjectorMode::NullProjector;
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(L, L);
    if (Hu.cols() > 0) {
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(Hu, Eigen::ComputeThinU);
      const auto& s = svd.singularValues();
      const double tol = static_cast<double>(std::max(Hu.rows(), Hu.cols())) *
                         Eigen::NumTraits<double>::epsilon() * (s.size() ? s(0) : 0.0);
      Eigen::Index rank = 0;
      while (rank < s.size() && s(rank) > tol) ++rank;
      const Eigen::MatrixXcd Ur = svd.matrixU().leftCols(rank);
      P -= Ur * Ur.adjoint();
    }
    cm.null_projector = Eigen::MatrixXcd::Zero(rows, rows);
    for (Eigen::Index r = 0; r < L; ++r) {
      for (Eigen::Index c = 0; c < L; ++c) {
        cm.null_projector(live[static_cast<std::size_t>(r)], live[static_cast<std::size_t>(c)]) = P(r, c);
      }
    }
    cm.metric_op = P * Ha;
  }
  return cm;
}

std::optional<double> central_metric(const CentralModel& model, const Eigen::VectorXcd& d_a_pu) {
  const Eigen::VectorXcd d = d_a_pu.cwiseProduct(model.partition.a_scale.cast<Complex>());
  const double dn = d.squaredNorm();
  if (!(dn > 0.0) || !std::isfinite(dn)) return std::nullopt;
  return (model.metric_op * d).squaredNorm() / dn;
}

bool FusedSample::complete() const {
  return std::all_of(completeness.begin(), completeness.end(), [](bool b) { return b; });
}

FusedSample fuse_frames(const model::Placement& placement, SampleIndex k,
                        const std::vector<const analytics::PhasorFrame*>& frames) {
  FusedSample s;
  s.k = k;
  const auto n = static_cast<Eigen::Index>(placement.size());
  s.d_a = Eigen::VectorXcd::Zero(6 * n);
  s.completeness.assign(placement.size(), false);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto* f = frames[static_cast<std::size_t>(b)];
    if (f == nullptr) continue;
    s.completeness[static_cast<std::size_t>(b)] = true;
    Vec3c inj = Vec3c::Zero();
    for (const auto& [id, i] : f->i_lines) inj += i;
    s.d_a.segment<3>(6 * b) = inj;
    s.d_a.segment<3>(6 * b + 3) = f->v;
  }
  return s;
}

CentralEngine::CentralEngine(CentralModel model, double baseline, CentralParams params)
    : model_(std::move(model)),
      baseline_(baseline > 0.0 && std::isfinite(baseline) ? baseline : 1.0),
      params_(params),
      det_(params.detector),
      seg_(params.segment) {}

std::vector<CentralCluster> CentralEngine::push(const FusedSample& sample) {
  std::vector<CentralCluster> out;
  std::optional<double> x;
  if (sample.complete()) x = central_metric(model_, sample.d_a);
  if (last_k_ && sample.k > *last_k_ + 1) gaps_ += sample.k - *last_k_ - 1;
  last_k_ = sample.k;
  last_x_ = x;

  bool changed = false;
  if (!x) {
    ++gaps_;
  } else {
    const double r = *x / baseline_;
    auto c = analytics::cusum_step(det_, r);
    if (c != analytics::Change::None) {
      changed = true;
      changes_.push_back({sample.k, c});
    }
  }

  if (auto ev = seg_.step(sample.k, changed); ev && ev->kind == analytics::SegmentEventKind::Closed) {
    out.push_back({ev->segment.start_k, ev->segment.last_k, cluster_changes_, cluster_peak_});
    cluster_changes_ = 0;
    cluster_peak_ = 0.0;
    if (seg_.open()) {
      // The same step closed one cluster and opened the next.
      cluster_changes_ = 1;
      cluster_peak_ = x.value_or(0.0) / baseline_;
    }
    return out;
  }
  if (seg_.open() && x) cluster_peak_ = std::max(cluster_peak_, *x / baseline_);
  if (changed) ++cluster_changes_;
  return out;
}

std::vector<CentralCluster> CentralEngine::finish() {
  std::vector<CentralCluster> out;
  if (auto ev = seg_.flush()) {
    out.push_back({ev->segment.start_k, ev->segment.last_k, cluster_changes_, cluster_peak_});
    cluster_changes_ = 0;
    cluster_peak_ = 0.0;
  }
  return out;
}

}  // namespace gridwatch::central
