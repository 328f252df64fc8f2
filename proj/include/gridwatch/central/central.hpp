// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/cusum.hpp"
#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/analytics/segment.hpp"
#include "gridwatch/model/system.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace gridwatch::central {

enum class ProjectorMode { SmallestSingular, NullProjector };

struct CentralModel {
  model::PartitionedSystem partition;
  ProjectorMode mode = ProjectorMode::SmallestSingular;
  /// Unit left singular vector of H_u for its smallest singular value, over
  /// all 3B rows (zero on rows of absent phases). Empty in NullProjector mode.
  Eigen::VectorXcd u_us;
  double sigma_min = 0.0;
  /// I - H_u H_u^+ (NullProjector mode only).
  Eigen::MatrixXcd null_projector;
  /// Row vector u_us^H H_a, or P H_a, applied to d_a in SI units.
  Eigen::MatrixXcd metric_op;
};

/// Relative gap under which two singular values count as tied.
inline constexpr double kTieTolerance = 1e-9;

CentralModel build_central_model(const model::PartitionedSystem& partition);

/// Available measurements of one time step, ordered as partition.a_cols and
/// given in per-unit.
struct FusedSample {
  SampleIndex k = 0;
  Eigen::VectorXcd d_a;
  /// One bit per sensor in placement order.
  std::vector<bool> completeness;

  bool complete() const;
};

/// x = |u^H H_a d|^2 / |d|^2 (or |P H_a d|^2 / |d|^2), d in SI units.
/// Returns nothing for a zero vector.
std::optional<double> central_metric(const CentralModel& model, const Eigen::VectorXcd& d_a_pu);

/// Builds the fused vector of one time step from the sensors' frames.
/// `frames` must be in placement order; a missing frame is a null pointer.
/// The current injection of a bus is the sum of its line currents.
FusedSample fuse_frames(const model::Placement& placement, SampleIndex k,
                        const std::vector<const analytics::PhasorFrame*>& frames);

struct CentralChange {
  SampleIndex k = 0;
  analytics::Change direction = analytics::Change::Up;
};

struct CentralCluster {
  SampleIndex start_k = 0;
  std::optional<SampleIndex> end_k;
  std::int64_t changes = 0;
  double peak_ratio = 0.0;  ///< largest x / baseline inside the cluster
};

struct CentralParams {
  analytics::DetectorParams detector;
  analytics::SegmentParams segment;
};

/// Runs CUSUM over x[k] / baseline and groups the change points into clusters
/// with the local segmentation state machine.
class CentralEngine {
 public:
  CentralEngine(CentralModel model, double baseline, CentralParams params = {});

  /// Incomplete or zero samples are skipped and counted as gaps.
  /// Returns the clusters closed by this sample.
  std::vector<CentralCluster> push(const FusedSample& sample);
  std::vector<CentralCluster> finish();

  const CentralModel& model() const { return model_; }
  double baseline() const { return baseline_; }
  const std::vector<CentralChange>& changes() const { return changes_; }
  std::int64_t gaps() const { return gaps_; }
  /// x of the latest sample; empty when that sample was skipped.
  std::optional<double> last_x() const { return last_x_; }

 private:
  CentralModel model_;
  double baseline_;
  CentralParams params_;
  analytics::DetectorState det_;
  analytics::Segmenter seg_;
  std::vector<CentralChange> changes_;
  std::int64_t gaps_ = 0;
  std::int64_t cluster_changes_ = 0;
  double cluster_peak_ = 0.0;
  std::optional<double> last_x_;
  std::optional<SampleIndex> last_k_;
};

}  // namespace gridwatch::central
