// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/model/feeder.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gridwatch::model {

enum class Quantity { Current, Voltage };

/// Where a column of a partition block lives in H.
struct ColumnRef {
  BusId bus = 0;
  Quantity quantity = Quantity::Current;
  int phase = 0;
  Eigen::Index h_col = 0;
};

/// Y and H = [I | -Y] for a feeder.
///
/// Column order of H: current block then voltage block, each bus-major in
/// feeder bus order, then phase-major (a, b, c).
///
/// `Y` is in siemens referred to the slack voltage level, so that H acts on
/// d = (I [A], V [V]) with both referred to that level. `Y_pu` is the same
/// network in per-unit. The two differ only by the impedance base.
struct SystemMatrix {
  std::vector<BusId> bus_ids;
  Eigen::MatrixXcd Y_pu;
  Eigen::MatrixXcd Y;
  Eigen::MatrixXcd H;
  /// Rows of H whose phase exists at the bus. Other rows carry no physics.
  std::vector<bool> live_rows;
  double v_base = 1.0;  ///< line-to-neutral volts per p.u.
  double i_base = 1.0;  ///< amperes per p.u.

  Eigen::Index bus_count() const { return static_cast<Eigen::Index>(bus_ids.size()); }
  Eigen::Index index_of(BusId id) const;
  Eigen::Index current_col(BusId id, int phase) const { return 3 * index_of(id) + phase; }
  Eigen::Index voltage_col(BusId id, int phase) const {
    return 3 * bus_count() + 3 * index_of(id) + phase;
  }
};

SystemMatrix build_system(const FeederModel& feeder);

/// Ordered set of distinct sensor buses (ascending ids).
class Placement {
 public:
  /// Throws ValidationError on an empty list or duplicates.
  explicit Placement(std::vector<BusId> buses);

  const std::vector<BusId>& buses() const { return buses_; }
  std::size_t size() const { return buses_.size(); }
  bool contains(BusId id) const;

  /// Throws ValidationError when a bus is unknown to the system.
  void check_against(const SystemMatrix& system) const;

  bool operator==(const Placement&) const = default;

 private:
  std::vector<BusId> buses_;
};

struct PartitionedSystem {
  Eigen::MatrixXcd H_u;
  Eigen::MatrixXcd H_a;
  std::vector<ColumnRef> u_cols;
  std::vector<ColumnRef> a_cols;
  std::vector<bool> live_rows;
  Eigen::Index total_cols = 0;
  /// Per-unit to SI scale of each available column (i_base or v_base).
  Eigen::VectorXd a_scale;
};

/// Available columns: for every sensor bus in placement order, the three
/// current-injection phases followed by the three voltage phases.
PartitionedSystem partition(const SystemMatrix& system, const Placement& placement);

/// Inverse of partition: puts every column back at its H position.
Eigen::MatrixXcd reassemble(const PartitionedSystem& part);

}  // namespace gridwatch::model
