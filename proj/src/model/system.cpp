// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/model/system.hpp"

#include "gridwatch/error.hpp"

#include <algorithm>

namespace gridwatch::model {

Eigen::Index SystemMatrix::index_of(BusId id) const {
  auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
  if (it == bus_ids.end()) throw std::out_of_range("unknown bus " + std::to_string(id));
  return static_cast<Eigen::Index>(it - bus_ids.begin());
}

SystemMatrix build_system(const FeederModel& feeder) {
  SystemMatrix sys;
  const auto n = static_cast<Eigen::Index>(feeder.bus_count());
  sys.bus_ids.reserve(feeder.bus_count());
  for (const auto& b : feeder.buses()) sys.bus_ids.push_back(b.id);

  sys.Y_pu = Eigen::MatrixXcd::Zero(3 * n, 3 * n);
  for (const auto& line : feeder.lines()) {
    const auto a = 3 * static_cast<Eigen::Index>(feeder.index_of(line.from));
    const auto b = 3 * static_cast<Eigen::Index>(feeder.index_of(line.to));
    const Mat3c diag = line.series + 0.5 * line.shunt;
    sys.Y_pu.block<3, 3>(a, a) += diag;
    sys.Y_pu.block<3, 3>(b, b) += diag;
    sys.Y_pu.block<3, 3>(a, b) -= line.series;
    sys.Y_pu.block<3, 3>(b, a) -= line.series;
  }

  const BusId ref = feeder.slack();
  sys.v_base = feeder.voltage_base(ref);
  sys.i_base = feeder.current_base(ref);
  sys.Y = sys.Y_pu / feeder.impedance_base(ref);

  sys.H.resize(3 * n, 6 * n);
  sys.H.leftCols(3 * n).setIdentity();
  sys.H.rightCols(3 * n) = -sys.Y;

  sys.live_rows.assign(static_cast<std::size_t>(3 * n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto mask = feeder.bus_phases(sys.bus_ids[static_cast<std::size_t>(i)]);
    for (int p = 0; p < 3; ++p) sys.live_rows[static_cast<std::size_t>(3 * i + p)] = mask.has(p);
  }
  return sys;
}

Placement::Placement(std::vector<BusId> buses) : buses_(std::move(buses)) {
  if (buses_.empty()) throw ValidationError("placement needs at least one sensor bus");
  std::sort(buses_.begin(), buses_.end());
  auto dup = std::adjacent_find(buses_.begin(), buses_.end());
  if (dup != buses_.end()) {
    throw ValidationError("placement lists bus " + std::to_string(*dup) + " twice");
  }
}

bool Placement::contains(BusId id) const {
  return std::binary_search(buses_.begin(), buses_.end(), id);
}

void Placement::check_against(const SystemMatrix& system) const {
  if (buses_.size() > system.bus_ids.size()) {
    throw ValidationError("placement has more sensors than the feeder has buses");
  }
  for (BusId id : buses_) {
    if (std::find(system.bus_ids.begin(), system.bus_ids.end(), id) == system.bus_ids.end()) {
      throw ValidationError("placement references unknown bus " + std::to_string(id));
    }
  }
}

PartitionedSystem partition(const SystemMatrix& system, const Placement& placement) {
  placement.check_against(system);
  PartitionedSystem part;
  const Eigen::Index rows = system.H.rows();
  const auto k = static_cast<Eigen::Index>(placement.size());
  const auto n = system.bus_count();
  part.total_cols = system.H.cols();
  part.live_rows = system.live_rows;

  part.H_a.resize(rows, 6 * k);
  part.a_scale.resize(6 * k);
  Eigen::Index col = 0;
  for (BusId id : placement.buses()) {
    for (int q = 0; q < 2; ++q) {
      const auto quantity = q == 0 ? Quantity::Current : Quantity::Voltage;
      for (int p = 0; p < 3; ++p) {
        const auto h_col = q == 0 ? system.current_col(id, p) : system.voltage_col(id, p);
        part.H_a.col(col) = system.H.col(h_col);
        part.a_scale(col) = q == 0 ? system.i_base : system.v_base;
        part.a_cols.push_back({id, quantity, p, h_col});
        ++col;
      }
    }
  }

  part.H_u.resize(rows, 6 * (n - k));
  col = 0;
  for (int q = 0; q < 2; ++q) {
    const auto quantity = q == 0 ? Quantity::Current : Quantity::Voltage;
    for (BusId id : system.bus_ids) {
      if (placement.contains(id)) continue;
      for (int p = 0; p < 3; ++p) {
        const auto h_col = q == 0 ? system.current_col(id, p) : system.voltage_col(id, p);
        part.H_u.col(col) = system.H.col(h_col);
        part.u_cols.push_back({id, quantity, p, h_col});
        ++col;
      }
    }
  }
  return part;
}

Eigen::MatrixXcd reassemble(const PartitionedSystem& part) {
  Eigen::MatrixXcd H(part.H_a.rows(), part.total_cols);
  for (std::size_t c = 0; c < part.a_cols.size(); ++c) {
    H.col(part.a_cols[c].h_col) = part.H_a.col(static_cast<Eigen::Index>(c));
  }
  for (std::size_t c = 0; c < part.u_cols.size(); ++c) {
    H.col(part.u_cols[c].h_col) = part.H_u.col(static_cast<Eigen::Index>(c));
  }
  return H;
}

}  // namespace gridwatch::model
