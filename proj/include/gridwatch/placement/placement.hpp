// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/model/feeder.hpp"
#include "gridwatch/model/system.hpp"

#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace gridwatch::placement {

enum class Solver { Greedy, Exhaustive, Random };

std::string_view to_string(Solver s);
Solver solver_from_string(std::string_view text);

struct PlacementResult {
  model::Placement placement;
  double objective = 0.0;
  Solver solver = Solver::Greedy;
  double elapsed_s = 0.0;
  /// Objective evaluations performed.
  std::int64_t evaluations = 0;
};

/// lambda_max(W) with W = H_a^H u u^H H_a, which is |u^H H_a|^2 because W
/// has rank one. When H_u is tall, u u^H is replaced by the projector onto
/// the left null space of H_u, matching the central metric. Either way it
/// is the largest central metric over all d_a. Zero when the placement
/// covers every bus.
double objective(const model::SystemMatrix& system, const model::Placement& placement);

/// Every bus id, or only buses where all three phases exist.
std::vector<BusId> candidate_buses(const model::FeederModel& feeder, bool three_phase_only);

struct SolveOptions {
  /// Candidate buses; empty means every bus of the system.
  std::vector<BusId> candidates;
  /// Exhaustive search refuses above this many subsets.
  std::uint64_t budget = 10'000'000;
  /// Worker threads for evaluating a round (1 = sequential).
  int threads = 1;
};

/// Algorithm 1: K rounds, each adds the candidate with the lowest objective
/// given the buses already chosen. Objectives within 1e-12 relative of each
/// other tie and the lower bus id wins.
PlacementResult greedy_place(const model::SystemMatrix& system, int k, const SolveOptions& opt = {});

/// Global minimum over all K-subsets of the candidates, enumerated in
/// lexicographic order; the first subset reaching the minimum wins.
/// Throws ValidationError when C(n, K) exceeds the budget.
PlacementResult exhaustive_place(const model::SystemMatrix& system, int k,
                                 const SolveOptions& opt = {});

/// Uniform K-subset of the candidates from a seeded generator.
PlacementResult random_place(const model::SystemMatrix& system, int k, std::uint64_t seed,
                             const SolveOptions& opt = {});

/// n choose k, saturating at UINT64_MAX.
std::uint64_t choose(std::uint64_t n, std::uint64_t k);

nlohmann::json to_json(const PlacementResult& r);

}  // namespace gridwatch::placement
