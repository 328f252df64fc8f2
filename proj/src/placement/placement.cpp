// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/placement/placement.hpp"

#include "gridwatch/central/central.hpp"
#include "gridwatch/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace gridwatch::placement {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<BusId> resolve_candidates(const model::SystemMatrix& system, const SolveOptions& opt) {
  std::vector<BusId> c = opt.candidates.empty() ? system.bus_ids : opt.candidates;
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  for (BusId id : c) system.index_of(id);  // throws on unknown ids
  return c;
}

void check_k(int k, std::size_t n_candidates) {
  if (k < 1 || static_cast<std::size_t>(k) > n_candidates) {
    throw ValidationError("K=" + std::to_string(k) + " must be between 1 and the " +
                          std::to_string(n_candidates) + " candidate buses");
  }
}

// Strictly better, or tied within 1e-12 relative and lower id.
bool better(double obj, BusId id, double best_obj, BusId best_id) {
  const double tol = 1e-12 * std::max(std::abs(obj), std::abs(best_obj));
  if (obj < best_obj - tol) return true;
  if (obj > best_obj + tol) return false;
  return id < best_id;
}

}  // namespace

std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::Greedy:
      return "greedy";
    case Solver::Exhaustive:
      return "exhaustive";
    case Solver::Random:
      return "random";
  }
  return "unknown";
}

Solver solver_from_string(std::string_view text) {
  if (text == "greedy") return Solver::Greedy;
  if (text == "exhaustive") return Solver::Exhaustive;
  if (text == "random") return Solver::Random;
  throw ConfigError("unknown solver '" + std::string(text) + "'");
}

double objective(const model::SystemMatrix& system, const model::Placement& placement) {
  placement.check_against(system);
  if (placement.size() == system.bus_ids.size()) return 0.0;
  const auto cm = central::build_central_model(model::partition(system, placement));
  // W = metric_op^H metric_op, so lambda_max(W) is the largest x over all d_a.
  if (cm.mode == central::ProjectorMode::SmallestSingular) return cm.metric_op.squaredNorm();
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(cm.metric_op);
  const double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return s * s;
}

std::vector<BusId> candidate_buses(const model::FeederModel& feeder, bool three_phase_only) {
  std::vector<BusId> out;
  for (const auto& b : feeder.buses()) {
    if (!three_phase_only || feeder.bus_phases(b.id).full()) out.push_back(b.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

PlacementResult greedy_place(const model::SystemMatrix& system, int k, const SolveOptions& opt) {
  const auto t0 = Clock::now();
  auto remaining = resolve_candidates(system, opt);
  check_k(k, remaining.size());
  std::vector<BusId> chosen;
  std::int64_t evals = 0;
  double best_obj = 0.0;
  const int threads = std::max(1, opt.threads);

  for (int round = 0; round < k; ++round) {
    std::vector<double> objs(remaining.size());
    auto eval = [&](std::size_t begin, std::size_t step) {
      for (std::size_t c = begin; c < remaining.size(); c += step) {
        auto trial = chosen;
        trial.push_back(remaining[c]);
        objs[c] = objective(system, model::Placement(trial));
      }
    };
    if (threads == 1) {
      eval(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(eval, static_cast<std::size_t>(t), static_cast<std::size_t>(threads));
      for (auto& th : pool) th.join();
    }
    evals += static_cast<std::int64_t>(remaining.size());

    std::size_t best = 0;
    for (std::size_t c = 1; c < remaining.size(); ++c) {
      if (better(objs[c], remaining[c], objs[best], remaining[best])) best = c;
    }
    best_obj = objs[best];
    chosen.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return {model::Placement(chosen), best_obj, Solver::Greedy, seconds_since(t0), evals};
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

PlacementResult exhaustive_place(const model::SystemMatrix& system, int k, const SolveOptions& opt) {
  const auto t0 = Clock::now();
  const auto cand = resolve_candidates(system, opt);
  check_k(k, cand.size());
  const auto total = choose(cand.size(), static_cast<std::uint64_t>(k));
  if (total > opt.budget) {
    throw ValidationError("exhaustive search needs " + std::to_string(total) +
                          " evaluations, above the budget of " + std::to_string(opt.budget));
  }
  const auto n = cand.size();
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::size_t> idx(kk);
  for (std::size_t i = 0; i < kk; ++i) idx[i] = i;

  std::vector<BusId> best_set;
  double best_obj = std::numeric_limits<double>::infinity();
  std::int64_t evals = 0;
  while (true) {
    std::vector<BusId> trial(kk);
    for (std::size_t i = 0; i < kk; ++i) trial[i] = cand[idx[i]];
    const double obj = objective(system, model::Placement(trial));
    ++evals;
    if (obj < best_obj) {
      best_obj = obj;
      best_set = trial;
    }
    // Next combination in lexicographic order.
    std::size_t i = kk;
    while (i > 0 && idx[i - 1] == n - kk + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < kk; ++j) idx[j] = idx[j - 1] + 1;
  }
  return {model::Placement(best_set), best_obj, Solver::Exhaustive, seconds_since(t0), evals};
}

PlacementResult random_place(const model::SystemMatrix& system, int k, std::uint64_t seed,
                             const SolveOptions& opt) {
  const auto t0 = Clock::now();
  auto cand = resolve_candidates(system, opt);
  check_k(k, cand.size());
  boost::random::mt19937_64 rng(seed);
  // Partial Fisher-Yates; boost's distribution is the same on every platform.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    boost::random::uniform_int_distribution<std::size_t> pick(i, cand.size() - 1);
    std::swap(cand[i], cand[pick(rng)]);
  }
  cand.resize(static_cast<std::size_t>(k));
  model::Placement p(cand);
  const double obj = objective(system, p);
  return {std::move(p), obj, Solver::Random, seconds_since(t0), 1};
}

nlohmann::json to_json(const PlacementResult& r) {
  nlohmann::json j;
  j["solver"] = to_string(r.solver);
  j["buses"] = r.placement.buses();
  j["objective"] = r.objective;
  j["elapsed_s"] = r.elapsed_s;
  j["evaluations"] = r.evaluations;
  return j;
}

}  // namespace gridwatch::placement
