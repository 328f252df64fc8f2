// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/central/pipeline.hpp"

#include "gridwatch/placement/placement.hpp"

#include <set>

namespace gridwatch::central {

std::map<std::string, Vec3> ratings_for(const model::FeederModel& feeder, BusId bus) {
  std::map<std::string, Vec3> out;
  for (const auto* line : feeder.incident_lines(bus)) out[line->id] = line->rated_current;
  return out;
}

double central_baseline(const model::SystemMatrix& system, const model::Placement& placement) {
  const double obj = placement::objective(system, placement);
  return obj > 0.0 ? obj : 1.0;
}

namespace {

CentralRun prepared_run(const model::SystemMatrix& system, const model::Placement& placement) {
  CentralRun run;
  run.model = build_central_model(model::partition(system, placement));
  run.baseline = central_baseline(system, placement);
  return run;
}

}  // namespace

CentralRecorder::CentralRecorder(const model::SystemMatrix& system,
                                 const model::Placement& placement, const CentralParams& params)
    : run_(prepared_run(system, placement)), engine_(run_.model, run_.baseline, params) {}

void CentralRecorder::push(const FusedSample& sample) {
  auto closed = engine_.push(sample);
  if (engine_.last_x()) run_.x.emplace_back(sample.k, *engine_.last_x());
  run_.clusters.insert(run_.clusters.end(), closed.begin(), closed.end());
}

CentralRun CentralRecorder::finish() {
  auto rest = engine_.finish();
  run_.clusters.insert(run_.clusters.end(), rest.begin(), rest.end());
  run_.changes = engine_.changes();
  run_.gaps = engine_.gaps();
  return std::move(run_);
}

CentralRun run_central(const model::SystemMatrix& system, const model::Placement& placement,
                       const Streams& central_streams, const CentralParams& params) {
  CentralRecorder rec(system, placement, params);

  // Every k seen by any sensor, in order.
  std::set<SampleIndex> ks;
  std::vector<std::map<SampleIndex, const analytics::PhasorFrame*>> by_k(placement.size());
  for (std::size_t s = 0; s < placement.size(); ++s) {
    auto it = central_streams.find(placement.buses()[s]);
    if (it == central_streams.end()) continue;
    for (const auto& f : it->second) {
      by_k[s].emplace(f.k, &f);  // first frame of a duplicated k wins
      ks.insert(f.k);
    }
  }
  for (SampleIndex k : ks) {
    std::vector<const analytics::PhasorFrame*> frames(placement.size(), nullptr);
    for (std::size_t s = 0; s < placement.size(); ++s) {
      auto it = by_k[s].find(k);
      if (it != by_k[s].end()) frames[s] = it->second;
    }
    rec.push(fuse_frames(placement, k, frames));
  }
  return rec.finish();
}

PipelineResult run_offline(const model::FeederModel& feeder, const model::SystemMatrix& system,
                           const model::Placement& placement, const Streams& measured,
                           const Streams& uplink, const PipelineConfig& config, bool keep_derived) {
  PipelineResult res;
  std::vector<analytics::AnomalyReport> all;
  for (const auto& [bus, frames] : measured) {
    auto cfg = config.local;
    cfg.ratings = ratings_for(feeder, bus);
    std::vector<analytics::DerivedSample> derived;
    auto reps = analytics::run_local(bus, cfg, frames, keep_derived ? &derived : nullptr);
    all.insert(all.end(), reps.begin(), reps.end());
    res.local[bus] = std::move(reps);
    if (keep_derived) res.derived[bus] = std::move(derived);
  }
  res.central = run_central(system, placement, uplink, config.central);
  res.log = fuse_reports(all, res.central.clusters);
  return res;
}

}  // namespace gridwatch::central
