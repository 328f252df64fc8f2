// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/engine.hpp"

#include "gridwatch/error.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::analytics {

void check_frame(const PhasorFrame& f) {
  auto finite = [](const Vec3c& x) { return x.allFinite(); };
  if (!finite(f.v)) {
    throw DataError("non-finite voltage at bus " + std::to_string(f.bus) + " k=" +
                    std::to_string(f.k));
  }
  for (const auto& [id, i] : f.i_lines) {
    if (!finite(i)) {
      throw DataError("non-finite current on line " + id + " k=" + std::to_string(f.k));
    }
  }
}

namespace {

constexpr char kPhaseChar[3] = {'a', 'b', 'c'};

struct Channel {
  DetectorState det;
  std::deque<double> history;
};

// One (rule, line) flag stream and the state of its open event.
struct Track {
  Rule rule = Rule::VoltageMag;
  std::optional<std::string> line;
  Segmenter seg;
  std::vector<Channel> channels;  // one per phase, or a single scalar channel
  std::array<bool, 3> phases{};
  double severity = 0.0;
  double extreme = 1.0;  // voltage rule only
  std::vector<double> pre;
  std::vector<double> post;
  int trigger = -1;  // channel whose change opened the event
};

std::string phase_string(const std::array<bool, 3>& ph) {
  std::string s;
  for (int p = 0; p < 3; ++p) {
    if (ph[static_cast<std::size_t>(p)]) s.push_back(kPhaseChar[p]);
  }
  return s;
}

}  // namespace

struct LocalEngine::Impl {
  LocalConfig cfg;
  FrequencyTracker freq;
  std::int64_t bad_frames = 0;
  std::map<std::string, WindowBuffer> windows;
  // Keyed by (rule, line) so report order within a frame is fixed.
  std::map<std::pair<int, std::string>, Track> tracks;

  explicit Impl(LocalConfig c) : cfg(std::move(c)), freq(cfg.freq_lambda) {}

  Track& track(Rule rule, const std::optional<std::string>& line, int n_channels) {
    auto key = std::make_pair(static_cast<int>(rule), line.value_or(""));
    auto it = tracks.find(key);
    if (it == tracks.end()) {
      Track t;
      t.rule = rule;
      t.line = line;
      t.seg = Segmenter(cfg.segment);
      t.channels.assign(static_cast<std::size_t>(n_channels), Channel{DetectorState(cfg.detector), {}});
      it = tracks.emplace(key, std::move(t)).first;
    }
    return it->second;
  }

  AnomalyReport make_report(BusId bus, Track& t, const Segment& s, bool closed) {
    AnomalyReport r;
    r.rule = t.rule;
    r.bus = bus;
    r.line = t.line;
    r.phases = phase_string(t.phases);
    r.start_k = s.start_k;
    if (closed) r.end_k = s.last_k;
    r.severity = t.severity;
    switch (t.rule) {
      case Rule::VoltageMag: {
        const double duration = static_cast<double>(s.last_k - s.start_k + 1) * kSamplePeriod;
        auto c = classify_voltage(t.extreme, duration, cfg.voltage);
        r.label = c.label;
        r.out_of_table = c.out_of_table;
        r.severity = t.extreme;
        break;
      }
      case Rule::Overcurrent:
        r.label = Label::Overcurrent;
        break;
      case Rule::QssValidity:
        r.label = Label::Transient;
        break;
      default:
        r.label = classify_trend(t.pre, t.post, cfg.trend);
        break;
    }
    return r;
  }

  void reset_event(Track& t) {
    t.phases = {};
    t.severity = 0.0;
    t.extreme = 1.0;
    t.pre.clear();
    t.post.clear();
    t.trigger = -1;
  }

  // Emits the closing report when T1 quiet samples have passed.
  void close_if_due(BusId bus, Track& t, SampleIndex k, std::vector<AnomalyReport>& out) {
    if (!t.seg.open() || k - t.seg.current()->last_k < cfg.segment.quiet_close) return;
    auto ev = t.seg.step(k, false);
    out.push_back(make_report(bus, t, ev->segment, true));
    reset_event(t);
  }

  void step_track(BusId bus, Track& t, SampleIndex k, bool violated,
                  std::vector<AnomalyReport>& out) {
    if (auto ev = t.seg.step(k, violated)) out.push_back(make_report(bus, t, ev->segment, false));
  }

  // Scalar CUSUM channels: step detectors, update histories, drive the track.
  void drive_cusum(BusId bus, Track& t, SampleIndex k, const std::vector<double>& values,
                   std::vector<AnomalyReport>& out) {
    close_if_due(bus, t, k, out);
    bool flag = false;
    int first = -1;
    double sev = 0.0;
    std::array<bool, 3> hit{};
    for (std::size_t c = 0; c < t.channels.size(); ++c) {
      auto& ch = t.channels[c];
      if (cusum_step(ch.det, values[c]) != Change::None) {
        flag = true;
        if (first < 0) first = static_cast<int>(c);
        sev = std::max(sev, std::abs(ch.det.last_z));
        if (t.channels.size() == 3) hit[c] = true;
      }
    }
    if (flag) {
      if (!t.seg.open()) {
        t.trigger = first;
        const auto& h = t.channels[static_cast<std::size_t>(first)].history;
        t.pre.assign(h.begin(), h.end());
        t.post.clear();
      }
      for (std::size_t p = 0; p < 3; ++p) t.phases[p] = t.phases[p] || hit[p];
      t.severity = std::max(t.severity, sev);
    }
    if ((flag || t.seg.open()) && t.trigger >= 0 &&
        static_cast<int>(t.post.size()) < cfg.trend.window) {
      t.post.push_back(values[static_cast<std::size_t>(t.trigger)]);
    }
    step_track(bus, t, k, flag, out);
    for (std::size_t c = 0; c < t.channels.size(); ++c) {
      auto& h = t.channels[c].history;
      h.push_back(values[c]);
      if (static_cast<int>(h.size()) > cfg.trend.window) h.pop_front();
    }
  }
};

LocalEngine::LocalEngine(BusId bus, LocalConfig config)
    : bus_(bus), impl_(std::make_unique<Impl>(std::move(config))) {}
LocalEngine::~LocalEngine() = default;
LocalEngine::LocalEngine(LocalEngine&&) noexcept = default;
LocalEngine& LocalEngine::operator=(LocalEngine&&) noexcept = default;

std::int64_t LocalEngine::data_quality_count() const { return impl_->bad_frames; }

std::vector<AnomalyReport> LocalEngine::push(const PhasorFrame& frame, DerivedSample* derived) {
  auto& im = *impl_;
  std::vector<AnomalyReport> out;
  const SampleIndex k = frame.k;

  DerivedSample d;
  d.k = k;
  d.vmag = frame.v.cwiseAbs();
  d.beta_hat = im.freq.update(frame.v);
  if (im.freq.data_quality_flag()) ++im.bad_frames;

  // Voltage magnitude rule.
  {
    auto& t = im.track(Rule::VoltageMag, std::nullopt, 0);
    bool violated = false;
    std::array<bool, 3> ph{};
    double extreme = 1.0;
    for (int p = 0; p < 3; ++p) {
      const double v = d.vmag(p);
      if (voltage_violates(v, im.cfg.voltage)) {
        violated = true;
        ph[static_cast<std::size_t>(p)] = true;
        if (std::abs(v - 1.0) > std::abs(extreme - 1.0)) extreme = v;
      }
    }
    im.close_if_due(bus_, t, k, out);
    if (violated) {
      for (std::size_t p = 0; p < 3; ++p) t.phases[p] = t.phases[p] || ph[p];
      if (std::abs(extreme - 1.0) > std::abs(t.extreme - 1.0)) t.extreme = extreme;
    }
    im.step_track(bus_, t, k, violated, out);
  }

  for (const auto& [id, i] : frame.i_lines) {
    LineDerived ld;
    ld.imag = i.cwiseAbs();
    auto pq = complex_power(frame.v, i);
    ld.P = pq.P;
    ld.Q = pq.Q;
    auto wit = im.windows.find(id);
    if (wit == im.windows.end()) wit = im.windows.emplace(id, WindowBuffer(im.cfg.window_m)).first;
    wit->second.push(frame.v, i);
    if (auto R = qss_correlations(wit->second)) ld.qss_residual = qss_residual(*R);
    d.lines.emplace(id, ld);
  }

  for (const auto& [id, ld] : d.lines) {
    auto rit = im.cfg.ratings.find(id);
    if (rit == im.cfg.ratings.end()) continue;
    auto& t = im.track(Rule::Overcurrent, id, 0);
    auto flags = check_overcurrent(ld.imag, rit->second);
    const bool violated = flags[0] || flags[1] || flags[2];
    im.close_if_due(bus_, t, k, out);
    im.step_track(bus_, t, k, violated, out);
  }

  for (const auto& [id, ld] : d.lines) {
    auto to_vec = [](const Vec3& x) { return std::vector<double>{x(0), x(1), x(2)}; };
    im.drive_cusum(bus_, im.track(Rule::ActivePower, id, 3), k, to_vec(ld.P), out);
    im.drive_cusum(bus_, im.track(Rule::ReactivePower, id, 3), k, to_vec(ld.Q), out);
    im.drive_cusum(bus_, im.track(Rule::CurrentMag, id, 3), k, to_vec(ld.imag), out);
    if (ld.qss_residual) {
      im.drive_cusum(bus_, im.track(Rule::QssValidity, id, 1), k, {*ld.qss_residual}, out);
    }
  }
  im.drive_cusum(bus_, im.track(Rule::Frequency, std::nullopt, 1), k, {d.beta_hat}, out);

  if (derived) *derived = std::move(d);
  return out;
}

std::vector<AnomalyReport> LocalEngine::finish() {
  auto& im = *impl_;
  std::vector<AnomalyReport> out;
  for (auto& [key, t] : im.tracks) {
    if (auto ev = t.seg.flush()) {
      out.push_back(im.make_report(bus_, t, ev->segment, true));
      im.reset_event(t);
    }
  }
  return out;
}

std::vector<AnomalyReport> run_local(BusId bus, const LocalConfig& config,
                                     const std::vector<PhasorFrame>& frames,
                                     std::vector<DerivedSample>* derived) {
  LocalEngine engine(bus, config);
  std::vector<AnomalyReport> out;
  for (const auto& f : frames) {
    DerivedSample d;
    auto reps = engine.push(f, derived ? &d : nullptr);
    out.insert(out.end(), reps.begin(), reps.end());
    if (derived) derived->push_back(std::move(d));
  }
  auto rest = engine.finish();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace gridwatch::analytics
