// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/rules.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::analytics {

PowerPair complex_power(const Vec3c& v, const Vec3c& i) {
  PowerPair out;
  for (int p = 0; p < 3; ++p) {
    const Complex s = v(p) * std::conj(i(p));
    out.P(p) = s.real();
    out.Q(p) = s.imag();
  }
  return out;
}

std::array<bool, 3> check_overcurrent(const Vec3& imag, const Vec3& rating) {
  std::array<bool, 3> flags{};
  for (int p = 0; p < 3; ++p) {
    flags[static_cast<std::size_t>(p)] = rating(p) > 0.0 && imag(p) > rating(p);
  }
  return flags;
}

bool voltage_violates(double vmag, const VoltageThresholds& t) {
  return vmag <= t.sag || vmag >= t.swell;
}

VoltageClass classify_voltage(double extreme, double duration_s, const VoltageThresholds& t) {
  VoltageClass c;
  c.extreme = extreme;
  c.duration_s = duration_s;
  const bool is_long = duration_s > t.long_duration_s;
  if (extreme < t.interruption) {
    c.label = is_long ? Label::SustainedInterruption : Label::Interruption;
  } else if (extreme <= t.sag) {
    c.label = is_long ? Label::Undervoltage : Label::Sag;
  } else if (extreme <= t.table_max) {
    c.label = is_long ? Label::Overvoltage : Label::Swell;
  } else {
    c.label = Label::Overvoltage;
    c.out_of_table = true;
  }
  return c;
}

std::optional<VoltageClass> classify_voltage(std::span<const Vec3> series, double sample_period,
                                             const VoltageThresholds& t) {
  std::optional<std::size_t> first;
  std::size_t last = 0;
  double extreme = 1.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (int p = 0; p < 3; ++p) {
      const double v = series[k](p);
      if (!voltage_violates(v, t)) continue;
      if (!first) first = k;
      last = k;
      if (std::abs(v - 1.0) > std::abs(extreme - 1.0)) extreme = v;
    }
  }
  if (!first) return std::nullopt;
  const double duration = static_cast<double>(last - *first + 1) * sample_period;
  return classify_voltage(extreme, duration, t);
}

Complex positive_sequence(const Vec3c& v) {
  const Complex a = std::polar(1.0, 2.0 * 3.14159265358979323846 / 3.0);
  return (v(0) + a * v(1) + a * a * v(2)) / 3.0;
}

double FrequencyTracker::update(const Vec3c& v) {
  const Complex vp = positive_sequence(v);
  const double scale = v.cwiseAbs().maxCoeff();
  if (!(std::abs(vp) > 1e-9 * std::max(scale, 1e-300)) || !std::isfinite(std::abs(vp))) {
    bad_ = true;
    return beta_;
  }
  bad_ = false;
  if (have_prev_) {
    const double inc = std::arg(vp * std::conj(prev_));
    if (!have_beta_) {
      beta_ = inc;
      have_beta_ = true;
    } else {
      beta_ = lambda_ * beta_ + (1.0 - lambda_) * inc;
    }
  }
  prev_ = vp;
  have_prev_ = true;
  return beta_;
}

namespace {

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double variance_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

Label classify_trend(std::span<const double> pre, std::span<const double> post,
                     const TrendParams& params) {
  const auto take_pre = std::min<std::size_t>(pre.size(), static_cast<std::size_t>(params.window));
  const auto take_post =
      std::min<std::size_t>(post.size(), static_cast<std::size_t>(params.window));
  pre = pre.subspan(pre.size() - take_pre);
  post = post.first(take_post);

  const std::size_t n = pre.size() + post.size();
  double st = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    st += static_cast<double>(i);
    sx += i < pre.size() ? pre[i] : post[i - pre.size()];
  }
  const double tm = st / static_cast<double>(n);
  const double xm = sx / static_cast<double>(n);
  double stt = 0.0, sxx = 0.0, stx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (i < pre.size() ? pre[i] : post[i - pre.size()]) - xm;
    const double t = static_cast<double>(i) - tm;
    stt += t * t;
    sxx += x * x;
    stx += t * x;
  }
  const double slope = (stt > 0.0 && sxx > 0.0) ? stx / std::sqrt(stt * sxx) : 0.0;

  if (slope > params.s_min) return Label::Surge;
  if (slope < -params.s_min) return Label::Drop;
  const double var_pre = variance_of(pre);
  const double var_post = variance_of(post);
  if (var_post > params.rho * var_pre && var_post > 0.0) return Label::Oscillation;
  return mean_of(post) >= mean_of(pre) ? Label::Surge : Label::Drop;
}

}  // namespace gridwatch::analytics
