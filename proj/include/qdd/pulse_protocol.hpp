// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Three-pulse excitation schedule (non-resonant generation, resonant
// depletion drive, instantaneous pi probe) and the power-to-rate law.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qdd/level_model.hpp"

namespace qdd {

/// Trapezoidal envelope: zero before t_start, linear ramp over `rise`, flat
/// top, linear ramp down over `fall`, zero after t_start + duration.
struct PulseShape {
  double t_start = 0.0;
  double duration = 1.0;
  double rise = 0.0;
  double fall = 0.0;

  double t_end() const { return t_start + duration; }
  double plateau_begin() const { return t_start + rise; }
  double plateau_end() const { return t_end() - fall; }

  void validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("pulse duration must be positive");
    if (!(rise >= 0.0) || !(fall >= 0.0))
      throw std::invalid_argument("pulse rise and fall must be non-negative");
    if (rise + fall > duration)
      throw std::invalid_argument("pulse rise + fall exceeds its duration");
  }

  bool operator==(const PulseShape&) const = default;
};

inline double envelope(const PulseShape& s, double t) {
  if (t < s.t_start || t > s.t_end()) return 0.0;
  if (t < s.plateau_begin()) return (t - s.t_start) / s.rise;
  if (t > s.plateau_end()) return (s.t_end() - t) / s.fall;
  return 1.0;
}

/// Supremum of the envelope over [t0, t1]. The trapezoid is unimodal, so the
/// supremum is 1 when the interval meets the plateau and otherwise sits at an
/// interval endpoint.
inline double envelope_sup(const PulseShape& s, double t0, double t1) {
  if (t1 < s.t_start || t0 > s.t_end()) return 0.0;
  if (t0 <= s.plateau_end() && t1 >= s.plateau_begin()) return 1.0;
  return std::max(envelope(s, t0), envelope(s, t1));
}

/// Saturation law R = r_max * x / (x + p_sat) with x = power * envelope.
struct PowerModel {
  double r_max = 2.0;
  double p_sat = 1.0;

  void validate() const {
    if (!(r_max > 0.0)) throw std::invalid_argument("r_max_ns must be positive");
    if (!(p_sat > 0.0)) throw std::invalid_argument("p_sat must be positive");
  }
  bool operator==(const PowerModel&) const = default;
};

inline double drive_rate(const PowerModel& pm, double power, double env) {
  const double x = power * env;
  if (x <= 0.0) return 0.0;
  return pm.r_max * x / (x + pm.p_sat);
}

struct NonResonantGeneration {
  double gen_rate = 0.0;  // ns^-1, capture events while the pulse is on
  bool operator==(const NonResonantGeneration&) const = default;
};

struct ResonantDrive {
  std::string channel;
  double power = 0.0;  // units of p_sat
  bool operator==(const ResonantDrive&) const = default;
};

/// Instantaneous population transfer applied at shape.t_start.
struct PiProbe {
  std::vector<std::pair<std::string, std::string>> mapping;
  double fraction = 1.0;
  bool operator==(const PiProbe&) const = default;
};

struct Pulse {
  PulseShape shape;
  std::variant<NonResonantGeneration, ResonantDrive, PiProbe> kind;

  bool operator==(const Pulse&) const = default;
};

class Protocol {
 public:
  Protocol() = default;
  Protocol(double period, std::vector<Pulse> pulses, PowerModel pm)
      : period_(period), pulses_(std::move(pulses)), power_model_(pm) {
    validate();
  }

  double period() const { return period_; }
  const std::vector<Pulse>& pulses() const { return pulses_; }
  const PowerModel& power_model() const { return power_model_; }

  /// Drive rate on a channel at time t (ns^-1).
  double drive_rate_at(std::string_view channel, double t) const {
    double r = 0.0;
    for (const auto& p : pulses_)
      if (auto* d = std::get_if<ResonantDrive>(&p.kind); d && d->channel == channel)
        r += drive_rate(power_model_, d->power, envelope(p.shape, t));
    return r;
  }

  /// Non-resonant capture rate at time t (ns^-1).
  double generation_rate_at(double t) const {
    double g = 0.0;
    for (const auto& p : pulses_)
      if (auto* gen = std::get_if<NonResonantGeneration>(&p.kind))
        g += gen->gen_rate * envelope(p.shape, t);
    return g;
  }

  double generation_bound(double t0, double t1) const {
    double g = 0.0;
    for (const auto& p : pulses_)
      if (auto* gen = std::get_if<NonResonantGeneration>(&p.kind))
        g += gen->gen_rate * envelope_sup(p.shape, t0, t1);
    return g;
  }

  bool has_channel(std::string_view channel) const {
    return std::any_of(pulses_.begin(), pulses_.end(), [&](const Pulse& p) {
      auto* d = std::get_if<ResonantDrive>(&p.kind);
      return d && d->channel == channel;
    });
  }

  /// Probe pulses sorted by instant.
  std::vector<std::pair<double, PiProbe>> probes() const {
    std::vector<std::pair<double, PiProbe>> out;
    for (const auto& p : pulses_)
      if (auto* pr = std::get_if<PiProbe>(&p.kind)) out.emplace_back(p.shape.t_start, *pr);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  /// Times in [0, period] where any rate has a kink or jump, or a probe fires.
  /// Always includes 0 and the period.
  std::vector<double> breakpoints() const {
    std::vector<double> bp{0.0, period_};
    for (const auto& p : pulses_) {
      if (std::holds_alternative<PiProbe>(p.kind)) {
        bp.push_back(p.shape.t_start);
        continue;
      }
      for (double t : {p.shape.t_start, p.shape.plateau_begin(), p.shape.plateau_end(),
                       p.shape.t_end()})
        bp.push_back(std::clamp(t, 0.0, period_));
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
             bp.end());
    return bp;
  }

  /// Copy with every drive on `channel` set to `power`.
  Protocol with_drive_power(std::string_view channel, double power) const {
    Protocol out = *this;
    for (auto& p : out.pulses_)
      if (auto* d = std::get_if<ResonantDrive>(&p.kind); d && d->channel == channel)
        d->power = power;
    out.validate();
    return out;
  }

  bool operator==(const Protocol&) const = default;

 private:
  void validate() const {
    if (!(period_ > 0.0)) throw std::invalid_argument("period_ns must be positive");
    power_model_.validate();
    for (const auto& p : pulses_) {
      p.shape.validate();
      const bool probe = std::holds_alternative<PiProbe>(p.kind);
      const double end = probe ? p.shape.t_start : p.shape.t_end();
      if (p.shape.t_start < 0.0 || end > period_ + 1e-9)
        throw std::invalid_argument("pulse does not fit within the repetition period");
      if (auto* g = std::get_if<NonResonantGeneration>(&p.kind); g && !(g->gen_rate >= 0.0))
        throw std::invalid_argument("gen_rate_ns must be non-negative");
      if (auto* d = std::get_if<ResonantDrive>(&p.kind); d && !(d->power >= 0.0))
        throw std::invalid_argument("drive power must be non-negative");
      if (auto* pr = std::get_if<PiProbe>(&p.kind)) {
        if (!(pr->fraction >= 0.0 && pr->fraction <= 1.0))
          throw std::invalid_argument("pi_fraction must lie in [0,1]");
        for (std::size_t i = 0; i < pr->mapping.size(); ++i)
          for (std::size_t j = i + 1; j < pr->mapping.size(); ++j)
            if (pr->mapping[i].first == pr->mapping[j].first ||
                pr->mapping[i].second == pr->mapping[j].second)
              throw std::invalid_argument("probe mapping is not injective");
      }
    }
    for (std::size_t i = 0; i < pulses_.size(); ++i) {
      auto* a = std::get_if<ResonantDrive>(&pulses_[i].kind);
      if (!a) continue;
      for (std::size_t j = i + 1; j < pulses_.size(); ++j) {
        auto* b = std::get_if<ResonantDrive>(&pulses_[j].kind);
        if (!b || a->channel != b->channel) continue;
        const auto& sa = pulses_[i].shape;
        const auto& sb = pulses_[j].shape;
        if (sa.t_start < sb.t_end() && sb.t_start < sa.t_end())
          throw std::invalid_argument("overlapping drives on channel '" + a->channel + "'");
      }
    }
  }

  double period_ = 1.0;
  std::vector<Pulse> pulses_;
  PowerModel power_model_;
};

/// Tight upper bound on a channel's drive rate over [t0, t1]. Drives on one
/// channel never overlap, so the supremum is the largest per-pulse supremum.
inline double rate_bound(const Protocol& protocol, std::string_view channel, double t0,
                         double t1) {
  if (!protocol.has_channel(channel))
    throw std::invalid_argument("unknown drive channel '" + std::string(channel) + "'");
  double bound = 0.0;
  for (const auto& p : protocol.pulses())
    if (auto* d = std::get_if<ResonantDrive>(&p.kind); d && d->channel == channel)
      bound = std::max(bound, drive_rate(protocol.power_model(), d->power,
                                         envelope_sup(p.shape, t0, t1)));
  return bound;
}

/// Piecewise view of a protocol between consecutive breakpoints. Inside a
/// segment every envelope is affine, so it is stored by its one-sided values
/// at the segment ends; this keeps rectangular pulse edges unambiguous.
class RateSchedule {
 public:
  struct Affine {
    double at_begin = 0.0;
    double at_end = 0.0;
  };
  struct DriveTerm {
    std::size_t channel = 0;
    double power = 0.0;
    Affine env;
  };
  struct GenerationTerm {
    double gen_rate = 0.0;
    Affine env;
  };
  struct Segment {
    double begin = 0.0;
    double end = 0.0;
    std::vector<DriveTerm> drives;
    std::vector<GenerationTerm> generation;
    // Probe fired at `end`, if any.
    std::vector<PiProbe> probes_at_end;
  };

  /// `channels` fixes the channel indexing; drives on other channels are ignored.
  RateSchedule(const Protocol& protocol, const std::vector<std::string>& channels)
      : power_model_(protocol.power_model()), channel_count_(channels.size()) {
    const auto bp = protocol.breakpoints();
    const auto probes = protocol.probes();
    for (const auto& [t, probe] : probes)
      if (t <= 0.0) initial_probes_.push_back(probe);
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
      Segment seg;
      seg.begin = bp[k];
      seg.end = bp[k + 1];
      // Two interior points determine the affine envelope exactly.
      const double w = seg.end - seg.begin;
      const double t1 = seg.begin + 0.25 * w;
      const double t2 = seg.end - 0.25 * w;
      auto affine = [&](const PulseShape& s) {
        const double e1 = envelope(s, t1), e2 = envelope(s, t2);
        const double slope = (e2 - e1) / (t2 - t1);
        return Affine{std::clamp(e1 - slope * (t1 - seg.begin), 0.0, 1.0),
                      std::clamp(e2 + slope * (seg.end - t2), 0.0, 1.0)};
      };
      for (const auto& p : protocol.pulses()) {
        if (auto* d = std::get_if<ResonantDrive>(&p.kind)) {
          auto it = std::find(channels.begin(), channels.end(), d->channel);
          if (it == channels.end()) continue;
          auto env = affine(p.shape);
          if (env.at_begin == 0.0 && env.at_end == 0.0) continue;
          seg.drives.push_back(
              {static_cast<std::size_t>(it - channels.begin()), d->power, env});
        } else if (auto* g = std::get_if<NonResonantGeneration>(&p.kind)) {
          auto env = affine(p.shape);
          if (env.at_begin == 0.0 && env.at_end == 0.0) continue;
          seg.generation.push_back({g->gen_rate, env});
        }
      }
      for (const auto& [t, probe] : probes)
        if (std::abs(t - seg.end) <= 1e-12) seg.probes_at_end.push_back(probe);
      segments_.push_back(std::move(seg));
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<PiProbe>& initial_probes() const { return initial_probes_; }
  std::size_t channel_count() const { return channel_count_; }
  const PowerModel& power_model() const { return power_model_; }

  static double eval(const Segment& seg, const Affine& a, double t) {
    const double w = seg.end - seg.begin;
    const double x = w > 0.0 ? (t - seg.begin) / w : 0.0;
    return a.at_begin + (a.at_end - a.at_begin) * x;
  }

  double drive(const Segment& seg, std::size_t channel, double t) const {
    double r = 0.0;
    for (const auto& d : seg.drives)
      if (d.channel == channel) r += drive_rate(power_model_, d.power, eval(seg, d.env, t));
    return r;
  }

  double drive_bound(const Segment& seg, std::size_t channel) const {
    double r = 0.0;
    for (const auto& d : seg.drives)
      if (d.channel == channel)
        r += drive_rate(power_model_, d.power, std::max(d.env.at_begin, d.env.at_end));
    return r;
  }

  double generation(const Segment& seg, double t) const {
    double g = 0.0;
    for (const auto& term : seg.generation) g += term.gen_rate * eval(seg, term.env, t);
    return g;
  }

  double generation_bound(const Segment& seg) const {
    double g = 0.0;
    for (const auto& term : seg.generation)
      g += term.gen_rate * std::max(term.env.at_begin, term.env.at_end);
    return g;
  }

 private:
  PowerModel power_model_;
  std::size_t channel_count_ = 0;
  std::vector<Segment> segments_;
  std::vector<PiProbe> initial_probes_;
};

enum class ProbeTarget { DarkExciton, Empty };

/// Flat timing and rate settings from which the three-pulse protocol is built.
struct ProtocolSettings {
  double period_ns = 1000.0 / 9.5;
  double gen_rate_ns = 0.036;
  double gen_pulse_ns = 20.0;
  double gap_ns = 3.0;
  double deplete_pulse_ns = 20.0;
  double probe_delay_ns = 5.0;
  double rise_ns = 0.5;
  double fall_ns = 0.5;
  double r_max_ns = 2.0;
  double p_sat = 1.0;
  ProbeTarget probe_target = ProbeTarget::DarkExciton;
  double pi_fraction = 1.0;

  double deplete_start() const { return gen_pulse_ns + gap_ns; }
  double deplete_end() const { return deplete_start() + deplete_pulse_ns; }
  double probe_time() const { return deplete_end() + probe_delay_ns; }

  bool operator==(const ProtocolSettings&) const = default;
};

inline constexpr double kProbePulseDuration = 0.008;

inline Protocol build_protocol(const ProtocolSettings& s, double depletion_power) {
  if (!(s.gap_ns >= 0.0)) throw std::invalid_argument("gap_ns must be non-negative");
  if (!(s.probe_delay_ns >= 0.0))
    throw std::invalid_argument("probe_delay_ns must be non-negative");
  std::vector<Pulse> pulses;
  pulses.push_back({PulseShape{0.0, s.gen_pulse_ns, 0.0, 0.0},
                    NonResonantGeneration{s.gen_rate_ns}});
  pulses.push_back({PulseShape{s.deplete_start(), s.deplete_pulse_ns, s.rise_ns, s.fall_ns},
                    ResonantDrive{std::string(kDepleteChannel), depletion_power}});
  PiProbe probe;
  probe.fraction = s.pi_fraction;
  if (s.probe_target == ProbeTarget::DarkExciton)
    probe.mapping = {{std::string(level::kDark), std::string(level::kBiexcitonBlockaded)}};
  else
    probe.mapping = {{std::string(level::kEmpty), std::string(level::kBright)}};
  pulses.push_back({PulseShape{s.probe_time(), kProbePulseDuration, 0.0, 0.0}, probe});
  return Protocol(s.period_ns, std::move(pulses), PowerModel{s.r_max_ns, s.p_sat});
}

inline Protocol default_protocol(double depletion_power) {
  return build_protocol(ProtocolSettings{}, depletion_power);
}

}  // namespace qdd
