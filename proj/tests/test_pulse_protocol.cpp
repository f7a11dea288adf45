// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "qdd/pulse_protocol.hpp"

namespace qdd {
namespace {

const PulseShape kShape{0.0, 20.0, 0.5, 0.5};

TEST(Envelope, Trapezoid) {
  EXPECT_DOUBLE_EQ(envelope(kShape, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(envelope(kShape, 0.25), 0.5);
  EXPECT_DOUBLE_EQ(envelope(kShape, 25.0), 0.0);
  EXPECT_DOUBLE_EQ(envelope(kShape, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(envelope(kShape, 19.75), 0.5);
  EXPECT_DOUBLE_EQ(envelope(kShape, 0.5), 1.0);
}

TEST(Envelope, ShapeValidation) {
  EXPECT_THROW((PulseShape{0.0, 0.0, 0.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((PulseShape{0.0, 1.0, 0.6, 0.6}.validate()), std::invalid_argument);
  EXPECT_THROW((PulseShape{0.0, 1.0, -0.1, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((PulseShape{0.0, 1.0, 0.5, 0.5}.validate()));
}

TEST(EnvelopeProperty, LipschitzOnRamps) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double dur = 0.1 + 30.0 * u(rng);
    const double rise = 0.5 * dur * u(rng), fall = 0.5 * dur * u(rng);
    const PulseShape s{5.0 * u(rng), dur, rise, fall};
    const double lo = std::min(rise, fall);
    if (lo <= 0.0) continue;
    const double t = s.t_start - 1.0 + (dur + 2.0) * u(rng);
    const double delta = 0.01 * u(rng);
    const double diff = std::abs(envelope(s, t + delta) - envelope(s, t));
    EXPECT_LE(diff, delta / lo + 1e-12);
    const double e = envelope(s, t);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
  }
}

TEST(DriveRate, SaturationLaw) {
  const PowerModel pm;
  EXPECT_EQ(drive_rate(pm, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(drive_rate(pm, pm.p_sat, 1.0), pm.r_max / 2.0);
  const double near_sat = drive_rate(pm, 99.0 * pm.p_sat, 1.0);
  EXPECT_NEAR(near_sat, 0.99 * pm.r_max, 1e-12);
  EXPECT_LT(std::abs(near_sat - pm.r_max) / pm.r_max, 0.01 + 1e-12);
  EXPECT_EQ(drive_rate(pm, 5.0, 0.0), 0.0);
}

TEST(DriveRateProperty, MonotoneInPowerAndEnvelope) {
  const PowerModel pm{2.0, 1.0};
  for (int i = 0; i <= 100; ++i) {
    const double env = i / 100.0;
    double prev = -1.0;
    for (int k = 0; k <= 200; ++k) {
      const double r = drive_rate(pm, 0.25 * k, env);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
  for (int k = 0; k <= 200; ++k) {
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double r = drive_rate(pm, 0.25 * k, i / 100.0);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(DefaultProtocol, Timing) {
  const auto p = default_protocol(1.0);
  EXPECT_NEAR(p.period(), 105.2631578947, 1e-9);
  EXPECT_DOUBLE_EQ(p.period(), 1000.0 / 9.5);
  ASSERT_EQ(p.probes().size(), 1u);
  EXPECT_DOUBLE_EQ(p.probes().front().first, 48.0);
  ASSERT_EQ(p.pulses().size(), 3u);
  EXPECT_EQ(p.pulses()[0].shape, (PulseShape{0.0, 20.0, 0.0, 0.0}));
  EXPECT_EQ(p.pulses()[1].shape, (PulseShape{23.0, 20.0, 0.5, 0.5}));
  EXPECT_DOUBLE_EQ(p.pulses()[2].shape.duration, 0.008);
  const auto& probe = std::get<PiProbe>(p.pulses()[2].kind);
  EXPECT_EQ(probe.mapping,
            (std::vector<std::pair<std::string, std::string>>{{"DE", "XX_T3"}}));
  EXPECT_DOUBLE_EQ(probe.fraction, 1.0);
  EXPECT_DOUBLE_EQ(p.drive_rate_at("deplete", 30.0), 1.0);
  EXPECT_DOUBLE_EQ(p.generation_rate_at(10.0), ProtocolSettings{}.gen_rate_ns);
  EXPECT_DOUBLE_EQ(p.generation_rate_at(21.0), 0.0);
}

TEST(DefaultProtocol, EmptyProbeTarget) {
  ProtocolSettings s;
  s.probe_target = ProbeTarget::Empty;
  const auto p = build_protocol(s, 20.0);
  EXPECT_EQ(std::get<PiProbe>(p.pulses()[2].kind).mapping,
            (std::vector<std::pair<std::string, std::string>>{{"Empty", "BE"}}));
}

TEST(Protocol, Validation) {
  const PowerModel pm;
  const Pulse drive_a{{10.0, 20.0, 0.5, 0.5}, ResonantDrive{"deplete", 1.0}};
  const Pulse drive_b{{25.0, 10.0, 0.0, 0.0}, ResonantDrive{"deplete", 1.0}};
  const Pulse other{{25.0, 10.0, 0.0, 0.0}, ResonantDrive{"other", 1.0}};
  EXPECT_THROW(Protocol(100.0, {drive_a, drive_b}, pm), std::invalid_argument);
  EXPECT_NO_THROW(Protocol(100.0, {drive_a, other}, pm));
  EXPECT_THROW(Protocol(20.0, {drive_a}, pm), std::invalid_argument);
  EXPECT_THROW(Protocol(0.0, {}, pm), std::invalid_argument);
  EXPECT_THROW(Protocol(100.0, {drive_a}, PowerModel{0.0, 1.0}), std::invalid_argument);
  PiProbe bad;
  bad.mapping = {{"DE", "XX_T3"}, {"Empty", "XX_T3"}};
  EXPECT_THROW(Protocol(100.0, {{{50.0, 0.008, 0.0, 0.0}, bad}}, pm), std::invalid_argument);
  PiProbe frac;
  frac.mapping = {{"DE", "XX_T3"}};
  frac.fraction = 1.5;
  EXPECT_THROW(Protocol(100.0, {{{50.0, 0.008, 0.0, 0.0}, frac}}, pm), std::invalid_argument);
  EXPECT_THROW(Protocol(100.0, {{{0.0, 5.0, 0.0, 0.0}, NonResonantGeneration{-1.0}}}, pm),
               std::invalid_argument);
  EXPECT_THROW(build_protocol(ProtocolSettings{}, -1.0), std::invalid_argument);
}

TEST(RateBound, Examples) {
  const auto p = default_protocol(1.0);
  EXPECT_EQ(rate_bound(p, "deplete", 50.0, 100.0), 0.0);
  EXPECT_EQ(rate_bound(p, "deplete", 0.0, 22.9), 0.0);
  EXPECT_DOUBLE_EQ(rate_bound(p, "deplete", 25.0, 40.0), 1.0);
  // Supremum on the rising ramp sits at its right end, where env = 0.5.
  EXPECT_DOUBLE_EQ(rate_bound(p, "deplete", 23.0, 23.25), drive_rate(PowerModel{}, 1.0, 0.5));
  EXPECT_THROW(rate_bound(p, "nope", 0.0, 1.0), std::invalid_argument);
}

TEST(RateBoundProperty, SoundOnRandomSamples) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double dur = 0.5 + 40.0 * u(rng);
    const PulseShape s{50.0 * u(rng), dur, 0.5 * dur * u(rng), 0.5 * dur * u(rng)};
    const Protocol p(100.0, {{s, ResonantDrive{"deplete", 100.0 * u(rng)}}},
                     PowerModel{0.1 + 5.0 * u(rng), 0.1 + 5.0 * u(rng)});
    double t0 = 100.0 * u(rng), t1 = 100.0 * u(rng);
    if (t0 > t1) std::swap(t0, t1);
    const double t = t0 + (t1 - t0) * u(rng);
    const double bound = rate_bound(p, "deplete", t0, t1);
    EXPECT_LE(p.drive_rate_at("deplete", t), bound * (1.0 + 1e-12) + 1e-15);
  }
}

TEST(RateSchedule, SegmentsMatchProtocolAndBoundIt) {
  const auto p = default_protocol(3.0);
  const RateSchedule sched(p, {"deplete"});
  const auto bp = p.breakpoints();
  ASSERT_EQ(sched.segments().size(), bp.size() - 1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& seg : sched.segments()) {
    for (int k = 0; k < 50; ++k) {
      const double t = seg.begin + (seg.end - seg.begin) * (0.001 + 0.998 * u(rng));
      EXPECT_NEAR(sched.drive(seg, 0, t), p.drive_rate_at("deplete", t), 1e-12);
      EXPECT_NEAR(sched.generation(seg, t), p.generation_rate_at(t), 1e-12);
      EXPECT_LE(sched.drive(seg, 0, t), sched.drive_bound(seg, 0) + 1e-15);
      EXPECT_LE(sched.generation(seg, t), sched.generation_bound(seg) + 1e-15);
    }
  }
  std::size_t probes = 0;
  for (const auto& seg : sched.segments()) {
    probes += seg.probes_at_end.size();
    if (!seg.probes_at_end.empty()) {
      EXPECT_DOUBLE_EQ(seg.end, 48.0);
    }
  }
  EXPECT_EQ(probes, 1u);
}

TEST(RateSchedule, RectangularEdgesAreOneSided) {
  const auto p = default_protocol(0.0);
  const RateSchedule sched(p, {"deplete"});
  const auto& first = sched.segments().front();
  EXPECT_DOUBLE_EQ(first.begin, 0.0);
  EXPECT_DOUBLE_EQ(first.end, 20.0);
  EXPECT_DOUBLE_EQ(sched.generation(first, 0.0), ProtocolSettings{}.gen_rate_ns);
  EXPECT_DOUBLE_EQ(sched.generation(first, 20.0), ProtocolSettings{}.gen_rate_ns);
  EXPECT_DOUBLE_EQ(sched.generation(sched.segments()[1], 20.0), 0.0);
}

TEST(Protocol, WithDrivePower) {
  const auto p = default_protocol(1.0).with_drive_power("deplete", 20.0);
  EXPECT_EQ(p, default_protocol(20.0));
  EXPECT_THROW(default_protocol(1.0).with_drive_power("deplete", -2.0),
               std::invalid_argument);
}

}  // namespace
}  // namespace qdd
