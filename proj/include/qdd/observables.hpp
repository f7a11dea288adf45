// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Measured quantities: time traces, probe-window counts, depletion fidelity
// (from populations and from detected counts), the bright-exciton doubling
// ratio and the power-time depletion map.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdd/kmc.hpp"
#include "qdd/level_model.hpp"
#include "qdd/master_equation.hpp"
#include "qdd/pulse_protocol.hpp"

namespace qdd {

struct TimeTrace {
  std::vector<double> bin_edges;  // ns, strictly increasing
  std::vector<double> values;     // photons per cycle in each bin
  std::string line_label;
};

/// Bin edges 0, w, 2w, ... closing exactly at the period.
inline std::vector<double> make_bin_edges(double period, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
  const auto bins = static_cast<std::size_t>(std::ceil(period / bin_width - 1e-9));
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i < bins; ++i) edges[i] = bin_width * static_cast<double>(i);
  edges[bins] = period;
  return edges;
}

/// Histogram of event times, normalized per cycle.
inline TimeTrace bin_emissions(const EmissionRecord& record, std::string_view line,
                               double bin_width, bool detected_only) {
  const auto j = record.line_index(line);
  TimeTrace trace;
  trace.line_label = std::string(line);
  trace.bin_edges = make_bin_edges(record.period, bin_width);
  const std::size_t bins = trace.bin_edges.size() - 1;
  std::vector<std::uint64_t> counts(bins, 0);
  for (const auto& ev : record.events) {
    if (ev.line != j || (detected_only && !ev.detected)) continue;
    const auto b = std::min(static_cast<std::size_t>(std::max(0.0, ev.t / bin_width)), bins - 1);
    ++counts[b];
  }
  trace.values.resize(bins);
  const double n = static_cast<double>(std::max<std::uint64_t>(record.n_cycles, 1));
  for (std::size_t b = 0; b < bins; ++b) trace.values[b] = static_cast<double>(counts[b]) / n;
  return trace;
}

/// Expected photons per cycle per bin from a master-equation trajectory.
inline TimeTrace trace_from_trajectory(const Trajectory& traj, std::string_view line,
                                       const std::vector<double>& edges) {
  TimeTrace trace;
  trace.line_label = std::string(line);
  trace.bin_edges = edges;
  trace.values.resize(edges.size() - 1);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b)
    trace.values[b] = std::max(0.0, traj.emitted_between(line, edges[b], edges[b + 1]));
  return trace;
}

/// Number of matching events with t in [t0, t1).
inline std::uint64_t window_event_count(const EmissionRecord& record, std::string_view line,
                                        double t0, double t1, bool detected_only = true) {
  const auto j = record.line_index(line);
  std::uint64_t count = 0;
  for (const auto& ev : record.events)
    if (ev.line == j && ev.t >= t0 && ev.t < t1 && (!detected_only || ev.detected)) ++count;
  return count;
}

/// Mean detected counts per cycle on `line` in [t0, t1).
inline double probe_window_counts(const EmissionRecord& record, std::string_view line,
                                  double t0, double t1) {
  if (!(t0 >= 0.0 && t1 <= record.period + 1e-9 && t0 <= t1))
    throw std::invalid_argument("probe window must lie within the period");
  return static_cast<double>(window_event_count(record, line, t0, t1, true)) /
         static_cast<double>(record.n_cycles);
}

/// Per-cycle counts in a window, for error estimates.
inline std::vector<double> per_cycle_window_counts(const EmissionRecord& record,
                                                   std::string_view line, double t0, double t1,
                                                   bool detected_only = true) {
  const auto j = record.line_index(line);
  std::vector<double> out(record.n_cycles, 0.0);
  for (const auto& ev : record.events)
    if (ev.line == j && ev.t >= t0 && ev.t < t1 && (!detected_only || ev.detected))
      out[ev.cycle_index] += 1.0;
  return out;
}

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean with a batch-means standard error, which stays valid when successive
/// cycles are correlated through carried-over dark excitons.
inline MeanEstimate batch_mean(const std::vector<double>& values, std::size_t batches = 100) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  batches = std::clamp<std::size_t>(batches, 1, n);
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(n);
  if (batches < 2) return {mean, 0.0};
  const std::size_t per = n / batches;
  double ss = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += values[i];
    const double d = s / static_cast<double>(per) - mean;
    ss += d * d;
  }
  const double var_batch = ss / static_cast<double>(batches - 1);
  return {mean, std::sqrt(var_batch / static_cast<double>(batches))};
}

/// Fraction of cycles occupying each level at each observation time.
struct OccupancyTable {
  std::vector<double> times;
  std::vector<std::vector<MeanEstimate>> by_time;  // [time][level]
};

inline OccupancyTable occupancy_statistics(const EnsembleResult& result,
                                           const std::vector<double>& times,
                                           std::size_t n_levels, std::size_t batches = 100) {
  if (times.size() != result.n_observe)
    throw std::invalid_argument("observation times do not match the ensemble");
  OccupancyTable table;
  table.times = times;
  const auto n = result.record.n_cycles;
  std::vector<double> indicator(n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<MeanEstimate> row;
    for (LevelIndex lvl = 0; lvl < n_levels; ++lvl) {
      for (std::uint64_t c = 0; c < n; ++c)
        indicator[c] = result.observed_level(c, k) == lvl ? 1.0 : 0.0;
      row.push_back(batch_mean(indicator, batches));
    }
    table.by_time.push_back(std::move(row));
  }
  return table;
}

struct PopulationFidelity {
  double residual_de = 0.0;
  double fidelity_population = 1.0;
};

/// Dark-exciton population just before the probe transfer at t_probe.
inline PopulationFidelity depletion_fidelity_from_populations(const Trajectory& traj,
                                                              double t_probe) {
  if (traj.times.empty() || t_probe < traj.times.front() || t_probe > traj.times.back())
    throw std::invalid_argument("t_probe outside the trajectory");
  const auto p = traj.population_before(t_probe);
  const double residual = std::clamp(p[traj.level_index(level::kDark)], 0.0, 1.0);
  return {residual, 1.0 - residual};
}

struct CountFidelity {
  double value = 0.0;
  bool clamped = false;
};

/// Detected rate divided by the rate expected for unit occupancy.
inline CountFidelity fidelity_from_counts(double counts_per_second, double rep_rate,
                                          double efficiency) {
  if (!(counts_per_second > 0.0)) return {0.0, counts_per_second < 0.0};
  const double denom = rep_rate * efficiency;
  if (!(denom > 0.0)) return {1.0, true};
  const double f = counts_per_second / denom;
  if (f > 1.0) return {1.0, true};
  return {f, false};
}

struct FidelityReport {
  double fidelity_population = 1.0;
  double fidelity_counts = 0.0;
  double residual_de = 0.0;
  bool counts_clamped = false;
  std::uint64_t n_cycles = 0;
  std::uint64_t seed = 0;
};

/// Counts-side fidelity from a Monte Carlo record. An Empty -> BE probe
/// counts empty dots on the X0 line; a DE -> XX_T3 probe counts residual dark
/// excitons on the XX0_T3 line.
inline CountFidelity fidelity_counts_from_record(const EmissionRecord& record,
                                                 ProbeTarget target, double t0, double t1) {
  const double rep_rate = 1e9 / record.period;  // s^-1
  const auto line = target == ProbeTarget::Empty ? line::kExciton : line::kBlockaded;
  const double cps = probe_window_counts(record, line, t0, t1) * rep_rate;
  auto f = fidelity_from_counts(cps, rep_rate, record.detection_efficiency);
  if (target == ProbeTarget::DarkExciton) f.value = 1.0 - f.value;
  return f;
}

/// High-power over low-power X0 counts per cycle in the probe window [t0, t1).
/// Both records must come from the Empty -> BE probe configuration.
inline double be_doubling_ratio(const EmissionRecord& high, const EmissionRecord& low,
                                double t0, double t1, bool detected_only = true) {
  const auto per_cycle = [&](const EmissionRecord& r) {
    return static_cast<double>(window_event_count(r, line::kExciton, t0, t1, detected_only)) /
           static_cast<double>(r.n_cycles);
  };
  const double denom = per_cycle(low);
  if (denom == 0.0) throw std::domain_error("low-power record has no X0 counts in the window");
  return per_cycle(high) / denom;
}

/// Master-equation run over one period from the start-of-cycle state the
/// Monte Carlo ensemble settles into: the periodic steady state, or Empty
/// when every cycle is reset.
inline Trajectory periodic_trajectory(const LevelGraph& graph, const Protocol& protocol,
                                      bool reset_each_cycle = false, double dt = 0.0) {
  PopulationVector start = PopulationVector::pure(graph.size(), graph.index(level::kEmpty));
  if (!reset_each_cycle) start = periodic_steady_state(cycle_map(graph, protocol, dt));
  return master_equation_evolve(graph, protocol, IntegratorConfig{dt, 0.0, 1}, start);
}

/// First probe instant of a protocol.
inline double probe_instant(const Protocol& protocol) {
  const auto probes = protocol.probes();
  if (probes.empty()) throw std::invalid_argument("protocol has no probe pulse");
  return probes.front().first;
}

struct PowerSweepMap {
  std::vector<double> powers;
  std::vector<double> bin_edges;
  std::vector<std::vector<double>> matrix;  // [power][bin], XX0_T3 photons per cycle
  std::vector<double> residual_de;          // master equation, per power
};

struct SweepOptions {
  KmcOptions kmc;
  double bin_width = 0.1;
  double dt = 0.0;
  bool detected_only = false;
};

/// Every row reuses the same seed, so rows differ only through the drive.
inline PowerSweepMap power_sweep(const LevelGraph& graph, const Protocol& protocol_template,
                                 const std::vector<double>& powers, const SweepOptions& opt) {
  if (powers.empty()) throw std::invalid_argument("power grid is empty");
  for (std::size_t i = 1; i < powers.size(); ++i)
    if (!(powers[i] > powers[i - 1]))
      throw std::invalid_argument("power grid must be strictly increasing");
  PowerSweepMap map;
  map.powers = powers;
  map.bin_edges = make_bin_edges(protocol_template.period(), opt.bin_width);
  const double t_probe = probe_instant(protocol_template);
  for (double power : powers) {
    const auto protocol = protocol_template.with_drive_power(kDepleteChannel, power);
    if (opt.kmc.n_cycles > 0) {
      const auto ens = kmc_ensemble_run(graph, protocol, opt.kmc);
      map.matrix.push_back(
          bin_emissions(ens.record, line::kBlockaded, opt.bin_width, opt.detected_only).values);
    } else {
      map.matrix.emplace_back(map.bin_edges.size() - 1, 0.0);
    }
    const auto traj = periodic_trajectory(graph, protocol, opt.kmc.reset_each_cycle, opt.dt);
    map.residual_de.push_back(depletion_fidelity_from_populations(traj, t_probe).residual_de);
  }
  return map;
}

}  // namespace qdd
