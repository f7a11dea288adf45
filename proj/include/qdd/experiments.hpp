// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// The reproduction experiments behind `qd-deplete run`: time traces at low
// and high depletion power, the power sweep, the fidelity report and the
// bright-exciton doubling ratio.

#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qdd/config.hpp"
#include "qdd/csv.hpp"
#include "qdd/kmc.hpp"
#include "qdd/master_equation.hpp"
#include "qdd/observables.hpp"
#include "qdd/svg_plot.hpp"

namespace qdd {

struct RunSummary {
  std::vector<std::filesystem::path> files;
  std::map<std::string, double> values;
};

namespace detail {

inline std::filesystem::path resolve_output(const std::filesystem::path& out_dir,
                                            const std::string& name) {
  const std::filesystem::path p(name);
  return p.is_absolute() ? p : out_dir / p;
}

inline std::filesystem::path sibling(const std::filesystem::path& csv, const std::string& suffix) {
  auto p = csv;
  p.replace_filename(csv.stem().string() + suffix + csv.extension().string());
  return p;
}

inline KmcOptions kmc_options(const RunConfig& cfg) {
  KmcOptions opt;
  opt.n_cycles = cfg.engine.n_cycles;
  opt.seed = cfg.engine.seed;
  opt.detection_efficiency = cfg.engine.detection_efficiency;
  opt.reset_each_cycle = cfg.engine.reset_each_cycle;
  return opt;
}

struct PowerRun {
  double power = 0.0;
  EmissionRecord record;
  Trajectory trajectory;
  FidelityReport fidelity;
};

inline PowerRun run_at_power(const LevelGraph& graph, const RunConfig& cfg,
                             const ProtocolSettings& settings, double power) {
  PowerRun run;
  run.power = power;
  const auto protocol = build_protocol(settings, power);
  run.record = kmc_ensemble_run(graph, protocol, kmc_options(cfg)).record;
  run.trajectory =
      periodic_trajectory(graph, protocol, cfg.engine.reset_each_cycle, cfg.engine.dt_ns);
  const auto pop = depletion_fidelity_from_populations(run.trajectory, settings.probe_time());
  const auto counts =
      fidelity_counts_from_record(run.record, settings.probe_target,
                                  cfg.analysis.probe_window_begin_ns,
                                  cfg.analysis.probe_window_end_ns);
  run.fidelity = {pop.fidelity_population, counts.value, pop.residual_de, counts.clamped,
                  cfg.engine.n_cycles, cfg.engine.seed};
  return run;
}

inline Table fidelity_table(const std::vector<PowerRun>& runs) {
  Table t{{"power", "fidelity_population", "fidelity_counts", "residual_de", "counts_clamped",
           "n_cycles", "seed"},
          {}};
  for (const auto& r : runs)
    t.rows.push_back({r.power, r.fidelity.fidelity_population, r.fidelity.fidelity_counts,
                      r.fidelity.residual_de, std::uint64_t{r.fidelity.counts_clamped ? 1u : 0u},
                      r.fidelity.n_cycles, r.fidelity.seed});
  return t;
}

inline RunSummary run_trace(const LevelGraph& graph, const RunConfig& cfg,
                            const std::filesystem::path& csv, const std::filesystem::path& plot) {
  RunSummary summary;
  std::vector<PowerRun> runs{run_at_power(graph, cfg, cfg.protocol, cfg.analysis.low_power),
                             run_at_power(graph, cfg, cfg.protocol, cfg.analysis.high_power)};
  const char* tags[] = {"low", "high"};
  const auto edges = make_bin_edges(cfg.protocol.period_ns, cfg.output.bin_width_ns);
  const auto lines = graph.line_labels();

  Table t{{"t_ns"}, {}};
  std::vector<std::vector<double>> columns;
  std::vector<svg::Series> series;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& line : lines) {
      t.columns.push_back("kmc_" + line + "_" + tags[r]);
      columns.push_back(bin_emissions(runs[r].record, line, cfg.output.bin_width_ns, false).values);
      if (line == line::kBlockaded) series.push_back({line + " " + tags[r], columns.back()});
    }
    for (const auto& line : lines) {
      t.columns.push_back("me_" + line + "_" + tags[r]);
      columns.push_back(trace_from_trajectory(runs[r].trajectory, line, edges).values);
    }
  }
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    std::vector<Cell> row{edges[b]};
    for (const auto& c : columns) row.emplace_back(c[b]);
    t.rows.push_back(std::move(row));
  }
  write_csv(t, csv);
  const auto fid_path = sibling(csv, "_fidelity");
  write_csv(fidelity_table(runs), fid_path);
  summary.files = {csv, fid_path};
  summary.values["residual_de_low"] = runs[0].fidelity.residual_de;
  summary.values["residual_de_high"] = runs[1].fidelity.residual_de;
  if (!plot.empty()) {
    std::vector<double> x(edges.begin(), edges.end() - 1);
    write_text(svg::line_plot(x, series, "time (ns)", "photons per cycle per bin",
                              "XX0_T3 emission, low vs high depletion power"),
               plot);
    summary.files.push_back(plot);
  }
  return summary;
}

inline RunSummary run_sweep(const LevelGraph& graph, const RunConfig& cfg,
                            const std::filesystem::path& csv, const std::filesystem::path& plot) {
  RunSummary summary;
  SweepOptions opt;
  opt.kmc = kmc_options(cfg);
  opt.bin_width = cfg.output.bin_width_ns;
  opt.dt = cfg.engine.dt_ns;
  const auto map = power_sweep(graph, build_protocol(cfg.protocol, 0.0), cfg.analysis.powers, opt);

  Table t{{"power", "t_ns", "intensity"}, {}};
  for (std::size_t r = 0; r < map.powers.size(); ++r)
    for (std::size_t b = 0; b + 1 < map.bin_edges.size(); ++b)
      t.rows.push_back({map.powers[r], map.bin_edges[b], map.matrix[r][b]});
  write_csv(t, csv);
  Table res{{"power", "residual_de"}, {}};
  for (std::size_t r = 0; r < map.powers.size(); ++r)
    res.rows.push_back({map.powers[r], map.residual_de[r]});
  const auto res_path = sibling(csv, "_residual");
  write_csv(res, res_path);
  summary.files = {csv, res_path};
  summary.values["residual_de_max_power"] = map.residual_de.back();
  if (!plot.empty()) {
    write_text(svg::heatmap(map.bin_edges, map.powers, map.matrix, "time (ns)",
                            "depletion power (p_sat)", "XX0_T3 emission per cycle"),
               plot);
    summary.files.push_back(plot);
  }
  return summary;
}

inline RunSummary run_fidelity(const LevelGraph& graph, const RunConfig& cfg,
                               const std::filesystem::path& csv) {
  RunSummary summary;
  const auto run = run_at_power(graph, cfg, cfg.protocol, cfg.analysis.high_power);
  write_csv(fidelity_table({run}), csv);
  summary.files = {csv};
  summary.values["residual_de"] = run.fidelity.residual_de;
  summary.values["fidelity_population"] = run.fidelity.fidelity_population;
  summary.values["fidelity_counts"] = run.fidelity.fidelity_counts;
  return summary;
}

inline RunSummary run_doubling(const LevelGraph& graph, const RunConfig& cfg,
                               const std::filesystem::path& csv) {
  RunSummary summary;
  ProtocolSettings settings = cfg.protocol;
  settings.probe_target = ProbeTarget::Empty;
  const auto low = run_at_power(graph, cfg, settings, cfg.analysis.low_power);
  const auto high = run_at_power(graph, cfg, settings, cfg.analysis.high_power);
  const double t0 = cfg.analysis.probe_window_begin_ns;
  const double t1 = cfg.analysis.probe_window_end_ns;

  auto ratio_estimate = [&](bool detected_only) {
    const auto a = batch_mean(per_cycle_window_counts(high.record, line::kExciton, t0, t1,
                                                      detected_only));
    const auto b = batch_mean(per_cycle_window_counts(low.record, line::kExciton, t0, t1,
                                                      detected_only));
    const double r = b.mean > 0.0 ? a.mean / b.mean : 0.0;
    const double se =
        a.mean > 0.0 && b.mean > 0.0
            ? r * std::hypot(a.standard_error / a.mean, b.standard_error / b.mean)
            : 0.0;
    return std::pair{r, se};
  };
  const auto [ratio, ratio_se] = ratio_estimate(false);
  const auto [ratio_det, ratio_det_se] = ratio_estimate(true);
  const double me_ratio = high.trajectory.emitted_between(line::kExciton, t0, t1) /
                          low.trajectory.emitted_between(line::kExciton, t0, t1);

  Table t{{"x0_per_cycle_low", "x0_per_cycle_high", "ratio", "ratio_standard_error",
           "ratio_detected", "ratio_detected_standard_error", "me_ratio"},
          {}};
  auto emitted_per_cycle = [&](const EmissionRecord& rec) {
    return static_cast<double>(window_event_count(rec, line::kExciton, t0, t1, false)) /
           static_cast<double>(rec.n_cycles);
  };
  t.rows.push_back({emitted_per_cycle(low.record), emitted_per_cycle(high.record), ratio,
                    ratio_se, ratio_det, ratio_det_se, me_ratio});
  write_csv(t, csv);
  summary.files = {csv};
  summary.values["ratio"] = ratio;
  summary.values["ratio_standard_error"] = ratio_se;
  summary.values["me_ratio"] = me_ratio;
  return summary;
}

}  // namespace detail

/// Runs the configured experiment and writes its outputs into `out_dir`
/// together with the effective configuration.
inline RunSummary cmd_run(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir.string() + "'");

  const auto graph = build_default_model(cfg.model);
  const auto csv = detail::resolve_output(out_dir, cfg.output.csv_path);
  const auto plot = cfg.output.plot_path.empty()
                        ? std::filesystem::path{}
                        : detail::resolve_output(out_dir, cfg.output.plot_path);
  RunSummary summary;
  switch (cfg.experiment) {
    case Experiment::Trace: summary = detail::run_trace(graph, cfg, csv, plot); break;
    case Experiment::Sweep: summary = detail::run_sweep(graph, cfg, csv, plot); break;
    case Experiment::Fidelity: summary = detail::run_fidelity(graph, cfg, csv); break;
    case Experiment::Doubling: summary = detail::run_doubling(graph, cfg, csv); break;
  }
  const auto echo = out_dir / "effective_config.json";
  write_text(to_json(cfg).dump(2) + "\n", echo);
  summary.files.push_back(echo);
  return summary;
}

}  // namespace qdd
