// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a two-level JSON document (comments allowed) with
// defaults for every omitted key. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdd/level_model.hpp"
#include "qdd/master_equation.hpp"
#include "qdd/pulse_protocol.hpp"

namespace qdd {

enum class Experiment { Trace, Sweep, Fidelity, Doubling };

struct EngineSettings {
  double dt_ns = 0.0;  // resolved to shortest lifetime / 20 when omitted
  std::uint64_t n_cycles = 100000;
  std::uint64_t seed = 1;
  double detection_efficiency = 1e-3;
  bool reset_each_cycle = false;
  bool operator==(const EngineSettings&) const = default;
};

struct AnalysisSettings {
  double high_power = 20.0;
  double low_power = 0.01;
  std::vector<double> powers;  // sweep grid, units of p_sat
  double probe_window_begin_ns = 0.0;
  double probe_window_end_ns = 0.0;
  bool operator==(const AnalysisSettings&) const = default;
};

struct OutputSettings {
  std::string csv_path;
  std::string plot_path;  // empty: no plot
  double bin_width_ns = 0.1;
  bool operator==(const OutputSettings&) const = default;
};

struct RunConfig {
  Experiment experiment = Experiment::Trace;
  ModelParams model;
  ProtocolSettings protocol;
  EngineSettings engine;
  AnalysisSettings analysis;
  OutputSettings output;
  bool operator==(const RunConfig&) const = default;
};

inline std::vector<double> default_power_grid() {
  std::vector<double> p(40);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 50.0 * static_cast<double>(i) / 39.0;
  return p;
}

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Trace: return "trace";
    case Experiment::Sweep: return "sweep";
    case Experiment::Fidelity: return "fidelity";
    case Experiment::Doubling: return "doubling";
  }
  return "trace";
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

using nlohmann::json;

class SectionReader {
 public:
  SectionReader(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    section_ = &doc.at(name_);
    if (!section_->is_object())
      throw ConfigError("config section '" + name_ + "' must be an object");
  }

  void number(const char* key, double& out) {
    if (auto* v = take(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void count(const char* key, std::uint64_t& out) {
    if (auto* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void flag(const char* key, bool& out) {
    if (auto* v = take(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (auto* v = take(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }
  bool numbers(const char* key, std::vector<double>& out) {
    auto* v = take(key);
    if (!v) return false;
    if (!v->is_array()) fail(key, "must be an array of numbers");
    out.clear();
    for (const auto& x : *v) {
      if (!x.is_number()) fail(key, "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return true;
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, value] : section_->items())
      if (!seen_.count(key))
        throw ConfigError("unknown config key '" + name_ + "." + key + "'");
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("config key '" + name_ + "." + key + "' " + what);
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    if (!section_ || !section_->contains(key)) return nullptr;
    return &section_->at(key);
  }

  std::string name_;
  const json* section_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Checks cross-field constraints; throws ConfigError naming the key.
inline void validate(const RunConfig& cfg) {
  try {
    cfg.model.validate();
    build_protocol(cfg.protocol, cfg.analysis.high_power);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& e = cfg.engine;
  const double limit = cfg.model.shortest_lifetime() / 20.0;
  if (!(e.dt_ns > 0.0) || e.dt_ns > limit * (1.0 + 1e-12))
    throw ConfigError("engine.dt_ns must lie in (0, " + std::to_string(limit) +
                      "] (shortest lifetime / 20)");
  if (e.n_cycles < 1) throw ConfigError("engine.n_cycles must be at least 1");
  if (!(e.detection_efficiency >= 0.0 && e.detection_efficiency <= 1.0))
    throw ConfigError("engine.detection_efficiency must lie in [0,1]");
  const auto& a = cfg.analysis;
  if (!(a.high_power >= 0.0)) throw ConfigError("analysis.high_power must be non-negative");
  if (!(a.low_power >= 0.0)) throw ConfigError("analysis.low_power must be non-negative");
  if (a.powers.empty()) throw ConfigError("analysis.powers must not be empty");
  for (std::size_t i = 0; i < a.powers.size(); ++i) {
    if (!(a.powers[i] >= 0.0)) throw ConfigError("analysis.powers must be non-negative");
    if (i && !(a.powers[i] > a.powers[i - 1]))
      throw ConfigError("analysis.powers must be strictly increasing");
  }
  if (!(a.probe_window_begin_ns >= 0.0 && a.probe_window_end_ns > a.probe_window_begin_ns &&
        a.probe_window_end_ns <= cfg.protocol.period_ns))
    throw ConfigError("analysis.probe_window_ns must be an increasing pair within the period");
  if (!(cfg.output.bin_width_ns > 0.0)) throw ConfigError("output.bin_width_ns must be positive");
}

inline RunConfig parse_config(const std::string& document) {
  using detail::json;
  json doc;
  if (document.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      doc = json::parse(document, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  } else {
    doc = json::object();
  }
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");

  static const std::set<std::string> sections{"experiment", "model",    "protocol",
                                              "engine",     "analysis", "output"};
  for (const auto& [key, value] : doc.items())
    if (!sections.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig cfg;
  if (doc.contains("experiment")) {
    const auto& e = doc.at("experiment");
    static const std::map<std::string, Experiment> names{{"trace", Experiment::Trace},
                                                         {"sweep", Experiment::Sweep},
                                                         {"fidelity", Experiment::Fidelity},
                                                         {"doubling", Experiment::Doubling}};
    if (!e.is_string() || !names.count(e.get<std::string>()))
      throw ConfigError(
          "config key 'experiment' must be one of \"trace\", \"sweep\", \"fidelity\", "
          "\"doubling\"");
    cfg.experiment = names.at(e.get<std::string>());
  }

  detail::SectionReader model(doc, "model");
  model.number("tau_x0_ns", cfg.model.tau_x0);
  model.number("tau_xx0_ns", cfg.model.tau_xx0);
  model.number("tau_de_ns", cfg.model.tau_de);
  model.number("tau_relax_ns", cfg.model.tau_relax);
  model.number("tau_xx_t3_ns", cfg.model.tau_xx_t3);
  model.number("branch_b", cfg.model.branch_b);
  model.finish();

  auto& p = cfg.protocol;
  detail::SectionReader protocol(doc, "protocol");
  protocol.number("period_ns", p.period_ns);
  protocol.number("gen_rate_ns", p.gen_rate_ns);
  protocol.number("gen_pulse_ns", p.gen_pulse_ns);
  protocol.number("gap_ns", p.gap_ns);
  protocol.number("deplete_pulse_ns", p.deplete_pulse_ns);
  protocol.number("probe_delay_ns", p.probe_delay_ns);
  protocol.number("rise_ns", p.rise_ns);
  protocol.number("fall_ns", p.fall_ns);
  protocol.number("r_max_ns", p.r_max_ns);
  protocol.number("p_sat", p.p_sat);
  std::string target = "DE";
  protocol.text("probe_target", target);
  if (target == "DE")
    p.probe_target = ProbeTarget::DarkExciton;
  else if (target == "Empty")
    p.probe_target = ProbeTarget::Empty;
  else
    protocol.fail("probe_target", "must be \"DE\" or \"Empty\"");
  protocol.number("pi_fraction", p.pi_fraction);
  protocol.finish();

  detail::SectionReader engine(doc, "engine");
  cfg.engine.dt_ns = cfg.model.shortest_lifetime() / 20.0;
  engine.number("dt_ns", cfg.engine.dt_ns);
  engine.count("n_cycles", cfg.engine.n_cycles);
  engine.count("seed", cfg.engine.seed);
  engine.number("detection_efficiency", cfg.engine.detection_efficiency);
  engine.flag("reset_each_cycle", cfg.engine.reset_each_cycle);
  engine.finish();

  auto& a = cfg.analysis;
  detail::SectionReader analysis(doc, "analysis");
  analysis.number("high_power", a.high_power);
  analysis.number("low_power", a.low_power);
  if (!analysis.numbers("powers", a.powers)) a.powers = default_power_grid();
  std::vector<double> window;
  if (analysis.numbers("probe_window_ns", window)) {
    if (window.size() != 2) analysis.fail("probe_window_ns", "must be a pair [begin, end]");
    a.probe_window_begin_ns = window[0];
    a.probe_window_end_ns = window[1];
  } else {
    a.probe_window_begin_ns = p.probe_time();
    a.probe_window_end_ns = p.probe_time() + 3.0;
  }
  analysis.finish();

  detail::SectionReader output(doc, "output");
  cfg.output.csv_path = std::string(to_string(cfg.experiment)) + ".csv";
  output.text("csv_path", cfg.output.csv_path);
  output.text("plot_path", cfg.output.plot_path);
  output.number("bin_width_ns", cfg.output.bin_width_ns);
  output.finish();

  validate(cfg);
  return cfg;
}

/// Fully resolved configuration; parse_config(to_json(c).dump()) == c.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["experiment"] = to_string(c.experiment);
  j["model"] = {{"tau_x0_ns", c.model.tau_x0},       {"tau_xx0_ns", c.model.tau_xx0},
                {"tau_de_ns", c.model.tau_de},       {"tau_relax_ns", c.model.tau_relax},
                {"tau_xx_t3_ns", c.model.tau_xx_t3}, {"branch_b", c.model.branch_b}};
  const auto& p = c.protocol;
  j["protocol"] = {{"period_ns", p.period_ns},
                   {"gen_rate_ns", p.gen_rate_ns},
                   {"gen_pulse_ns", p.gen_pulse_ns},
                   {"gap_ns", p.gap_ns},
                   {"deplete_pulse_ns", p.deplete_pulse_ns},
                   {"probe_delay_ns", p.probe_delay_ns},
                   {"rise_ns", p.rise_ns},
                   {"fall_ns", p.fall_ns},
                   {"r_max_ns", p.r_max_ns},
                   {"p_sat", p.p_sat},
                   {"probe_target", p.probe_target == ProbeTarget::Empty ? "Empty" : "DE"},
                   {"pi_fraction", p.pi_fraction}};
  j["engine"] = {{"dt_ns", c.engine.dt_ns},
                 {"n_cycles", c.engine.n_cycles},
                 {"seed", c.engine.seed},
                 {"detection_efficiency", c.engine.detection_efficiency},
                 {"reset_each_cycle", c.engine.reset_each_cycle}};
  j["analysis"] = {{"high_power", c.analysis.high_power},
                   {"low_power", c.analysis.low_power},
                   {"powers", c.analysis.powers},
                   {"probe_window_ns",
                    {c.analysis.probe_window_begin_ns, c.analysis.probe_window_end_ns}}};
  j["output"] = {{"csv_path", c.output.csv_path},
                 {"plot_path", c.output.plot_path},
                 {"bin_width_ns", c.output.bin_width_ns}};
  return j;
}

}  // namespace qdd
