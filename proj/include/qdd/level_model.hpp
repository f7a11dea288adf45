// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Excitonic level graph of a quantum dot: levels, transitions and rates, and
// the continuous-time Markov generator assembled from them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qdd {

using LevelIndex = std::size_t;

/// Canonical level labels. Graphs may declare additional levels.
namespace level {
inline constexpr std::string_view kEmpty = "Empty";
inline constexpr std::string_view kBright = "BE";
inline constexpr std::string_view kDark = "DE";
inline constexpr std::string_view kBiexcitonExcited = "XX_excited";
inline constexpr std::string_view kBiexcitonGround = "XX_ground";
inline constexpr std::string_view kBiexcitonBlockaded = "XX_T3";
inline constexpr std::string_view kProbeEmitter = "X_emitting_probe";
}  // namespace level

/// Emission line labels of the canonical model.
namespace line {
inline constexpr std::string_view kExciton = "X0";
inline constexpr std::string_view kBiexciton = "XX0";
inline constexpr std::string_view kBlockaded = "XX0_T3";
}  // namespace line

/// Drive channel of the depletion resonance.
inline constexpr std::string_view kDepleteChannel = "deplete";

enum class TransitionKind { Radiative, NonRadiative, Driven };

struct Transition {
  LevelIndex from = 0;
  LevelIndex to = 0;
  TransitionKind kind = TransitionKind::NonRadiative;
  // Line label for Radiative, channel label for Driven, unused otherwise.
  std::string label;
  // ns^-1; ignored for Driven transitions.
  double base_rate = 0.0;
  double branch_weight = 1.0;

  /// Rate actually carried by this transition when not driven.
  double effective_rate() const { return base_rate * branch_weight; }
};

/// Lifetimes in ns. Defaults reproduce the measured exciton and biexciton
/// radiative lifetimes and the ~1 us dark exciton.
struct ModelParams {
  double tau_x0 = 0.470;
  double tau_xx0 = 0.270;
  double tau_de = 1000.0;
  double tau_relax = 0.030;
  double tau_xx_t3 = 0.270;
  double branch_b = 0.5;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be a positive finite lifetime");
    };
    positive(tau_x0, "tau_x0_ns");
    positive(tau_xx0, "tau_xx0_ns");
    positive(tau_de, "tau_de_ns");
    positive(tau_relax, "tau_relax_ns");
    positive(tau_xx_t3, "tau_xx_t3_ns");
    if (!(branch_b >= 0.0 && branch_b <= 1.0))
      throw std::invalid_argument("branch_b must lie in [0,1]");
  }

  /// Shortest timescale of the model; bounds the integrator step.
  double shortest_lifetime() const {
    return std::min({tau_x0, tau_xx0, tau_de, tau_relax, tau_xx_t3});
  }

  bool operator==(const ModelParams&) const = default;
};

class LevelGraph {
 public:
  LevelGraph() = default;
  LevelGraph(std::vector<std::string> levels, std::vector<Transition> transitions,
             ModelParams params)
      : levels_(std::move(levels)), transitions_(std::move(transitions)), params_(params) {}

  const std::vector<std::string>& levels() const { return levels_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const ModelParams& params() const { return params_; }
  std::size_t size() const { return levels_.size(); }

  std::optional<LevelIndex> find(std::string_view label) const {
    for (LevelIndex i = 0; i < levels_.size(); ++i)
      if (levels_[i] == label) return i;
    return std::nullopt;
  }

  LevelIndex index(std::string_view label) const {
    if (auto i = find(label)) return *i;
    throw std::out_of_range("unknown level '" + std::string(label) + "'");
  }

  /// Distinct radiative line labels in order of first appearance.
  std::vector<std::string> line_labels() const {
    std::vector<std::string> out;
    for (const auto& tr : transitions_) {
      if (tr.kind != TransitionKind::Radiative) continue;
      if (std::find(out.begin(), out.end(), tr.label) == out.end()) out.push_back(tr.label);
    }
    return out;
  }

  /// Distinct drive channel labels in order of first appearance.
  std::vector<std::string> channel_labels() const {
    std::vector<std::string> out;
    for (const auto& tr : transitions_) {
      if (tr.kind != TransitionKind::Driven) continue;
      if (std::find(out.begin(), out.end(), tr.label) == out.end()) out.push_back(tr.label);
    }
    return out;
  }

  /// Removes every transition matching the predicate. Used to build
  /// deliberately broken graphs and reduced models.
  template <class Pred>
  LevelGraph without(Pred pred) const {
    LevelGraph g = *this;
    std::erase_if(g.transitions_, pred);
    return g;
  }

  LevelGraph with_transition(Transition tr) const {
    LevelGraph g = *this;
    g.transitions_.push_back(std::move(tr));
    return g;
  }

 private:
  std::vector<std::string> levels_;
  std::vector<Transition> transitions_;
  ModelParams params_;
};

/// The depletion cycle: DE is pumped into the excited biexciton, which relaxes
/// either to the ground biexciton (cascade to Empty) or to the spin-blockaded
/// biexciton (one photon, back to DE). Hole relaxation after the blockaded
/// emission is folded into the XX_T3 -> DE step.
inline LevelGraph build_default_model(const ModelParams& params = {}) {
  params.validate();
  std::vector<std::string> levels{std::string(level::kEmpty),
                                  std::string(level::kBright),
                                  std::string(level::kDark),
                                  std::string(level::kBiexcitonExcited),
                                  std::string(level::kBiexcitonGround),
                                  std::string(level::kBiexcitonBlockaded)};
  constexpr LevelIndex empty = 0, be = 1, de = 2, xxe = 3, xxg = 4, xxt3 = 5;

  std::vector<Transition> tr;
  tr.push_back({de, xxe, TransitionKind::Driven, std::string(kDepleteChannel), 0.0, 1.0});
  const double relax = 1.0 / params.tau_relax;
  if (params.branch_b < 1.0)
    tr.push_back({xxe, xxg, TransitionKind::NonRadiative, "", relax, 1.0 - params.branch_b});
  if (params.branch_b > 0.0)
    tr.push_back({xxe, xxt3, TransitionKind::NonRadiative, "", relax, params.branch_b});
  tr.push_back({xxg, be, TransitionKind::Radiative, std::string(line::kBiexciton),
                1.0 / params.tau_xx0, 1.0});
  tr.push_back({be, empty, TransitionKind::Radiative, std::string(line::kExciton),
                1.0 / params.tau_x0, 1.0});
  tr.push_back({xxt3, de, TransitionKind::Radiative, std::string(line::kBlockaded),
                1.0 / params.tau_xx_t3, 1.0});
  tr.push_back({de, empty, TransitionKind::NonRadiative, "", 1.0 / params.tau_de, 1.0});
  return LevelGraph(std::move(levels), std::move(tr), params);
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks structural invariants. Never throws; every violation is listed.
inline ValidationReport validate(const LevelGraph& graph) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  const auto& levels = graph.levels();
  const std::size_t n = levels.size();

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (levels[i] == levels[j]) fail("duplicate level label '" + levels[i] + "'");
  for (auto required : {level::kEmpty, level::kBright, level::kDark})
    if (!graph.find(required)) fail("missing required level '" + std::string(required) + "'");

  std::vector<double> branch_sum(n, 0.0);
  std::vector<int> branch_count(n, 0);
  for (const auto& tr : graph.transitions()) {
    if (tr.from >= n || tr.to >= n) {
      fail("transition references an undeclared level");
      continue;
    }
    if (tr.kind != TransitionKind::Driven && !(tr.base_rate >= 0.0))
      fail("negative rate on " + levels[tr.from] + " -> " + levels[tr.to]);
    if (!(tr.branch_weight >= 0.0 && tr.branch_weight <= 1.0))
      fail("branch weight outside [0,1] on " + levels[tr.from] + " -> " + levels[tr.to]);
    if (tr.kind == TransitionKind::Radiative && tr.label.empty())
      fail("radiative transition " + levels[tr.from] + " -> " + levels[tr.to] +
           " has no line label");
    if (tr.kind == TransitionKind::Driven && tr.label.empty())
      fail("driven transition " + levels[tr.from] + " -> " + levels[tr.to] +
           " has no channel label");
    if (tr.kind == TransitionKind::NonRadiative) {
      branch_sum[tr.from] += tr.branch_weight;
      ++branch_count[tr.from];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (branch_count[i] > 1 && std::abs(branch_sum[i] - 1.0) > 1e-12)
      fail(levels[i] + " branch-sum is " + std::to_string(branch_sum[i]) + ", expected 1");

  // Absorption into Empty without drive: reverse search from Empty over
  // spontaneous transitions with nonzero rate.
  if (auto empty = graph.find(level::kEmpty); empty && report.ok()) {
    std::vector<bool> reaches(n, false);
    reaches[*empty] = true;
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& tr : graph.transitions()) {
        if (tr.kind == TransitionKind::Driven || tr.effective_rate() <= 0.0) continue;
        if (reaches[tr.to] && !reaches[tr.from]) {
          reaches[tr.from] = true;
          changed = true;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!reaches[i]) fail(levels[i] + " cannot reach Empty without drive");
  }
  return report;
}

/// Column-conserving generator: M(to, from) is the rate from -> to and each
/// diagonal entry is minus the total exit rate of its column's level.
using GeneratorMatrix = Eigen::MatrixXd;

inline GeneratorMatrix rate_matrix(const LevelGraph& graph,
                                   const std::map<std::string, double>& drive_rates = {}) {
  const auto channels = graph.channel_labels();
  for (const auto& [label, rate] : drive_rates) {
    if (std::find(channels.begin(), channels.end(), label) == channels.end())
      throw std::invalid_argument("unknown drive channel '" + label + "'");
    if (!(rate >= 0.0)) throw std::invalid_argument("drive rate for '" + label + "' is negative");
  }
  const auto n = static_cast<Eigen::Index>(graph.size());
  GeneratorMatrix m = GeneratorMatrix::Zero(n, n);
  for (const auto& tr : graph.transitions()) {
    double rate = tr.effective_rate();
    if (tr.kind == TransitionKind::Driven) {
      auto it = drive_rates.find(tr.label);
      rate = it == drive_rates.end() ? 0.0 : it->second * tr.branch_weight;
    }
    const auto from = static_cast<Eigen::Index>(tr.from);
    const auto to = static_cast<Eigen::Index>(tr.to);
    m(to, from) += rate;
    m(from, from) -= rate;
  }
  return m;
}

}  // namespace qdd
