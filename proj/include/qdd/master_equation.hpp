// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic population dynamics: dp/dt = M(t) p integrated with a
// fixed-step classical Runge-Kutta scheme, plus exact instantaneous probes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdd/level_model.hpp"
#include "qdd/pulse_protocol.hpp"

namespace qdd {

/// Occupation probabilities indexed by LevelIndex of the owning graph.
struct PopulationVector {
  std::vector<double> p;

  PopulationVector() = default;
  explicit PopulationVector(std::vector<double> values) : p(std::move(values)) {}

  static PopulationVector pure(std::size_t n, LevelIndex at) {
    PopulationVector v(std::vector<double>(n, 0.0));
    v.p.at(at) = 1.0;
    return v;
  }

  std::size_t size() const { return p.size(); }
  double operator[](LevelIndex i) const { return p[i]; }
  double& operator[](LevelIndex i) { return p[i]; }
  double total() const {
    double s = 0.0;
    for (double x : p) s += x;
    return s;
  }
  bool operator==(const PopulationVector&) const = default;
};

using LevelMapping = std::vector<std::pair<std::string, std::string>>;

/// Transfers `fraction` of each source population onto its target. All
/// transfers read the input vector, so chained mappings do not cascade.
inline PopulationVector apply_instantaneous_pulse(const LevelGraph& graph,
                                                  const PopulationVector& in,
                                                  const LevelMapping& mapping,
                                                  double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("transfer fraction must lie in [0,1]");
  std::vector<std::pair<LevelIndex, LevelIndex>> resolved;
  for (const auto& [from, to] : mapping) {
    auto a = graph.find(from);
    auto b = graph.find(to);
    if (!a || !b)
      throw std::invalid_argument("pulse mapping touches undeclared level '" +
                                  (a ? to : from) + "'");
    for (const auto& [ra, rb] : resolved)
      if (ra == *a || rb == *b) throw std::invalid_argument("pulse mapping is not injective");
    resolved.emplace_back(*a, *b);
  }
  PopulationVector out = in;
  for (const auto& [a, b] : resolved) {
    const double moved = fraction == 1.0 ? in[a] : fraction * in[a];
    out[a] -= moved;
    out[b] += moved;
  }
  return out;
}

struct IntegratorConfig {
  double dt = 0.0;     // ns; 0 selects the largest admissible step
  double t_end = 0.0;  // ns; 0 selects the full period
  std::size_t record_stride = 1;
};

struct InstantPulseRecord {
  double t = 0.0;
  PopulationVector before;
  PopulationVector after;
};

/// Time-indexed populations and per-line emission. Samples are stored flat;
/// a probe instant appears twice (pre- then post-transfer).
class Trajectory {
 public:
  std::vector<std::string> levels;
  std::vector<std::string> lines;
  std::vector<double> times;
  std::vector<double> population_data;  // times.size() x levels.size()
  std::vector<double> cumulative_data;  // times.size() x lines.size(), photons per cycle
  std::vector<double> intensity_data;   // times.size() x lines.size(), photons per ns
  std::vector<InstantPulseRecord> pulses;
  double max_normalization_error = 0.0;

  std::size_t samples() const { return times.size(); }

  PopulationVector population(std::size_t k) const {
    const auto n = levels.size();
    return PopulationVector(std::vector<double>(population_data.begin() + k * n,
                                                population_data.begin() + (k + 1) * n));
  }
  PopulationVector final_population() const { return population(samples() - 1); }

  double population(std::size_t k, LevelIndex i) const {
    return population_data[k * levels.size() + i];
  }

  std::size_t line_index(std::string_view label) const {
    for (std::size_t j = 0; j < lines.size(); ++j)
      if (lines[j] == label) return j;
    throw std::invalid_argument("unknown emission line '" + std::string(label) + "'");
  }
  std::size_t level_index(std::string_view label) const {
    for (std::size_t j = 0; j < levels.size(); ++j)
      if (levels[j] == label) return j;
    throw std::invalid_argument("unknown level '" + std::string(label) + "'");
  }

  /// Linear interpolation; at a probe instant the post-transfer state is used.
  PopulationVector population_at(double t) const {
    auto [k0, k1, w] = bracket(t);
    const auto n = levels.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = (1.0 - w) * population_data[k0 * n + i] + w * population_data[k1 * n + i];
    return PopulationVector(std::move(out));
  }

  /// Population just before any instantaneous pulse at t.
  PopulationVector population_before(double t) const {
    for (const auto& rec : pulses)
      if (std::abs(rec.t - t) <= 1e-9) return rec.before;
    return population_at(t);
  }

  double cumulative_at(std::string_view line, double t) const {
    const auto j = line_index(line);
    auto [k0, k1, w] = bracket(t);
    const auto m = lines.size();
    return (1.0 - w) * cumulative_data[k0 * m + j] + w * cumulative_data[k1 * m + j];
  }

  /// Expected photons per cycle on `line` emitted in [t0, t1].
  double emitted_between(std::string_view line, double t0, double t1) const {
    return cumulative_at(line, t1) - cumulative_at(line, t0);
  }

 private:
  struct Bracket {
    std::size_t k0, k1;
    double w;
  };
  Bracket bracket(double t) const {
    if (times.empty()) throw std::logic_error("empty trajectory");
    if (t <= times.front()) return {0, 0, 0.0};
    if (t >= times.back()) return {samples() - 1, samples() - 1, 0.0};
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k1 = static_cast<std::size_t>(it - times.begin());
    const auto k0 = k1 - 1;
    if (times[k0] == t) return {k0, k0, 0.0};
    return {k0, k1, (t - times[k0]) / (times[k1] - times[k0])};
  }
};

/// Largest step admitted by the accuracy contract for this model.
inline double max_admissible_step(const LevelGraph& graph) {
  return graph.params().shortest_lifetime() / 20.0;
}

namespace detail {

/// Augmented linear system [p; c]' = A(t) [p; c], where c holds cumulative
/// photons per line. A(t) = static + sum_c r_c(t) D_c + g(t) G.
class AugmentedGenerator {
 public:
  AugmentedGenerator(const LevelGraph& graph, const Protocol& protocol)
      : graph_(graph),
        n_(static_cast<Eigen::Index>(graph.size())),
        lines_(graph.line_labels()),
        channels_(graph.channel_labels()),
        schedule_(protocol, channels_) {
    const auto validation = validate(graph);
    if (!validation.ok())
      throw std::invalid_argument("invalid level graph: " + validation.violations.front());
    const auto dim = n_ + static_cast<Eigen::Index>(lines_.size());
    auto embed = [&](const GeneratorMatrix& m) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
      a.topLeftCorner(n_, n_) = m;
      return a;
    };
    const GeneratorMatrix base = rate_matrix(graph);
    static_ = embed(base);
    for (const auto& tr : graph.transitions()) {
      if (tr.kind != TransitionKind::Radiative) continue;
      const auto j = static_cast<Eigen::Index>(
          std::find(lines_.begin(), lines_.end(), tr.label) - lines_.begin());
      static_(n_ + j, static_cast<Eigen::Index>(tr.from)) += tr.effective_rate();
    }
    for (const auto& c : channels_) drive_.push_back(embed(rate_matrix(graph, {{c, 1.0}}) - base));
    generation_ = Eigen::MatrixXd::Zero(dim, dim);
    const auto empty = static_cast<Eigen::Index>(graph.index(level::kEmpty));
    const auto be = static_cast<Eigen::Index>(graph.index(level::kBright));
    const auto de = static_cast<Eigen::Index>(graph.index(level::kDark));
    generation_(be, empty) += 0.5;
    generation_(de, empty) += 0.5;
    generation_(empty, empty) -= 1.0;
  }

  Eigen::Index levels() const { return n_; }
  Eigen::Index dim() const { return static_.rows(); }
  const std::vector<std::string>& lines() const { return lines_; }
  const RateSchedule& schedule() const { return schedule_; }
  const LevelGraph& graph() const { return graph_; }

  bool constant_on(const RateSchedule::Segment& seg) const {
    for (const auto& d : seg.drives)
      if (d.env.at_begin != d.env.at_end) return false;
    for (const auto& g : seg.generation)
      if (g.env.at_begin != g.env.at_end) return false;
    return true;
  }

  void assemble(const RateSchedule::Segment& seg, double t, Eigen::MatrixXd& out) const {
    out = static_;
    for (std::size_t c = 0; c < drive_.size(); ++c) {
      const double r = schedule_.drive(seg, c, t);
      if (r != 0.0) out.noalias() += r * drive_[c];
    }
    const double g = schedule_.generation(seg, t);
    if (g != 0.0) out.noalias() += g * generation_;
  }

 private:
  const LevelGraph& graph_;
  Eigen::Index n_;
  std::vector<std::string> lines_;
  std::vector<std::string> channels_;
  RateSchedule schedule_;
  Eigen::MatrixXd static_;
  std::vector<Eigen::MatrixXd> drive_;
  Eigen::MatrixXd generation_;
};

inline void apply_probe_columns(const LevelGraph& graph, const PiProbe& probe,
                                Eigen::MatrixXd& state) {
  for (Eigen::Index col = 0; col < state.cols(); ++col) {
    PopulationVector p(std::vector<double>(static_cast<std::size_t>(graph.size())));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(graph.size()); ++i)
      p[static_cast<std::size_t>(i)] = state(i, col);
    p = apply_instantaneous_pulse(graph, p, probe.mapping, probe.fraction);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(graph.size()); ++i)
      state(i, col) = p[static_cast<std::size_t>(i)];
  }
}

inline void check_columns(const Eigen::MatrixXd& state, Eigen::Index n, double t,
                          double& max_err) {
  for (Eigen::Index col = 0; col < state.cols(); ++col) {
    const auto block = state.col(col).head(n);
    const double err = std::abs(block.sum() - 1.0);
    max_err = std::max(max_err, err);
    if (err > 1e-6)
      throw std::runtime_error("normalization drift " + std::to_string(err) + " at t = " +
                               std::to_string(t) + " ns");
    if (block.minCoeff() < -1e-6)
      throw std::runtime_error("negative population at t = " + std::to_string(t) + " ns");
  }
}

/// Integrates the augmented state over [0, t_end]. `on_sample` is invoked
/// with (t, state) after every recorded step; `on_probe` with
/// (t, before, after) at each instantaneous pulse.
template <class OnSample, class OnProbe>
void integrate(const AugmentedGenerator& gen, const IntegratorConfig& cfg,
               Eigen::MatrixXd& state, OnSample&& on_sample, OnProbe&& on_probe,
               double& max_err) {
  const auto& sched = gen.schedule();
  const Eigen::Index n = gen.levels();
  const std::size_t stride = std::max<std::size_t>(cfg.record_stride, 1);

  for (const auto& probe : sched.initial_probes()) {
    Eigen::MatrixXd before = state;
    apply_probe_columns(gen.graph(), probe, state);
    on_probe(0.0, before, state);
  }
  on_sample(0.0, state);

  Eigen::MatrixXd a(gen.dim(), gen.dim());
  Eigen::MatrixXd k1, k2, k3, k4, tmp, step;
  for (const auto& seg : sched.segments()) {
    if (seg.begin >= cfg.t_end) break;
    const double end = std::min(seg.end, cfg.t_end);
    const double len = end - seg.begin;
    if (len <= 0.0) continue;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(len / cfg.dt - 1e-9)));
    const double h = len / static_cast<double>(steps);
    // With constant rates one RK4 step is the matrix polynomial
    // I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24.
    const bool constant = gen.constant_on(seg);
    if (constant) {
      gen.assemble(seg, seg.begin, a);
      const Eigen::MatrixXd ha = h * a;
      Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
      step = term;
      for (int order = 1; order <= 4; ++order) {
        term = (term * ha) / static_cast<double>(order);
        step += term;
      }
    }
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = seg.begin + h * static_cast<double>(s);
      const double t_next = s + 1 == steps ? end : seg.begin + h * static_cast<double>(s + 1);
      if (constant) {
        tmp.noalias() = step.lazyProduct(state);
        state.swap(tmp);
        check_columns(state, n, t_next, max_err);
        if (s + 1 == steps || (s + 1) % stride == 0) on_sample(t_next, state);
        continue;
      }
      gen.assemble(seg, t, a);
      k1.noalias() = a.lazyProduct(state);
      gen.assemble(seg, t + 0.5 * h, a);
      tmp = state + (0.5 * h) * k1;
      k2.noalias() = a.lazyProduct(tmp);
      tmp = state + (0.5 * h) * k2;
      k3.noalias() = a.lazyProduct(tmp);
      gen.assemble(seg, t + h, a);
      tmp = state + h * k3;
      k4.noalias() = a.lazyProduct(tmp);
      state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_columns(state, n, t_next, max_err);
      if (s + 1 == steps || (s + 1) % stride == 0) on_sample(t_next, state);
    }
    if (end == seg.end) {
      for (const auto& probe : seg.probes_at_end) {
        Eigen::MatrixXd before = state;
        apply_probe_columns(gen.graph(), probe, state);
        on_probe(end, before, state);
        on_sample(end, state);
      }
    }
  }
}

inline IntegratorConfig resolve(const LevelGraph& graph, const Protocol& protocol,
                                IntegratorConfig cfg) {
  const double limit = max_admissible_step(graph);
  if (cfg.dt == 0.0) cfg.dt = limit;
  if (cfg.t_end == 0.0) cfg.t_end = protocol.period();
  if (!(cfg.dt > 0.0) || cfg.dt > limit * (1.0 + 1e-12))
    throw std::invalid_argument("integrator step dt = " + std::to_string(cfg.dt) +
                                " ns exceeds the admissible " + std::to_string(limit) +
                                " ns (shortest lifetime / 20)");
  if (!(cfg.t_end > 0.0) || cfg.t_end > protocol.period() * (1.0 + 1e-12))
    throw std::invalid_argument("t_end must lie in (0, period]");
  return cfg;
}

}  // namespace detail

/// Integrates one period (or up to cfg.t_end) from `init`.
inline Trajectory master_equation_evolve(const LevelGraph& graph, const Protocol& protocol,
                                         IntegratorConfig cfg, const PopulationVector& init) {
  cfg = detail::resolve(graph, protocol, cfg);
  if (init.size() != graph.size())
    throw std::invalid_argument("initial population has the wrong number of levels");
  if (std::abs(init.total() - 1.0) > 1e-9)
    throw std::invalid_argument("initial population is not normalized");

  detail::AugmentedGenerator gen(graph, protocol);
  const Eigen::Index n = gen.levels();
  const auto m = gen.lines().size();
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(gen.dim(), 1);
  for (Eigen::Index i = 0; i < n; ++i) state(i, 0) = init[static_cast<std::size_t>(i)];

  Trajectory traj;
  traj.levels = graph.levels();
  traj.lines = gen.lines();
  std::vector<double> rates(m, 0.0);
  struct RadiativeTerm {
    std::size_t line;
    Eigen::Index from;
    double rate;
  };
  std::vector<RadiativeTerm> radiative;
  for (const auto& tr : graph.transitions())
    if (tr.kind == TransitionKind::Radiative)
      radiative.push_back({traj.line_index(tr.label), static_cast<Eigen::Index>(tr.from),
                           tr.effective_rate()});

  auto on_sample = [&](double t, const Eigen::MatrixXd& s) {
    traj.times.push_back(t);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = s(i, 0);
      traj.population_data.push_back(v < 0.0 ? 0.0 : v);
    }
    for (std::size_t j = 0; j < m; ++j)
      traj.cumulative_data.push_back(s(n + static_cast<Eigen::Index>(j), 0));
    std::fill(rates.begin(), rates.end(), 0.0);
    for (const auto& term : radiative) rates[term.line] += term.rate * std::max(0.0, s(term.from, 0));
    traj.intensity_data.insert(traj.intensity_data.end(), rates.begin(), rates.end());
  };
  auto to_pop = [&](const Eigen::MatrixXd& s) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = s(i, 0);
    return PopulationVector(std::move(v));
  };
  auto on_probe = [&](double t, const Eigen::MatrixXd& before, const Eigen::MatrixXd& after) {
    traj.pulses.push_back({t, to_pop(before), to_pop(after)});
  };
  detail::integrate(gen, cfg, state, on_sample, on_probe, traj.max_normalization_error);
  return traj;
}

/// Linear map of one full period acting on start-of-cycle populations, and
/// the expected photons per line emitted during the period from each pure
/// start level.
struct CycleMap {
  Eigen::MatrixXd transfer;  // levels x levels, column-stochastic
  Eigen::MatrixXd emission;  // lines x levels
  std::vector<std::string> lines;
};

inline CycleMap cycle_map(const LevelGraph& graph, const Protocol& protocol, double dt = 0.0) {
  IntegratorConfig cfg{dt, protocol.period(), 1};
  cfg = detail::resolve(graph, protocol, cfg);
  detail::AugmentedGenerator gen(graph, protocol);
  const Eigen::Index n = gen.levels();
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(gen.dim(), n);
  state.topLeftCorner(n, n).setIdentity();
  double err = 0.0;
  detail::integrate(
      gen, cfg, state, [](double, const Eigen::MatrixXd&) {},
      [](double, const Eigen::MatrixXd&, const Eigen::MatrixXd&) {}, err);
  return {state.topRows(n), state.bottomRows(gen.dim() - n), gen.lines()};
}

/// Start-of-cycle populations invariant under the cycle map.
inline PopulationVector periodic_steady_state(const CycleMap& map) {
  const Eigen::Index n = map.transfer.rows();
  Eigen::MatrixXd a = map.transfer - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::VectorXd x = a.fullPivLu().solve(rhs);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = std::max(0.0, x(i));
  double s = 0.0;
  for (double p : v) s += p;
  for (double& p : v) p /= s;
  return PopulationVector(std::move(v));
}

/// Mean over cycles k = 0..n_cycles-1 of the start-of-cycle populations when
/// cycle 0 starts from `first`. By linearity this is the exact expectation of
/// cycle-averaged Monte Carlo statistics with state carried across cycles.
inline PopulationVector cycle_averaged_start(const CycleMap& map, const PopulationVector& first,
                                             std::size_t n_cycles) {
  const Eigen::Index n = map.transfer.rows();
  Eigen::VectorXd p(n), acc = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = first[static_cast<std::size_t>(i)];
  for (std::size_t k = 0; k < n_cycles; ++k) {
    acc += p;
    p = map.transfer * p;
    p /= p.sum();  // keep roundoff from compounding over many cycles
  }
  acc /= static_cast<double>(n_cycles);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = acc(i);
  return PopulationVector(std::move(v));
}

}  // namespace qdd
