// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Photon-resolved kinetic Monte Carlo over the level graph. Time-dependent
// drive and generation rates are sampled exactly by thinning against
// per-segment upper bounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qdd/level_model.hpp"
#include "qdd/pulse_protocol.hpp"

namespace qdd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class StreamPurpose : std::uint64_t { Trajectory = 1, Detection = 2 };

/// Seed of the logical stream for one cycle. Depends only on the master seed
/// and the cycle index, never on how cycles are scheduled.
inline std::uint64_t cycle_stream_seed(std::uint64_t seed, std::uint64_t cycle,
                                       StreamPurpose purpose) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(purpose)) ^
                    cycle);
}

/// Uniform on [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct EmissionEvent {
  double t = 0.0;  // ns within the cycle
  std::uint64_t cycle_index = 0;
  std::uint32_t line = 0;  // index into EmissionRecord::lines
  bool detected = false;

  bool operator==(const EmissionEvent&) const = default;
};

struct EmissionRecord {
  std::vector<EmissionEvent> events;  // ordered by (cycle_index, t)
  std::uint64_t n_cycles = 0;
  std::uint64_t seed = 0;
  double detection_efficiency = 1.0;
  double period = 0.0;
  std::vector<std::string> lines;

  std::uint32_t line_index(std::string_view label) const {
    for (std::uint32_t j = 0; j < lines.size(); ++j)
      if (lines[j] == label) return j;
    throw std::invalid_argument("unknown emission line '" + std::string(label) + "'");
  }

  bool operator==(const EmissionRecord&) const = default;
};

/// Observer hooks for a single cycle. All are no-ops by default.
struct NullCycleObserver {
  void on_jump(double, LevelIndex, LevelIndex) {}
  void on_observe(std::size_t, LevelIndex) {}
};

class KmcEngine {
 public:
  KmcEngine(const LevelGraph& graph, const Protocol& protocol)
      : lines_(graph.line_labels()),
        channels_(graph.channel_labels()),
        schedule_(protocol, channels_),
        period_(protocol.period()),
        empty_(graph.index(level::kEmpty)),
        bright_(graph.index(level::kBright)),
        dark_(graph.index(level::kDark)),
        spontaneous_(graph.size()),
        spontaneous_total_(graph.size(), 0.0),
        driven_(graph.size()) {
    const auto report = validate(graph);
    if (!report.ok())
      throw std::invalid_argument("invalid level graph: " + report.violations.front());
    for (const auto& tr : graph.transitions()) {
      if (tr.kind == TransitionKind::Driven) {
        const auto c = static_cast<std::size_t>(
            std::find(channels_.begin(), channels_.end(), tr.label) - channels_.begin());
        driven_[tr.from].push_back({tr.to, c, tr.branch_weight});
        continue;
      }
      const double rate = tr.effective_rate();
      if (rate <= 0.0) continue;
      std::int32_t line = -1;
      if (tr.kind == TransitionKind::Radiative)
        line = static_cast<std::int32_t>(
            std::find(lines_.begin(), lines_.end(), tr.label) - lines_.begin());
      spontaneous_[tr.from].push_back({tr.to, rate, line});
      spontaneous_total_[tr.from] += rate;
    }
    auto resolve = [&](const PiProbe& probe) {
      ResolvedProbe r;
      r.fraction = probe.fraction;
      for (const auto& [a, b] : probe.mapping) r.moves.emplace_back(graph.index(a), graph.index(b));
      return r;
    };
    for (const auto& p : schedule_.initial_probes()) initial_probes_.push_back(resolve(p));
    for (const auto& seg : schedule_.segments()) {
      SegmentBounds b;
      for (std::size_t c = 0; c < channels_.size(); ++c)
        b.drive.push_back(schedule_.drive_bound(seg, c));
      b.generation = schedule_.generation_bound(seg);
      for (const auto& p : seg.probes_at_end) b.probes.push_back(resolve(p));
      bounds_.push_back(std::move(b));
    }
  }

  const std::vector<std::string>& lines() const { return lines_; }
  double period() const { return period_; }
  LevelIndex empty_level() const { return empty_; }

  /// Simulates one period from `start`. Emission events are appended to
  /// `events` in time order; observation times must be sorted.
  template <class Observer = NullCycleObserver>
  LevelIndex sample_cycle(LevelIndex start, std::uint64_t cycle_index, std::mt19937_64& rng,
                          std::vector<EmissionEvent>* events,
                          const std::vector<double>& observe_times = {},
                          Observer&& observer = Observer{}) const {
    LevelIndex level = start;
    std::size_t next_obs = 0;
    auto jump = [&](double t, LevelIndex to) {
      observer.on_jump(t, level, to);
      level = to;
    };
    auto probe = [&](double t, const ResolvedProbe& pr) {
      for (const auto& [from, to] : pr.moves) {
        if (from != level) continue;
        if (pr.fraction >= 1.0 || uniform01(rng) < pr.fraction) jump(t, to);
        break;
      }
    };
    for (const auto& pr : initial_probes_) probe(0.0, pr);

    const auto& segments = schedule_.segments();
    double t = 0.0;
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& seg = segments[k];
      const auto& bnd = bounds_[k];
      t = seg.begin;
      while (true) {
        double total = spontaneous_total_[level];
        for (const auto& d : driven_[level]) total += d.weight * bnd.drive[d.channel];
        if (level == empty_) total += bnd.generation;

        double t_next = seg.end;
        bool fired = false;
        if (total > 0.0) {
          const double wait = -std::log1p(-uniform01(rng)) / total;
          if (t + wait < seg.end) {
            t_next = t + wait;
            fired = true;
          }
        }
        for (; next_obs < observe_times.size() && observe_times[next_obs] < t_next; ++next_obs)
          observer.on_observe(next_obs, level);
        t = t_next;
        if (!fired) break;

        double x = uniform01(rng) * total;
        if (x < spontaneous_total_[level]) {
          const auto& options = spontaneous_[level];
          std::size_t pick = 0;
          while (pick + 1 < options.size() && x >= options[pick].rate) {
            x -= options[pick].rate;
            ++pick;
          }
          const auto& chosen = options[pick];
          if (chosen.line >= 0 && events)
            events->push_back({t, cycle_index, static_cast<std::uint32_t>(chosen.line), false});
          jump(t, chosen.to);
          continue;
        }
        x -= spontaneous_total_[level];
        bool handled = false;
        for (const auto& d : driven_[level]) {
          const double b = d.weight * bnd.drive[d.channel];
          if (x < b) {
            const double actual = d.weight * schedule_.drive(seg, d.channel, t);
            if (uniform01(rng) * b < actual) jump(t, d.to);
            handled = true;
            break;
          }
          x -= b;
        }
        if (handled || level != empty_) continue;
        // Non-resonant capture into an empty dot: bright or dark with equal odds.
        if (uniform01(rng) * bnd.generation < schedule_.generation(seg, t))
          jump(t, uniform01(rng) < 0.5 ? bright_ : dark_);
      }
      for (const auto& pr : bnd.probes) probe(seg.end, pr);
    }
    for (; next_obs < observe_times.size(); ++next_obs) observer.on_observe(next_obs, level);
    return level;
  }

 private:
  struct Spontaneous {
    LevelIndex to;
    double rate;
    std::int32_t line;
  };
  struct DrivenExit {
    LevelIndex to;
    std::size_t channel;
    double weight;
  };
  struct ResolvedProbe {
    std::vector<std::pair<LevelIndex, LevelIndex>> moves;
    double fraction = 1.0;
  };
  struct SegmentBounds {
    std::vector<double> drive;
    double generation = 0.0;
    std::vector<ResolvedProbe> probes;
  };

  std::vector<std::string> lines_;
  std::vector<std::string> channels_;
  RateSchedule schedule_;
  double period_;
  LevelIndex empty_, bright_, dark_;
  std::vector<std::vector<Spontaneous>> spontaneous_;
  std::vector<double> spontaneous_total_;
  std::vector<std::vector<DrivenExit>> driven_;
  std::vector<ResolvedProbe> initial_probes_;
  std::vector<SegmentBounds> bounds_;
};

struct CycleSample {
  std::vector<EmissionEvent> events;
  LevelIndex final_level = 0;
};

/// One cycle from `start` using the caller's generator state.
inline CycleSample kmc_sample_cycle(const LevelGraph& graph, const Protocol& protocol,
                                    LevelIndex start, std::mt19937_64& rng,
                                    std::uint64_t cycle_index = 0) {
  KmcEngine engine(graph, protocol);
  CycleSample out;
  out.final_level = engine.sample_cycle(start, cycle_index, rng, &out.events);
  return out;
}

/// Degree of parallelism: QDD_WORKERS if set, otherwise the hardware count.
inline unsigned default_worker_count() {
  if (const char* env = std::getenv("QDD_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct KmcOptions {
  std::uint64_t n_cycles = 1;
  std::uint64_t seed = 0;
  double detection_efficiency = 1e-3;
  // Start every cycle from Empty instead of carrying the final level over.
  bool reset_each_cycle = false;
  unsigned workers = 0;  // 0 selects default_worker_count()
  std::vector<double> observe_times;  // sorted, within [0, period]
};

struct EnsembleResult {
  EmissionRecord record;
  // Occupied level at each observation time, n_cycles x observe_times.size().
  std::vector<std::uint16_t> observed;
  std::size_t n_observe = 0;

  LevelIndex observed_level(std::uint64_t cycle, std::size_t k) const {
    return observed[cycle * n_observe + k];
  }
};

namespace detail {

struct ObservationRecorder {
  std::uint16_t* row;
  void on_jump(double, LevelIndex, LevelIndex) {}
  void on_observe(std::size_t k, LevelIndex level) { row[k] = static_cast<std::uint16_t>(level); }
};

template <class Fn>
void parallel_for_chunks(std::size_t chunks, Fn&& fn) {
  if (chunks == 1) {
    fn(std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (std::size_t w = 0; w < chunks; ++w)
    pool.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Runs n_cycles consecutive cycles. Every cycle draws from its own stream,
/// so the output is a pure function of (graph, protocol, seed, n_cycles)
/// regardless of worker count. With carry-over, each worker first computes
/// the end level of its cycle range as a function of the range's start
/// level (trajectories from different starts coalesce quickly); the true
/// start levels are then stitched serially and every range is replayed.
inline EnsembleResult kmc_ensemble_run(const LevelGraph& graph, const Protocol& protocol,
                                       const KmcOptions& opt) {
  if (opt.n_cycles < 1) throw std::invalid_argument("n_cycles must be at least 1");
  if (!(opt.detection_efficiency >= 0.0 && opt.detection_efficiency <= 1.0))
    throw std::invalid_argument("detection_efficiency must lie in [0,1]");
  if (!std::is_sorted(opt.observe_times.begin(), opt.observe_times.end()))
    throw std::invalid_argument("observation times must be sorted");
  if (graph.size() > std::numeric_limits<std::uint16_t>::max())
    throw std::invalid_argument("too many levels");

  const KmcEngine engine(graph, protocol);
  const std::uint64_t n = opt.n_cycles;
  const unsigned workers = opt.workers ? opt.workers : default_worker_count();
  const std::size_t chunks = static_cast<std::size_t>(std::min<std::uint64_t>(workers, n));
  std::vector<std::uint64_t> first(chunks + 1);
  for (std::size_t w = 0; w <= chunks; ++w) first[w] = n * w / chunks;

  auto run_cycle = [&](LevelIndex start, std::uint64_t k, std::vector<EmissionEvent>* ev,
                       std::uint16_t* obs_row) {
    std::mt19937_64 rng(cycle_stream_seed(opt.seed, k, StreamPurpose::Trajectory));
    if (obs_row)
      return engine.sample_cycle(start, k, rng, ev, opt.observe_times,
                                 detail::ObservationRecorder{obs_row});
    return engine.sample_cycle(start, k, rng, ev);
  };

  std::vector<LevelIndex> chunk_start(chunks, engine.empty_level());
  if (!opt.reset_each_cycle && chunks > 1) {
    std::vector<std::vector<LevelIndex>> end_map(chunks);
    detail::parallel_for_chunks(chunks - 1, [&](std::size_t w) {
      std::vector<LevelIndex> cur(graph.size());
      for (LevelIndex i = 0; i < cur.size(); ++i) cur[i] = i;
      std::vector<LevelIndex> distinct, next;
      for (std::uint64_t k = first[w]; k < first[w + 1]; ++k) {
        distinct = cur;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        next.assign(graph.size(), 0);
        for (LevelIndex from : distinct) {
          const LevelIndex to = run_cycle(from, k, nullptr, nullptr);
          for (LevelIndex s = 0; s < cur.size(); ++s)
            if (cur[s] == from) next[s] = to;
        }
        cur.swap(next);
      }
      end_map[w] = cur;
    });
    for (std::size_t w = 1; w < chunks; ++w) chunk_start[w] = end_map[w - 1][chunk_start[w - 1]];
  }

  EnsembleResult result;
  result.n_observe = opt.observe_times.size();
  result.observed.assign(n * result.n_observe, 0);
  std::vector<std::vector<EmissionEvent>> chunk_events(chunks);
  detail::parallel_for_chunks(chunks, [&](std::size_t w) {
    LevelIndex level = chunk_start[w];
    auto& ev = chunk_events[w];
    for (std::uint64_t k = first[w]; k < first[w + 1]; ++k) {
      if (opt.reset_each_cycle) level = engine.empty_level();
      const std::size_t before = ev.size();
      std::uint16_t* row = result.n_observe ? &result.observed[k * result.n_observe] : nullptr;
      level = run_cycle(level, k, &ev, row);
      // Detection is a counter-based Bernoulli filter keyed by (cycle, ordinal),
      // independent of the trajectory stream.
      const std::uint64_t det_seed = cycle_stream_seed(opt.seed, k, StreamPurpose::Detection);
      for (std::size_t i = before; i < ev.size(); ++i) {
        const std::uint64_t h = splitmix64(det_seed ^ splitmix64(i - before));
        ev[i].detected =
            static_cast<double>(h >> 11) * 0x1.0p-53 < opt.detection_efficiency;
      }
    }
  });

  auto& rec = result.record;
  rec.n_cycles = n;
  rec.seed = opt.seed;
  rec.detection_efficiency = opt.detection_efficiency;
  rec.period = engine.period();
  rec.lines = engine.lines();
  std::size_t total = 0;
  for (const auto& ev : chunk_events) total += ev.size();
  rec.events.reserve(total);
  for (auto& ev : chunk_events) rec.events.insert(rec.events.end(), ev.begin(), ev.end());
  return result;
}

inline EmissionRecord kmc_ensemble(const LevelGraph& graph, const Protocol& protocol,
                                   std::uint64_t n_cycles, std::uint64_t seed,
                                   double detection_efficiency = 1e-3) {
  KmcOptions opt;
  opt.n_cycles = n_cycles;
  opt.seed = seed;
  opt.detection_efficiency = detection_efficiency;
  return kmc_ensemble_run(graph, protocol, opt).record;
}

}  // namespace qdd
