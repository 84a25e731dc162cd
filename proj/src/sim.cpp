// Copyright 2026 The zeroherald Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zeroherald/sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return a > kNever - b ? kNever : a + b;
}

// Independent per-pulse random triggers, sampled jointly conditioned on at least
// one firing. Index 0: pair emission; 1, 2: in-gate dark D1, D2; 3, 4: out-of-gate dark.
class TriggerSampler {
 public:
  static constexpr std::size_t kCount = 5;

  explicit TriggerSampler(std::array<double, kCount> probs) : probs_(probs) {
    double tail = 1.0;
    for (std::size_t i = kCount; i-- > 0;) {
      tail *= 1.0 - probs_[i];
      tail_quiet_[i] = tail;
    }
  }

  /// Probability that any trigger fires on a pulse.
  double event_probability() const { return 1.0 - tail_quiet_[0]; }

  std::array<bool, kCount> sample_given_any(Rng& rng) const {
    std::array<bool, kCount> fired{};
    bool any = false;
    for (std::size_t i = 0; i < kCount; ++i) {
      if (any) {
        fired[i] = rng.bernoulli(probs_[i]);
        continue;
      }
      const double remaining = 1.0 - tail_quiet_[i];
      fired[i] = remaining > 0.0 && rng.bernoulli(probs_[i] / remaining);
      any = fired[i];
    }
    return fired;
  }

 private:
  std::array<double, kCount> probs_;
  std::array<double, kCount> tail_quiet_{};
};

struct ShardOutput {
  std::vector<TimeTag> tags;
  TruthCounters truth;
  std::vector<TruthEvent> events;
};

class ShardRunner {
 public:
  ShardRunner(const SimConfig& config, double nu)
      : config_(config),
        nu_(nu),
        triggers_({config.source.gamma, config.det1.dark_prob, config.det2.dark_prob,
                   config.det1.out_of_gate_dark_prob, config.det2.out_of_gate_dark_prob}) {}

  ShardOutput run(std::uint64_t shard, std::uint64_t begin, std::uint64_t end) const {
    ShardOutput out;
    Rng rng(config_.seed, shard);
    std::array<DetectorState, 2> states{DetectorState{begin, {}}, DetectorState{begin, {}}};
    const std::array<const DetectorParams*, 2> dets{&config_.det1, &config_.det2};
    const double p_event = triggers_.event_probability();
    const std::uint64_t divider = config_.divider;

    std::uint64_t next_trigger = saturating_add(begin, rng.geometric(p_event));
    std::uint64_t next_ref = (begin + divider - 1) / divider * divider;
    out.truth.pulses = end - begin;

    while (true) {
      std::uint64_t pulse = next_trigger;
      for (const auto& s : states) {
        if (s.afterpulse_at) pulse = std::min(pulse, *s.afterpulse_at);
      }
      const std::uint64_t stop = std::min(pulse, end);
      for (; next_ref < stop; next_ref += divider) emit_ref(out, next_ref);
      if (pulse >= end) break;
      if (next_ref == pulse) {
        emit_ref(out, next_ref);
        next_ref += divider;
      }

      std::array<bool, TriggerSampler::kCount> fired{};
      if (pulse == next_trigger) {
        fired = triggers_.sample_given_any(rng);
        ++out.truth.eventful_pulses;
        next_trigger = saturating_add(pulse + 1, rng.geometric(p_event));
      }

      TrialOutcome outcome;
      if (fired[0]) {
        outcome = sample_pair_outcome(rng, config_.source, nu_);
        ++out.truth.pairs;
        ++out.truth.outcomes[outcome_index(outcome)];
        if (config_.record_truth) out.events.push_back(TruthEvent{pulse, outcome});
      }
      const std::array<unsigned, 2> photons{outcome.m, outcome.n};
      for (std::size_t ch = 0; ch < 2; ++ch) {
        auto& state = states[ch];
        const auto cause = resolve_click(rng, pulse, photons[ch], fired[1 + ch], *dets[ch], state);
        if (cause != ClickCause::kNone) {
          ++out.truth.in_gate_clicks[ch];
          double offset;
          if (cause == ClickCause::kPhoton) {
            ++out.truth.photon_clicks[ch];
            offset = config_.signal_offset_ps;
            if (config_.jitter_sigma_ps > 0.0) offset += config_.jitter_sigma_ps * rng.normal();
          } else {
            ++(cause == ClickCause::kDark ? out.truth.dark_clicks : out.truth.afterpulse_clicks)[ch];
            offset = uniform_between(rng, 0.0, config_.gate_window_ps);
          }
          emit(out, ch, pulse, offset);
        }
        if (fired[3 + ch] && state.live(pulse)) {
          // Lands after the gate in this period; the detector still goes dead.
          ++out.truth.out_of_gate_clicks[ch];
          emit(out, ch, pulse,
               uniform_between(rng, config_.gate_window_ps, static_cast<double>(config_.rep_period_ps)));
          register_click(rng, pulse, *dets[ch], state);
        }
        // Afterpulses that would fall into the next shard are dropped.
        if (state.afterpulse_at && *state.afterpulse_at >= end) state.afterpulse_at.reset();
      }
    }
    out.truth.outcomes[0] = out.truth.pulses - out.truth.pairs + out.truth.outcomes[0];
    return out;
  }

  static void register_click(Rng& rng, std::uint64_t pulse, const DetectorParams& det,
                             DetectorState& state) {
    state.live_from = pulse + det.dead_pulses + 1;
    state.afterpulse_at.reset();
    if (det.afterpulse_prob > 0.0 && rng.bernoulli(det.afterpulse_prob)) {
      state.afterpulse_at = state.live_from;
    }
  }

 private:
  double uniform_between(Rng& rng, double lo, double hi) const {
    const double margin = config_.edge_margin_ps();
    return lo + margin + rng.uniform() * (hi - lo - 2.0 * margin);
  }

  void emit_ref(ShardOutput& out, std::uint64_t pulse) const {
    const std::uint64_t ps = pulse * config_.rep_period_ps;
    out.tags.push_back(TimeTag{Channel::kRef, ps / config_.timebin_ps});
    ++out.truth.ref_tags;
  }

  void emit(ShardOutput& out, std::size_t ch, std::uint64_t pulse, double offset_ps) const {
    const std::int64_t offset = std::llround(offset_ps);
    const std::uint64_t base = pulse * config_.rep_period_ps;
    std::uint64_t ps;
    if (offset < 0) {
      const auto back = static_cast<std::uint64_t>(-offset);
      ps = back > base ? 0 : base - back;
    } else {
      ps = base + static_cast<std::uint64_t>(offset);
    }
    out.tags.push_back(TimeTag{ch == 0 ? Channel::kD1 : Channel::kD2, ps / config_.timebin_ps});
  }

  const SimConfig& config_;
  double nu_;
  TriggerSampler triggers_;
};

}  // namespace

void SimConfig::validate() const {
  source.validate();
  det1.validate();
  det2.validate();
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kValidation, what); };
  if (rep_period_ps == 0) fail("rep_period_ps must be positive");
  if (timebin_ps == 0) fail("timebin_ps must be positive");
  if (divider == 0) fail("divider must be at least 1");
  if (n_pulses == 0) fail("n_pulses must be at least 1");
  if (shard_pulses == 0) fail("shard_pulses must be at least 1");
  const double margin = edge_margin_ps();
  if (!(gate_window_ps > 2.0 * margin) || !(gate_window_ps + 2.0 * margin < rep_period_ps)) {
    fail("gate_window_ps must exceed 4 timebins and leave 4 timebins of the period outside it");
  }
  if (!(signal_offset_ps >= margin && signal_offset_ps <= gate_window_ps - margin)) {
    fail("signal_offset_ps must lie at least 2 timebins inside the gate window");
  }
  if (!(jitter_sigma_ps >= 0.0) || !(jitter_sigma_ps < gate_window_ps)) {
    fail("jitter_sigma_ps must be non-negative and smaller than the gate window");
  }
  if (!std::isfinite(delta_t_ps)) fail("delta_t_ps must be finite");
  profile.nu(delta_t_ps);  // out-of-domain for tabulated profiles
}

std::size_t outcome_index(TrialOutcome o) {
  if (o.m == 0 && o.n == 0) return 0;
  if (o.m == 1 && o.n == 0) return 1;
  if (o.m == 0 && o.n == 1) return 2;
  if (o.m == 1 && o.n == 1) return 3;
  if (o.m == 2 && o.n == 0) return 4;
  return 5;
}

TrialOutcome sample_pair_outcome(Rng& rng, const SourceParams& src, double nu) {
  const bool first = rng.bernoulli(src.kappa1);
  const bool second = rng.bernoulli(src.kappa2);
  if (first && second) {
    const double u = rng.uniform();
    if (u < 0.5 * (1.0 - nu)) return {1, 1};
    if (u < 0.5 * (1.0 - nu) + 0.25 * (1.0 + nu)) return {2, 0};
    return {0, 2};
  }
  if (first || second) return rng.bernoulli(0.5) ? TrialOutcome{1, 0} : TrialOutcome{0, 1};
  return {0, 0};
}

TrialOutcome sample_trial(Rng& rng, const SourceParams& src, double nu) {
  if (!rng.bernoulli(src.gamma)) return {0, 0};
  return sample_pair_outcome(rng, src, nu);
}

ClickCause resolve_click(Rng& rng, std::uint64_t pulse, unsigned photons, bool dark_fired,
                         const DetectorParams& det, DetectorState& state) {
  if (!state.live(pulse)) return ClickCause::kNone;
  const bool afterpulse = state.afterpulse_at == pulse;
  if (afterpulse) state.afterpulse_at.reset();
  bool detected = false;
  if (photons > 0) {
    const double miss = std::pow(1.0 - det.eta, static_cast<double>(photons));
    detected = rng.bernoulli(1.0 - miss);
  }
  ClickCause cause = ClickCause::kNone;
  if (detected) {
    cause = ClickCause::kPhoton;
  } else if (dark_fired) {
    cause = ClickCause::kDark;
  } else if (afterpulse) {
    cause = ClickCause::kAfterpulse;
  }
  if (cause != ClickCause::kNone) ShardRunner::register_click(rng, pulse, det, state);
  return cause;
}

bool detect_pulse(Rng& rng, std::uint64_t pulse, unsigned photons, const DetectorParams& det,
                  DetectorState& state) {
  const bool dark = rng.bernoulli(det.dark_prob);
  return resolve_click(rng, pulse, photons, dark, det, state) != ClickCause::kNone;
}

void TruthCounters::merge(const TruthCounters& other) {
  pulses += other.pulses;
  pairs += other.pairs;
  eventful_pulses += other.eventful_pulses;
  ref_tags += other.ref_tags;
  for (std::size_t i = 0; i < outcomes.size(); ++i) outcomes[i] += other.outcomes[i];
  for (std::size_t ch = 0; ch < 2; ++ch) {
    in_gate_clicks[ch] += other.in_gate_clicks[ch];
    photon_clicks[ch] += other.photon_clicks[ch];
    dark_clicks[ch] += other.dark_clicks[ch];
    afterpulse_clicks[ch] += other.afterpulse_clicks[ch];
    out_of_gate_clicks[ch] += other.out_of_gate_clicks[ch];
  }
}

SimResult run_simulation(const SimConfig& config) {
  config.validate();
  const std::uint64_t rep = config.rep_period_ps;
  if (config.n_pulses > std::numeric_limits<std::uint64_t>::max() / rep - 2) {
    throw Error(ErrorKind::kCapacity, "n_pulses * rep_period_ps overflows the 64-bit time axis");
  }
  const double nu = config.profile.nu(config.delta_t_ps);
  const ShardRunner runner(config, nu);

  const std::uint64_t n_shards = (config.n_pulses - 1) / config.shard_pulses + 1;
  std::vector<ShardOutput> outputs(n_shards);
  auto run_shard = [&](std::uint64_t s) {
    const std::uint64_t begin = s * config.shard_pulses;
    const std::uint64_t end = std::min(config.n_pulses, begin + config.shard_pulses);
    outputs[s] = runner.run(s, begin, end);
  };
  unsigned workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = static_cast<unsigned>(std::clamp<std::uint64_t>(workers, 1, n_shards));
  if (workers == 1) {
    for (std::uint64_t s = 0; s < n_shards; ++s) run_shard(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t s = w; s < n_shards; s += workers) run_shard(s);
      });
    }
  }

  SimResult result;
  result.stream.header.timebin_ps = config.timebin_ps;
  result.stream.header.rep_period_ps = config.rep_period_ps;
  result.stream.header.divider = config.divider;
  result.stream.header.provenance =
      std::string("zeroherald sim; rng=") + Rng::kAlgorithm + "; seed=" + std::to_string(config.seed);
  std::size_t total = 0;
  for (const auto& o : outputs) total += o.tags.size();
  result.stream.tags.reserve(total);
  for (auto& o : outputs) {
    result.stream.tags.insert(result.stream.tags.end(), o.tags.begin(), o.tags.end());
    result.truth.merge(o.truth);
    if (config.record_truth) {
      result.events.insert(result.events.end(), o.events.begin(), o.events.end());
    }
  }
  std::stable_sort(result.stream.tags.begin(), result.stream.tags.end(),
                   [](const TimeTag& a, const TimeTag& b) {
                     return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                                       : a.channel < b.channel;
                   });
  return result;
}

std::vector<ScanPoint> scan_delays(const SimConfig& config, std::span<const double> delays) {
  if (delays.empty()) throw Error(ErrorKind::kValidation, "delay list is empty");
  std::vector<ScanPoint> points;
  points.reserve(delays.size());
  for (std::size_t i = 0; i < delays.size(); ++i) {
    SimConfig point = config;
    point.delta_t_ps = delays[i];
    point.seed = derive_seed(config.seed, i);
    points.push_back(ScanPoint{delays[i], run_simulation(point)});
  }
  return points;
}

}  // namespace zeroherald
