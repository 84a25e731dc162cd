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

#pragma once

// Monte Carlo generation of time-tag streams for a pulsed pair source feeding a
// 50/50 beamsplitter, with inefficient, noisy, dead-time-limited click detectors.
//
// Per pulse: a pair is emitted with probability gamma; each photon survives its
// input coupling independently; two survivors leave as (1,1) with probability
// (1-nu)/2 and as (2,0) or (0,2) with probability (1+nu)/4 each; a lone survivor
// exits either port with probability 1/2. Pulses with no pair, no dark count and
// no pending afterpulse are skipped in bulk by sampling geometric gaps, so the
// cost scales with the number of events rather than the number of pulses.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zeroherald/model.h"
#include "zeroherald/rng.h"
#include "zeroherald/tags.h"

namespace zeroherald {

struct SimConfig {
  SourceParams source;
  DetectorParams det1;
  DetectorParams det2;
  IndistinguishabilityProfile profile = IndistinguishabilityProfile::gaussian(1.0, 0.1);
  /// Relative input delay, same units as the profile width (ps).
  double delta_t_ps = 0.0;
  std::uint32_t rep_period_ps = 10000;
  std::uint32_t timebin_ps = 81;
  std::uint32_t divider = 512;
  std::uint64_t n_pulses = 1;
  std::uint64_t seed = 0;
  /// Gaussian timing jitter applied to photon-induced clicks.
  double jitter_sigma_ps = 0.0;
  /// Arrival time of photon-induced clicks after the pulse.
  double signal_offset_ps = 1000.0;
  /// Detection window after each pulse inside which in-gate dark counts and
  /// afterpulses are placed. Out-of-gate dark counts fall in the remainder of the period.
  double gate_window_ps = 2000.0;
  /// Pulses per independently seeded shard. Detectors start each shard live.
  std::uint64_t shard_pulses = std::uint64_t{1} << 24;
  /// Worker threads (0 = hardware concurrency). Output does not depend on it.
  unsigned threads = 0;
  /// Keep a per-pulse record of every emitted pair's output photon numbers.
  bool record_truth = false;

  void validate() const;
  /// Distance kept between randomly placed in-gate/out-of-gate events and the
  /// window edges, so reference-clock quantization cannot move them across.
  double edge_margin_ps() const { return 2.0 * timebin_ps; }
};

/// Photon numbers at outputs 1 and 2; one of (0,0),(1,0),(0,1),(1,1),(2,0),(0,2).
struct TrialOutcome {
  std::uint8_t m = 0;
  std::uint8_t n = 0;

  friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

/// Index of an outcome in the order 00, 10, 01, 11, 20, 02.
std::size_t outcome_index(TrialOutcome outcome);

TrialOutcome sample_trial(Rng& rng, const SourceParams& src, double nu);
/// Outcome conditioned on a pair having been emitted.
TrialOutcome sample_pair_outcome(Rng& rng, const SourceParams& src, double nu);

struct DetectorState {
  /// First pulse at which the detector can click again.
  std::uint64_t live_from = 0;
  std::optional<std::uint64_t> afterpulse_at;

  bool live(std::uint64_t pulse) const { return pulse >= live_from; }
};

enum class ClickCause : std::uint8_t { kNone, kPhoton, kDark, kAfterpulse };

/// In-gate response at `pulse` given the photons arriving and whether a dark
/// count fired. A dead detector ignores everything. On a click the detector is
/// dead for the next det.dead_pulses pulses and may schedule an afterpulse on the
/// first live pulse after that.
ClickCause resolve_click(Rng& rng, std::uint64_t pulse, unsigned photons, bool dark_fired,
                         const DetectorParams& det, DetectorState& state);

/// Samples the dark count internally: click probability 1-(1-d)(1-eta)^n when live.
bool detect_pulse(Rng& rng, std::uint64_t pulse, unsigned photons, const DetectorParams& det,
                  DetectorState& state);

struct TruthEvent {
  std::uint64_t pulse = 0;
  TrialOutcome outcome;
};

/// Ground-truth counters accumulated during generation.
struct TruthCounters {
  std::uint64_t pulses = 0;
  std::uint64_t pairs = 0;
  std::uint64_t eventful_pulses = 0;
  /// Outcome histogram over all pulses (order 00, 10, 01, 11, 20, 02).
  std::array<std::uint64_t, 6> outcomes{};
  std::uint64_t ref_tags = 0;
  std::array<std::uint64_t, 2> in_gate_clicks{};
  std::array<std::uint64_t, 2> photon_clicks{};
  std::array<std::uint64_t, 2> dark_clicks{};
  std::array<std::uint64_t, 2> afterpulse_clicks{};
  std::array<std::uint64_t, 2> out_of_gate_clicks{};

  void merge(const TruthCounters& other);
};

struct SimResult {
  TagStream stream;
  TruthCounters truth;
  /// Pair-emitting pulses in pulse order; filled only with record_truth.
  std::vector<TruthEvent> events;
};

/// Throws kCapacity when the last timestamp would overflow 64 bits.
SimResult run_simulation(const SimConfig& config);

struct ScanPoint {
  double delta_t_ps = 0.0;
  SimResult result;
};

/// One simulation per delay, seeded with derive_seed(config.seed, index).
std::vector<ScanPoint> scan_delays(const SimConfig& config, std::span<const double> delays);

}  // namespace zeroherald
