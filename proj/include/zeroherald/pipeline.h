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

// Post-processing of a tag stream into a per-pulse click table:
// pulse-train reconstruction from divided reference tags, virtual gating of
// detector tags, software dead-time extension, and event-table construction.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "zeroherald/tags.h"

namespace zeroherald {

/// Pulse times implied by the reference tags: divider-1 evenly spaced virtual
/// pulses between each pair of consecutive reference tags. Times are in timebins.
class PulseTrain {
 public:
  PulseTrain(std::vector<std::uint64_t> refs, std::uint32_t divider, double period);

  /// (n_refs - 1) * divider + 1
  std::uint64_t size() const;
  double time(std::uint64_t pulse) const;
  /// Median reference spacing divided by the divider.
  double period() const { return period_; }
  std::uint32_t divider() const { return divider_; }
  const std::vector<std::uint64_t>& refs() const { return refs_; }

  struct Position {
    std::uint64_t pulse;
    /// timestamp - time(pulse), exact to double rounding of one division.
    double offset;
  };
  /// Latest pulse whose time is <= timestamp, or nullopt before the first reference.
  std::optional<Position> locate(std::uint64_t timestamp) const;

  std::vector<double> times() const;

 private:
  std::vector<std::uint64_t> refs_;
  std::uint32_t divider_;
  double period_;
};

/// Needs at least two REF tags; throws kClockGlitch when any reference spacing
/// differs from the median by more than half a timebin per pulse.
PulseTrain reconstruct_pulse_train(const TagStream& stream);

struct GateStats {
  std::uint64_t total = 0;
  std::uint64_t assigned = 0;
  /// Assigned tags that landed on a pulse already holding a tag on this channel.
  std::uint64_t duplicates = 0;
  std::uint64_t rejected_out_of_gate = 0;
  /// Before the first reconstructed pulse or after the last gate.
  std::uint64_t rejected_outside_train = 0;

  std::uint64_t rejected() const { return rejected_out_of_gate + rejected_outside_train; }
};

struct GateResult {
  /// Sorted, unique pulse indices with a gated click; [0] is D1, [1] is D2.
  std::array<std::vector<std::uint64_t>, 2> clicks;
  std::array<GateStats, 2> stats;
};

/// Assigns each detector tag with time(k) <= t < time(k) + window to pulse k.
/// Throws kConfiguration unless 0 < window < pulse period.
GateResult virtual_gate(const TagStream& stream, const PulseTrain& pulses, double window_ps);

struct DeadTimeResult {
  std::vector<std::uint64_t> accepted;
  std::vector<std::uint64_t> suppressed;
};

/// After an accepted click at pulse k, clicks at k+1..k+dead_pulses are
/// suppressed. Suppressed clicks do not extend the window. Idempotent.
DeadTimeResult apply_dead_time(std::span<const std::uint64_t> clicks, std::uint32_t dead_pulses);

enum class PulseState : std::uint8_t { kNoClick = 0, kClick = 1, kDead = 2 };

const char* to_string(PulseState state);

struct EventRow {
  std::uint64_t pulse = 0;
  PulseState d1 = PulseState::kNoClick;
  PulseState d2 = PulseState::kNoClick;

  friend bool operator==(const EventRow&, const EventRow&) = default;
};

/// Per-pulse click / no-click / dead record for both detectors. Stored sparsely:
/// only rows where some channel clicked or is dead are kept, every other row
/// within [0, rows()) is (no-click, no-click).
class PulseEventTable {
 public:
  PulseEventTable() = default;
  PulseEventTable(std::uint64_t rows, std::uint32_t dead_pulses, std::vector<EventRow> sparse);

  std::uint64_t rows() const { return rows_; }
  std::uint32_t dead_pulses() const { return dead_pulses_; }
  const std::vector<EventRow>& sparse_rows() const { return sparse_; }
  EventRow row(std::uint64_t pulse) const;
  /// Every row, including the implicit all-no-click ones. For small tables.
  std::vector<EventRow> dense_rows() const;

  /// Ordering, range and dead-window invariants.
  void validate() const;

  friend bool operator==(const PulseEventTable&, const PulseEventTable&) = default;

 private:
  std::uint64_t rows_ = 0;
  std::uint32_t dead_pulses_ = 0;
  std::vector<EventRow> sparse_;
};

/// Applies dead time per channel and marks dead rows. `clicks` hold gated
/// click pulse indices per channel (D1, D2).
PulseEventTable build_event_table(const std::array<std::vector<std::uint64_t>, 2>& clicks,
                                  std::uint64_t rows, std::uint32_t dead_pulses);
PulseEventTable build_event_table(const GateResult& gated, const PulseTrain& pulses,
                                  std::uint32_t dead_pulses);

/// "pulse_index,d1,d2" CSV with '#' header lines for the row count and dead time.
/// Without `all_rows`, implicit (no-click, no-click) rows are omitted.
void write_event_table_csv(const PulseEventTable& table, std::ostream& out, bool all_rows = false);
PulseEventTable read_event_table_csv(std::istream& in);

struct PipelineOptions {
  double gate_window_ps = 2000.0;
  std::uint32_t dead_pulses = 5;
};

struct PipelineResult {
  PulseTrain pulses;
  GateResult gated;
  PulseEventTable table;
};

PipelineResult run_pipeline(const TagStream& stream, const PipelineOptions& options);

}  // namespace zeroherald
