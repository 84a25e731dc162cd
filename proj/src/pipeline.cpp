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

#include "zeroherald/pipeline.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

__extension__ using u128 = unsigned __int128;

double median(std::vector<std::uint64_t> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = static_cast<double>(values[mid]);
  if (values.size() % 2 == 1) return upper;
  const double lower = static_cast<double>(*std::max_element(values.begin(), values.begin() + mid));
  return 0.5 * (lower + upper);
}

PulseState parse_state(std::string_view text, std::uint64_t line) {
  if (text == "no-click") return PulseState::kNoClick;
  if (text == "click") return PulseState::kClick;
  if (text == "dead") return PulseState::kDead;
  throw FormatError("unknown pulse state '" + std::string(text) + "'", line);
}

std::uint64_t parse_u64(std::string_view text, std::uint64_t line) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("malformed integer '" + std::string(text) + "'", line);
  }
  return value;
}

}  // namespace

PulseTrain::PulseTrain(std::vector<std::uint64_t> refs, std::uint32_t divider, double period)
    : refs_(std::move(refs)), divider_(divider), period_(period) {}

std::uint64_t PulseTrain::size() const {
  if (refs_.empty()) return 0;
  return (refs_.size() - 1) * static_cast<std::uint64_t>(divider_) + 1;
}

double PulseTrain::time(std::uint64_t pulse) const {
  const std::uint64_t segment = pulse / divider_;
  const std::uint64_t step = pulse % divider_;
  if (segment + 1 >= refs_.size()) return static_cast<double>(refs_.back());
  const std::uint64_t spacing = refs_[segment + 1] - refs_[segment];
  const u128 scaled = static_cast<u128>(step) * spacing;
  return static_cast<double>(refs_[segment]) + static_cast<double>(scaled) / divider_;
}

std::optional<PulseTrain::Position> PulseTrain::locate(std::uint64_t timestamp) const {
  if (refs_.empty() || timestamp < refs_.front()) return std::nullopt;
  const auto it = std::upper_bound(refs_.begin(), refs_.end(), timestamp);
  const std::uint64_t segment = static_cast<std::uint64_t>(it - refs_.begin()) - 1;
  const std::uint64_t base = refs_[segment];
  if (segment + 1 == refs_.size()) {
    return Position{segment * divider_, static_cast<double>(timestamp - base)};
  }
  // time(k) <= t  <=>  step * spacing <= (t - ref) * divider, solved exactly.
  const std::uint64_t spacing = refs_[segment + 1] - base;
  const u128 scaled = static_cast<u128>(timestamp - base) * divider_;
  const u128 step = scaled / spacing;
  const u128 remainder = scaled - step * spacing;
  return Position{segment * divider_ + static_cast<std::uint64_t>(step),
                  static_cast<double>(remainder) / divider_};
}

std::vector<double> PulseTrain::times() const {
  std::vector<double> out(size());
  for (std::uint64_t k = 0; k < out.size(); ++k) out[k] = time(k);
  return out;
}

PulseTrain reconstruct_pulse_train(const TagStream& stream) {
  std::vector<std::uint64_t> refs;
  for (const auto& tag : stream.tags) {
    if (tag.channel == Channel::kRef) refs.push_back(tag.timestamp);
  }
  if (refs.size() < 2) {
    throw Error(ErrorKind::kInsufficientReference,
                "need at least 2 REF tags to reconstruct the pulse train, found " +
                    std::to_string(refs.size()));
  }
  const std::uint32_t divider = stream.header.divider;
  std::vector<std::uint64_t> spacings(refs.size() - 1);
  for (std::size_t i = 0; i + 1 < refs.size(); ++i) spacings[i] = refs[i + 1] - refs[i];
  const double typical = median(spacings);
  const double tolerance = 0.5 * divider;
  std::vector<std::size_t> glitches;
  for (std::size_t i = 0; i < spacings.size(); ++i) {
    if (std::abs(static_cast<double>(spacings[i]) - typical) > tolerance) glitches.push_back(i);
  }
  if (!glitches.empty()) {
    std::string list;
    for (std::size_t i = 0; i < glitches.size() && i < 10; ++i) {
      list += (i ? "," : "") + std::to_string(glitches[i]);
    }
    if (glitches.size() > 10) list += ",...";
    throw ClockGlitchError("reference spacing deviates from median " + std::to_string(typical) +
                               " at interval(s) " + list,
                           std::move(glitches));
  }
  return PulseTrain(std::move(refs), divider, typical / divider);
}

GateResult virtual_gate(const TagStream& stream, const PulseTrain& pulses, double window_ps) {
  const double window = window_ps / stream.header.timebin_ps;
  if (!(window > 0.0) || !(window < pulses.period())) {
    throw Error(ErrorKind::kConfiguration,
                "gate window " + std::to_string(window_ps) +
                    " ps must be positive and shorter than the pulse period");
  }
  const std::uint64_t last_pulse = pulses.size() - 1;
  GateResult result;
  for (const auto& tag : stream.tags) {
    if (tag.channel == Channel::kRef) continue;
    const std::size_t ch = tag.channel == Channel::kD1 ? 0 : 1;
    auto& stats = result.stats[ch];
    ++stats.total;
    const auto position = pulses.locate(tag.timestamp);
    if (!position) {
      ++stats.rejected_outside_train;
      continue;
    }
    if (position->offset >= window) {
      if (position->pulse == last_pulse) {
        ++stats.rejected_outside_train;
      } else {
        ++stats.rejected_out_of_gate;
      }
      continue;
    }
    ++stats.assigned;
    auto& clicks = result.clicks[ch];
    if (!clicks.empty() && clicks.back() == position->pulse) {
      ++stats.duplicates;
    } else {
      clicks.push_back(position->pulse);
    }
  }
  return result;
}

DeadTimeResult apply_dead_time(std::span<const std::uint64_t> clicks, std::uint32_t dead_pulses) {
  DeadTimeResult result;
  result.accepted.reserve(clicks.size());
  bool have_last = false;
  std::uint64_t last = 0;
  for (std::uint64_t pulse : clicks) {
    if (have_last && pulse - last <= dead_pulses) {
      result.suppressed.push_back(pulse);
      continue;
    }
    result.accepted.push_back(pulse);
    last = pulse;
    have_last = true;
  }
  return result;
}

const char* to_string(PulseState state) {
  switch (state) {
    case PulseState::kNoClick: return "no-click";
    case PulseState::kClick: return "click";
    case PulseState::kDead: return "dead";
  }
  return "?";
}

PulseEventTable::PulseEventTable(std::uint64_t rows, std::uint32_t dead_pulses,
                                 std::vector<EventRow> sparse)
    : rows_(rows), dead_pulses_(dead_pulses), sparse_(std::move(sparse)) {}

EventRow PulseEventTable::row(std::uint64_t pulse) const {
  if (pulse >= rows_) {
    throw Error(ErrorKind::kOutOfDomain, "row " + std::to_string(pulse) + " beyond table");
  }
  const auto it = std::lower_bound(sparse_.begin(), sparse_.end(), pulse,
                                   [](const EventRow& r, std::uint64_t p) { return r.pulse < p; });
  if (it != sparse_.end() && it->pulse == pulse) return *it;
  return EventRow{pulse, PulseState::kNoClick, PulseState::kNoClick};
}

std::vector<EventRow> PulseEventTable::dense_rows() const {
  std::vector<EventRow> out;
  out.reserve(rows_);
  auto it = sparse_.begin();
  for (std::uint64_t k = 0; k < rows_; ++k) {
    if (it != sparse_.end() && it->pulse == k) {
      out.push_back(*it++);
    } else {
      out.push_back(EventRow{k, PulseState::kNoClick, PulseState::kNoClick});
    }
  }
  return out;
}

void PulseEventTable::validate() const {
  for (std::size_t i = 0; i < sparse_.size(); ++i) {
    const auto& r = sparse_[i];
    if (r.pulse >= rows_) throw Error(ErrorKind::kIntegrity, "event row beyond table size");
    if (i > 0 && r.pulse <= sparse_[i - 1].pulse) {
      throw Error(ErrorKind::kIntegrity, "event rows not strictly increasing");
    }
  }
  // Each click is followed by exactly dead_pulses dead rows (truncated at the end),
  // and dead rows occur nowhere else.
  for (int ch = 0; ch < 2; ++ch) {
    std::uint64_t dead_until = 0;  // exclusive upper bound of the active dead window
    bool in_window = false;
    std::uint64_t expected = 0;    // next pulse expected to be dead
    for (const auto& r : sparse_) {
      const PulseState s = ch == 0 ? r.d1 : r.d2;
      if (in_window && r.pulse >= dead_until) {
        if (expected != dead_until) {
          throw Error(ErrorKind::kIntegrity, "missing dead rows before pulse " + std::to_string(r.pulse));
        }
        in_window = false;
      }
      if (in_window) {
        if (r.pulse != expected || s != PulseState::kDead) {
          throw Error(ErrorKind::kIntegrity, "dead window broken at pulse " + std::to_string(r.pulse));
        }
        ++expected;
        continue;
      }
      if (s == PulseState::kDead) {
        throw Error(ErrorKind::kIntegrity, "dead row without preceding click at pulse " +
                                               std::to_string(r.pulse));
      }
      if (s == PulseState::kClick && dead_pulses_ > 0) {
        in_window = true;
        expected = r.pulse + 1;
        dead_until = std::min<std::uint64_t>(r.pulse + 1 + dead_pulses_, rows_);
      }
    }
    if (in_window && expected != dead_until) {
      throw Error(ErrorKind::kIntegrity, "dead window truncated before table end");
    }
  }
}

PulseEventTable build_event_table(const std::array<std::vector<std::uint64_t>, 2>& clicks,
                                  std::uint64_t rows, std::uint32_t dead_pulses) {
  struct Mark {
    std::uint64_t pulse;
    int channel;
    PulseState state;
  };
  std::vector<Mark> marks;
  for (int ch = 0; ch < 2; ++ch) {
    std::vector<std::uint64_t> in_range;
    in_range.reserve(clicks[ch].size());
    for (std::uint64_t p : clicks[ch]) {
      if (p < rows) in_range.push_back(p);
    }
    std::sort(in_range.begin(), in_range.end());
    in_range.erase(std::unique(in_range.begin(), in_range.end()), in_range.end());
    const auto filtered = apply_dead_time(in_range, dead_pulses);
    for (std::uint64_t p : filtered.accepted) {
      marks.push_back({p, ch, PulseState::kClick});
      const std::uint64_t end = std::min<std::uint64_t>(p + dead_pulses, rows - 1);
      for (std::uint64_t q = p + 1; q <= end; ++q) marks.push_back({q, ch, PulseState::kDead});
    }
  }
  std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) {
    return a.pulse != b.pulse ? a.pulse < b.pulse : a.channel < b.channel;
  });
  std::vector<EventRow> sparse;
  for (const auto& m : marks) {
    if (sparse.empty() || sparse.back().pulse != m.pulse) sparse.push_back(EventRow{m.pulse});
    (m.channel == 0 ? sparse.back().d1 : sparse.back().d2) = m.state;
  }
  return PulseEventTable(rows, dead_pulses, std::move(sparse));
}

PulseEventTable build_event_table(const GateResult& gated, const PulseTrain& pulses,
                                  std::uint32_t dead_pulses) {
  return build_event_table(gated.clicks, pulses.size(), dead_pulses);
}

void write_event_table_csv(const PulseEventTable& table, std::ostream& out, bool all_rows) {
  out << "# zeroherald event-table\n";
  out << "# rows: " << table.rows() << '\n';
  out << "# dead_pulses: " << table.dead_pulses() << '\n';
  out << "pulse_index,d1,d2\n";
  auto emit = [&out](const EventRow& r) {
    out << r.pulse << ',' << to_string(r.d1) << ',' << to_string(r.d2) << '\n';
  };
  if (all_rows) {
    for (const auto& r : table.dense_rows()) emit(r);
  } else {
    for (const auto& r : table.sparse_rows()) emit(r);
  }
}

PulseEventTable read_event_table_csv(std::istream& in) {
  std::optional<std::uint64_t> rows;
  std::optional<std::uint32_t> dead;
  std::vector<EventRow> sparse;
  std::optional<std::uint64_t> last_pulse;
  bool columns_seen = false;
  std::string raw;
  std::uint64_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kRows = "# rows: ";
      constexpr std::string_view kDead = "# dead_pulses: ";
      if (line.starts_with(kRows)) rows = parse_u64(line.substr(kRows.size()), line_no);
      if (line.starts_with(kDead)) {
        dead = static_cast<std::uint32_t>(parse_u64(line.substr(kDead.size()), line_no));
      }
      continue;
    }
    if (!columns_seen) {
      if (line != "pulse_index,d1,d2") throw FormatError("expected 'pulse_index,d1,d2'", line_no);
      if (!rows || !dead) throw FormatError("missing '# rows' or '# dead_pulses' header", line_no);
      columns_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
      throw FormatError("expected three columns", line_no);
    }
    EventRow r;
    r.pulse = parse_u64(line.substr(0, c1), line_no);
    r.d1 = parse_state(line.substr(c1 + 1, c2 - c1 - 1), line_no);
    r.d2 = parse_state(line.substr(c2 + 1), line_no);
    if (last_pulse && r.pulse <= *last_pulse) {
      throw Error(ErrorKind::kIntegrity,
                  "pulse_index not strictly increasing at line " + std::to_string(line_no));
    }
    last_pulse = r.pulse;
    if (r.d1 != PulseState::kNoClick || r.d2 != PulseState::kNoClick) sparse.push_back(r);
  }
  if (!columns_seen) throw FormatError("no column line", line_no);
  PulseEventTable table(*rows, *dead, std::move(sparse));
  table.validate();
  return table;
}

PipelineResult run_pipeline(const TagStream& stream, const PipelineOptions& options) {
  auto pulses = reconstruct_pulse_train(stream);
  auto gated = virtual_gate(stream, pulses, options.gate_window_ps);
  auto table = build_event_table(gated, pulses, options.dead_pulses);
  return PipelineResult{std::move(pulses), std::move(gated), std::move(table)};
}

}  // namespace zeroherald
