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

// Time-tag streams and their on-disk encodings.
//
// Binary "ZHT1" layout, all integers little-endian:
//   offset 0   char[4]  magic "ZHT1"
//   offset 4   u16      format version (1)
//   offset 6   u32      timebin in picoseconds
//   offset 10  u32      pulse repetition period in picoseconds
//   offset 14  u32      reference divider
//   offset 18  records of { u8 channel, u64 timestamp } (9 bytes each)
// Channel codes: 0 = REF, 1 = D1, 2 = D2.
//
// CSV layout: '#'-prefixed header lines "# key: value" for the same header
// fields plus an optional provenance line, then a "channel,timestamp" column
// line and one record per line with the numeric channel code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace zeroherald {

enum class Channel : std::uint8_t { kRef = 0, kD1 = 1, kD2 = 2 };

const char* to_string(Channel channel);

struct TimeTag {
  Channel channel = Channel::kRef;
  /// Count of timebins since the start of acquisition.
  std::uint64_t timestamp = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

inline constexpr std::uint16_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagHeaderBytes = 18;
inline constexpr std::size_t kTagRecordBytes = 9;

struct TagHeader {
  std::uint16_t version = kTagFormatVersion;
  std::uint32_t timebin_ps = 81;
  std::uint32_t rep_period_ps = 10000;
  std::uint32_t divider = 512;
  /// Free-form provenance (RNG algorithm, seed). Carried by CSV only and
  /// ignored by equality, since the binary header has no room for it.
  std::string provenance;

  friend bool operator==(const TagHeader& a, const TagHeader& b) {
    return a.version == b.version && a.timebin_ps == b.timebin_ps &&
           a.rep_period_ps == b.rep_period_ps && a.divider == b.divider;
  }
};

struct TagStream {
  TagHeader header;
  std::vector<TimeTag> tags;

  /// Checks header sanity and non-decreasing timestamps.
  void validate() const;
  friend bool operator==(const TagStream&, const TagStream&) = default;
};

enum class TagFormat { kBinary, kCsv };

void write_tags(const TagStream& stream, std::ostream& out);
TagStream read_tags(std::istream& in);

void write_tags_csv(const TagStream& stream, std::ostream& out);
TagStream read_tags_csv(std::istream& in);

void write_tags_file(const std::filesystem::path& path, const TagStream& stream,
                     TagFormat format = TagFormat::kBinary);
/// Reads either encoding; the format is detected from the leading bytes.
TagStream read_tags_file(const std::filesystem::path& path);

}  // namespace zeroherald
