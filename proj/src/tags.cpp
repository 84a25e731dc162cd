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

#include "zeroherald/tags.h"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

constexpr std::array<char, 4> kMagic{'Z', 'H', 'T', '1'};
constexpr std::string_view kCsvBanner = "# ZHT1 csv";

template <typename T>
void put_le(std::string& buf, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return static_cast<T>(value);
}

Channel decode_channel(unsigned code, std::uint64_t offset) {
  if (code > 2) {
    throw FormatError("unknown channel code " + std::to_string(code), offset);
  }
  return static_cast<Channel>(code);
}

void check_order(const std::vector<TimeTag>& tags, std::uint64_t offset) {
  if (tags.size() >= 2 && tags[tags.size() - 1].timestamp < tags[tags.size() - 2].timestamp) {
    throw Error(ErrorKind::kIntegrity, "timestamp decreases at record " +
                                           std::to_string(tags.size() - 1) + " (offset " +
                                           std::to_string(offset) + ")");
  }
}

template <typename T>
T parse_number(std::string_view text, std::uint64_t line, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(std::string("malformed ") + what + " '" + std::string(text) + "'", line);
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

const char* to_string(Channel channel) {
  switch (channel) {
    case Channel::kRef: return "REF";
    case Channel::kD1: return "D1";
    case Channel::kD2: return "D2";
  }
  return "?";
}

void TagStream::validate() const {
  if (header.timebin_ps == 0) throw Error(ErrorKind::kValidation, "timebin must be positive");
  if (header.rep_period_ps == 0) throw Error(ErrorKind::kValidation, "rep period must be positive");
  if (header.divider == 0) throw Error(ErrorKind::kValidation, "divider must be positive");
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags[i].timestamp < tags[i - 1].timestamp) {
      throw Error(ErrorKind::kIntegrity, "timestamp decreases at record " + std::to_string(i));
    }
  }
  for (const auto& tag : tags) {
    if (static_cast<unsigned>(tag.channel) > 2) {
      throw Error(ErrorKind::kValidation, "tag on undeclared channel");
    }
  }
}

void write_tags(const TagStream& stream, std::ostream& out) {
  stream.validate();
  std::string buf;
  buf.reserve(kTagHeaderBytes + kTagRecordBytes * stream.tags.size());
  buf.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(buf, stream.header.version);
  put_le<std::uint32_t>(buf, stream.header.timebin_ps);
  put_le<std::uint32_t>(buf, stream.header.rep_period_ps);
  put_le<std::uint32_t>(buf, stream.header.divider);
  for (const auto& tag : stream.tags) {
    put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(tag.channel));
    put_le<std::uint64_t>(buf, tag.timestamp);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorKind::kFormat, "failed writing tag stream");
}

TagStream read_tags(std::istream& in) {
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kTagHeaderBytes) {
    throw FormatError("truncated header: " + std::to_string(bytes.size()) + " bytes", bytes.size());
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("bad magic, expected ZHT1", 0);
  }
  TagStream stream;
  stream.header.version = get_le<std::uint16_t>(data + 4);
  if (stream.header.version != kTagFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(stream.header.version), 4);
  }
  stream.header.timebin_ps = get_le<std::uint32_t>(data + 6);
  stream.header.rep_period_ps = get_le<std::uint32_t>(data + 10);
  stream.header.divider = get_le<std::uint32_t>(data + 14);
  if (stream.header.timebin_ps == 0) throw FormatError("zero timebin", 6);
  if (stream.header.rep_period_ps == 0) throw FormatError("zero rep period", 10);
  if (stream.header.divider == 0) throw FormatError("zero divider", 14);

  const std::size_t body = bytes.size() - kTagHeaderBytes;
  if (body % kTagRecordBytes != 0) {
    throw FormatError("truncated record",
                      kTagHeaderBytes + (body / kTagRecordBytes) * kTagRecordBytes);
  }
  stream.tags.reserve(body / kTagRecordBytes);
  for (std::size_t offset = kTagHeaderBytes; offset < bytes.size(); offset += kTagRecordBytes) {
    TimeTag tag;
    tag.channel = decode_channel(data[offset], offset);
    tag.timestamp = get_le<std::uint64_t>(data + offset + 1);
    stream.tags.push_back(tag);
    check_order(stream.tags, offset);
  }
  return stream;
}

void write_tags_csv(const TagStream& stream, std::ostream& out) {
  stream.validate();
  out << kCsvBanner << '\n';
  out << "# version: " << stream.header.version << '\n';
  out << "# timebin_ps: " << stream.header.timebin_ps << '\n';
  out << "# rep_period_ps: " << stream.header.rep_period_ps << '\n';
  out << "# divider: " << stream.header.divider << '\n';
  out << "# channels: 0=REF,1=D1,2=D2\n";
  if (!stream.header.provenance.empty()) {
    out << "# provenance: " << stream.header.provenance << '\n';
  }
  out << "channel,timestamp\n";
  std::string line;
  for (const auto& tag : stream.tags) {
    line.clear();
    line += std::to_string(static_cast<unsigned>(tag.channel));
    line += ',';
    line += std::to_string(tag.timestamp);
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorKind::kFormat, "failed writing tag CSV");
}

TagStream read_tags_csv(std::istream& in) {
  std::map<std::string, std::string, std::less<>> keys;
  TagStream stream;
  std::string raw;
  std::uint64_t line_no = 0;
  bool columns_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (columns_seen) throw FormatError("header line after records", line_no);
      if (line_no == 1) {
        if (line != kCsvBanner) throw FormatError("missing '# ZHT1 csv' banner", line_no);
        continue;
      }
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      keys[std::string(trim(line.substr(1, colon - 1)))] = std::string(trim(line.substr(colon + 1)));
      continue;
    }
    if (line_no == 1) throw FormatError("missing '# ZHT1 csv' banner", line_no);
    if (!columns_seen) {
      if (line != "channel,timestamp") throw FormatError("expected 'channel,timestamp'", line_no);
      columns_seen = true;
      for (const char* required : {"version", "timebin_ps", "rep_period_ps", "divider"}) {
        if (!keys.contains(required)) {
          throw FormatError(std::string("missing header key ") + required, line_no);
        }
      }
      stream.header.version = parse_number<std::uint16_t>(keys["version"], line_no, "version");
      if (stream.header.version != kTagFormatVersion) {
        throw FormatError("unsupported format version " + keys["version"], line_no);
      }
      stream.header.timebin_ps = parse_number<std::uint32_t>(keys["timebin_ps"], line_no, "timebin");
      stream.header.rep_period_ps =
          parse_number<std::uint32_t>(keys["rep_period_ps"], line_no, "rep period");
      stream.header.divider = parse_number<std::uint32_t>(keys["divider"], line_no, "divider");
      if (auto it = keys.find("provenance"); it != keys.end()) stream.header.provenance = it->second;
      if (stream.header.timebin_ps == 0 || stream.header.rep_period_ps == 0 ||
          stream.header.divider == 0) {
        throw FormatError("header values must be positive", line_no);
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw FormatError("expected 'channel,timestamp'", line_no);
    TimeTag tag;
    tag.channel = decode_channel(parse_number<unsigned>(line.substr(0, comma), line_no, "channel"),
                                 line_no);
    tag.timestamp = parse_number<std::uint64_t>(line.substr(comma + 1), line_no, "timestamp");
    stream.tags.push_back(tag);
    check_order(stream.tags, line_no);
  }
  if (!columns_seen) throw FormatError("no column line", line_no);
  return stream;
}

void write_tags_file(const std::filesystem::path& path, const TagStream& stream, TagFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kFormat, "cannot open " + path.string() + " for writing");
  if (format == TagFormat::kBinary) {
    write_tags(stream, out);
  } else {
    write_tags_csv(stream, out);
  }
}

TagStream read_tags_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kFormat, "cannot open " + path.string());
  std::array<char, 4> lead{};
  in.read(lead.data(), lead.size());
  in.clear();
  in.seekg(0);
  if (lead == kMagic) return read_tags(in);
  if (lead[0] == '#') return read_tags_csv(in);
  return read_tags(in);  // reports the bad magic
}

}  // namespace zeroherald
