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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zeroherald {

enum class ErrorKind {
  kValidation,
  kOutOfDomain,
  kDegenerateInput,
  kNoSolution,
  kFormat,
  kIntegrity,
  kCapacity,
  kInsufficientReference,
  kClockGlitch,
  kConfiguration,
  kEmptyInput,
  kUndefinedRate,
  kFit,
  kWrongShape,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed tag or table bytes. `offset` is the byte offset where parsing failed
/// (or the 1-based line number for text formats).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::kFormat, what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class ClockGlitchError : public Error {
 public:
  ClockGlitchError(const std::string& what, std::vector<std::size_t> indices)
      : Error(ErrorKind::kClockGlitch, what), indices_(std::move(indices)) {}
  /// Indices i of reference intervals [ref_i, ref_{i+1}] that deviate from the median.
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

class FitError : public Error {
 public:
  FitError(const std::string& what, double residual_norm)
      : Error(ErrorKind::kFit, what + " (residual norm " + std::to_string(residual_norm) + ")"),
        residual_norm_(residual_norm) {}
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

}  // namespace zeroherald
