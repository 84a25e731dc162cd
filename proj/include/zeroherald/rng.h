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
#include <limits>
#include <random>

namespace zeroherald {

/// splitmix64 finalizer; used to derive independent seeds for shards and scan points.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for sub-stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source. The engine sequence is fixed by the C++ standard
/// and every variate is derived from raw engine output here rather than through
/// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64, sub-streams seeded by splitmix64";

  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (one variate per call).
  double normal();
  /// Number of failures before the first success of a Bernoulli(p) sequence.
  /// Saturates at the maximum value, which is also returned for p <= 0.
  std::uint64_t geometric(double p);

 private:
  std::mt19937_64 engine_;
};

}  // namespace zeroherald
