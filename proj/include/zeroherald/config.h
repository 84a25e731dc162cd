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

// Flat "key = value" run configuration. '#' starts a comment; blank lines are
// ignored; unknown or repeated keys are rejected. Recognized keys:
//
//   gamma kappa1 kappa2
//   eta1 dark_prob1 out_of_gate_dark_prob1 dead_pulses1 afterpulse_prob1
//   eta2 dark_prob2 out_of_gate_dark_prob2 dead_pulses2 afterpulse_prob2
//   profile (gaussian | triangular | tabulated) nu_max tau_ps
//   profile_table   "delay:nu, delay:nu, ..." (tabulated profile only)
//   delta_t_ps rep_period_ps timebin_ps divider n_pulses seed
//   jitter_sigma_ps signal_offset_ps gate_window_ps shard_pulses threads record_truth
//   delays_ps       "d0, d1, ..." delay grid for scans
//
// Omitted keys keep the SimConfig defaults, except that detectors start from a
// silicon-SPCM-like noise model (default_detector_noise): 6e-7 dark counts per
// 2 ns gate (60 per second after gating at 100 MHz), four times that outside
// the gate, a 3-pulse dead time and 0.5% afterpulsing. The noise numbers are
// engineering guesses, not measurements; override them for real hardware.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "zeroherald/sim.h"

namespace zeroherald {

using Settings = std::map<std::string, std::string, std::less<>>;

/// Detector noise applied by build_config before the settings are read.
DetectorParams default_detector_noise();

struct RunConfig {
  SimConfig sim;
  std::vector<double> delays_ps;
};

/// Parses key = value lines. Throws kValidation naming the line on any problem.
Settings read_settings(std::istream& in);
Settings read_settings_file(const std::string& path);

/// Keys in `overrides` replace those in `base`. Unknown keys are rejected.
Settings merge_settings(Settings base, const Settings& overrides);

RunConfig build_config(const Settings& settings);

/// Every key with its effective value; build_config(to_settings(c)) reproduces c.
Settings to_settings(const RunConfig& config);
std::string format_settings(const Settings& settings);

bool is_known_key(std::string_view key);

/// Shortest-safe decimal rendering with 17 significant digits.
std::string format_number(double value);

}  // namespace zeroherald
