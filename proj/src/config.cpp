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

#include "zeroherald/config.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string_view>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

constexpr std::array<std::string_view, 30> kKeys{
    "gamma",          "kappa1",         "kappa2",
    "eta1",           "dark_prob1",     "out_of_gate_dark_prob1",
    "dead_pulses1",   "afterpulse_prob1", "eta2",
    "dark_prob2",     "out_of_gate_dark_prob2", "dead_pulses2",
    "afterpulse_prob2", "profile",      "nu_max",
    "tau_ps",         "profile_table",  "delta_t_ps",
    "rep_period_ps",  "timebin_ps",     "divider",
    "n_pulses",       "seed",           "jitter_sigma_ps",
    "signal_offset_ps", "gate_window_ps", "shard_pulses",
    "threads",        "record_truth",   "delays_ps",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void invalid(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::kValidation,
              "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
  const std::string_view text = trim(value);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) invalid(key, value, "a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  const std::string_view text = trim(value);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    // Accept integral values written in floating-point notation, e.g. 1e8.
    const double d = to_double(key, value);
    if (!(d >= 0.0 && d < 1.8e19) || d != static_cast<double>(static_cast<std::uint64_t>(d))) {
      invalid(key, value, "a non-negative integer");
    }
    return static_cast<std::uint64_t>(d);
  }
  return out;
}

std::uint32_t to_u32(const std::string& key, const std::string& value) {
  const std::uint64_t v = to_u64(key, value);
  if (v > 0xFFFFFFFFull) invalid(key, value, "a 32-bit unsigned integer");
  return static_cast<std::uint32_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string_view text = trim(value);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  invalid(key, value, "true or false");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    if (!trim(item).empty()) items.emplace_back(trim(item));
  }
  return items;
}

}  // namespace

bool is_known_key(std::string_view key) {
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Settings read_settings(std::istream& in) {
  Settings settings;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kValidation,
                  "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!is_known_key(key)) {
      throw Error(ErrorKind::kValidation, "config line " + std::to_string(line_no) +
                                              ": unknown key '" + std::string(key) + "'");
    }
    const std::string name(key);
    if (settings.contains(name)) {
      throw Error(ErrorKind::kValidation, "config line " + std::to_string(line_no) +
                                              ": repeated key '" + name + "'");
    }
    settings.emplace(name, std::string(value));
  }
  return settings;
}

Settings read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kValidation, "cannot open config file " + path);
  return read_settings(in);
}

Settings merge_settings(Settings base, const Settings& overrides) {
  for (const auto& [key, value] : overrides) {
    if (!is_known_key(key)) throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
    base[key] = value;
  }
  return base;
}

DetectorParams default_detector_noise() {
  DetectorParams d;
  d.dark_prob = 6e-7;
  d.out_of_gate_dark_prob = 2.4e-6;
  d.dead_pulses = 3;
  d.afterpulse_prob = 0.005;
  return d;
}

RunConfig build_config(const Settings& settings) {
  RunConfig config;
  SimConfig& sim = config.sim;
  sim.det1 = default_detector_noise();
  sim.det2 = default_detector_noise();
  std::string shape = "gaussian";
  double nu_max = 1.0;
  double tau = 0.1;
  std::vector<std::pair<double, double>> table;

  for (const auto& [key, value] : settings) {
    if (key == "gamma") sim.source.gamma = to_double(key, value);
    else if (key == "kappa1") sim.source.kappa1 = to_double(key, value);
    else if (key == "kappa2") sim.source.kappa2 = to_double(key, value);
    else if (key == "eta1") sim.det1.eta = to_double(key, value);
    else if (key == "eta2") sim.det2.eta = to_double(key, value);
    else if (key == "dark_prob1") sim.det1.dark_prob = to_double(key, value);
    else if (key == "dark_prob2") sim.det2.dark_prob = to_double(key, value);
    else if (key == "out_of_gate_dark_prob1") sim.det1.out_of_gate_dark_prob = to_double(key, value);
    else if (key == "out_of_gate_dark_prob2") sim.det2.out_of_gate_dark_prob = to_double(key, value);
    else if (key == "dead_pulses1") sim.det1.dead_pulses = to_u32(key, value);
    else if (key == "dead_pulses2") sim.det2.dead_pulses = to_u32(key, value);
    else if (key == "afterpulse_prob1") sim.det1.afterpulse_prob = to_double(key, value);
    else if (key == "afterpulse_prob2") sim.det2.afterpulse_prob = to_double(key, value);
    else if (key == "profile") shape = std::string(trim(value));
    else if (key == "nu_max") nu_max = to_double(key, value);
    else if (key == "tau_ps") tau = to_double(key, value);
    else if (key == "profile_table") {
      for (const auto& item : split_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) invalid(key, value, "'delay:nu' pairs");
        table.emplace_back(to_double(key, item.substr(0, colon)),
                           to_double(key, item.substr(colon + 1)));
      }
    }
    else if (key == "delta_t_ps") sim.delta_t_ps = to_double(key, value);
    else if (key == "rep_period_ps") sim.rep_period_ps = to_u32(key, value);
    else if (key == "timebin_ps") sim.timebin_ps = to_u32(key, value);
    else if (key == "divider") sim.divider = to_u32(key, value);
    else if (key == "n_pulses") sim.n_pulses = to_u64(key, value);
    else if (key == "seed") sim.seed = to_u64(key, value);
    else if (key == "jitter_sigma_ps") sim.jitter_sigma_ps = to_double(key, value);
    else if (key == "signal_offset_ps") sim.signal_offset_ps = to_double(key, value);
    else if (key == "gate_window_ps") sim.gate_window_ps = to_double(key, value);
    else if (key == "shard_pulses") sim.shard_pulses = to_u64(key, value);
    else if (key == "threads") sim.threads = to_u32(key, value);
    else if (key == "record_truth") sim.record_truth = to_bool(key, value);
    else if (key == "delays_ps") {
      config.delays_ps.clear();
      for (const auto& item : split_list(value)) config.delays_ps.push_back(to_double(key, item));
    }
    else throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
  }

  if (shape == "gaussian") {
    sim.profile = IndistinguishabilityProfile::gaussian(nu_max, tau);
  } else if (shape == "triangular") {
    sim.profile = IndistinguishabilityProfile::triangular(nu_max, tau);
  } else if (shape == "tabulated") {
    sim.profile = IndistinguishabilityProfile::tabulated(std::move(table));
  } else {
    invalid("profile", shape, "gaussian, triangular or tabulated");
  }
  sim.validate();
  return config;
}

Settings to_settings(const RunConfig& config) {
  const SimConfig& sim = config.sim;
  Settings s;
  s["gamma"] = format_number(sim.source.gamma);
  s["kappa1"] = format_number(sim.source.kappa1);
  s["kappa2"] = format_number(sim.source.kappa2);
  const std::array<const DetectorParams*, 2> dets{&sim.det1, &sim.det2};
  for (int i = 0; i < 2; ++i) {
    const std::string n = std::to_string(i + 1);
    s["eta" + n] = format_number(dets[i]->eta);
    s["dark_prob" + n] = format_number(dets[i]->dark_prob);
    s["out_of_gate_dark_prob" + n] = format_number(dets[i]->out_of_gate_dark_prob);
    s["dead_pulses" + n] = std::to_string(dets[i]->dead_pulses);
    s["afterpulse_prob" + n] = format_number(dets[i]->afterpulse_prob);
  }
  s["profile"] = to_string(sim.profile.shape());
  if (sim.profile.shape() == IndistinguishabilityProfile::Shape::kTabulated) {
    std::string table;
    for (const auto& [delay, nu] : sim.profile.table()) {
      if (!table.empty()) table += ", ";
      table += format_number(delay) + ":" + format_number(nu);
    }
    s["profile_table"] = table;
  } else {
    s["nu_max"] = format_number(sim.profile.nu_max());
    s["tau_ps"] = format_number(sim.profile.tau());
  }
  s["delta_t_ps"] = format_number(sim.delta_t_ps);
  s["rep_period_ps"] = std::to_string(sim.rep_period_ps);
  s["timebin_ps"] = std::to_string(sim.timebin_ps);
  s["divider"] = std::to_string(sim.divider);
  s["n_pulses"] = std::to_string(sim.n_pulses);
  s["seed"] = std::to_string(sim.seed);
  s["jitter_sigma_ps"] = format_number(sim.jitter_sigma_ps);
  s["signal_offset_ps"] = format_number(sim.signal_offset_ps);
  s["gate_window_ps"] = format_number(sim.gate_window_ps);
  s["shard_pulses"] = std::to_string(sim.shard_pulses);
  s["threads"] = std::to_string(sim.threads);
  s["record_truth"] = sim.record_truth ? "true" : "false";
  if (!config.delays_ps.empty()) {
    std::string delays;
    for (double d : config.delays_ps) {
      if (!delays.empty()) delays += ", ";
      delays += format_number(d);
    }
    s["delays_ps"] = delays;
  }
  return s;
}

std::string format_settings(const Settings& settings) {
  std::string out;
  for (const auto& [key, value] : settings) out += key + " = " + value + "\n";
  return out;
}

}  // namespace zeroherald
