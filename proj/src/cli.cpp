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


#include "zeroherald/cli.h"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <variant>

#include "zeroherald/analysis.h"
#include "zeroherald/config.h"
#include "zeroherald/model.h"
#include "zeroherald/pipeline.h"
#include "zeroherald/rng.h"
#include "zeroherald/sim.h"
#include "zeroherald/tags.h"

#ifndef ZEROHERALD_VERSION
#define ZEROHERALD_VERSION "unknown"
#endif

namespace zeroherald::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- tabular output ---------------------------------------------------------

using Cell = std::variant<double, std::uint64_t, std::string, bool>;

class Record {
 public:
  Record& num(std::string key, double v) { return put(std::move(key), v); }
  Record& count(std::string key, std::uint64_t v) { return put(std::move(key), v); }
  Record& text(std::string key, std::string v) { return put(std::move(key), std::move(v)); }
  Record& flag(std::string key, bool v) { return put(std::move(key), v); }
  const std::vector<std::pair<std::string, Cell>>& cells() const { return cells_; }

 private:
  Record& put(std::string key, Cell v) {
    cells_.emplace_back(std::move(key), std::move(v));
    return *this;
  }
  std::vector<std::pair<std::string, Cell>> cells_;
};

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string csv_cell(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  if (const auto* u = std::get_if<std::uint64_t>(&cell)) return std::to_string(*u);
  if (const auto* s = std::get_if<std::string>(&cell)) return csv_quote(*s);
  return std::get<bool>(cell) ? "true" : "false";
}

std::string json_cell(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    return std::isfinite(*d) ? format_number(*d) : "null";
  }
  if (const auto* u = std::get_if<std::uint64_t>(&cell)) return std::to_string(*u);
  if (const auto* s = std::get_if<std::string>(&cell)) return json(*s).dump();
  return std::get<bool>(cell) ? "true" : "false";
}

void write_csv(std::ostream& out, const std::vector<Record>& records) {
  if (records.empty()) return;
  const auto& head = records.front().cells();
  for (std::size_t i = 0; i < head.size(); ++i) out << (i ? "," : "") << head[i].first;
  out << '\n';
  for (const auto& r : records) {
    const auto& cells = r.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_cell(cells[i].second);
    out << '\n';
  }
}

void write_jsonl(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& r : records) {
    out << '{';
    const auto& cells = r.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "," : "") << json(cells[i].first).dump() << ':' << json_cell(cells[i].second);
    }
    out << "}\n";
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

// ---- files and manifests ----------------------------------------------------

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kValidation, "cannot open " + path.string() + " for writing");
  return out;
}

json file_entry(const fs::path& path) {
  return json{{"path", path.generic_string()},
              {"name", path.filename().string()},
              {"bytes", static_cast<std::uint64_t>(fs::file_size(path))},
              {"sha256", sha256_file(path)}};
}

json base_manifest(const std::string& command, const std::vector<std::string>& args) {
  return json{{"tool", "zeroherald"},
              {"version", ZEROHERALD_VERSION},
              {"command", command},
              {"argv", args},
              {"inputs", json::array()},
              {"outputs", json::array()}};
}

void write_manifest(const fs::path& path, const json& manifest) {
  auto out = open_out(path);
  out << manifest.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- settings ---------------------------------------------------------------

Settings parse_sets(const std::vector<std::string>& sets) {
  Settings out;
  for (const auto& item : sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + item + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return out;
}

// Config file first, then --set pairs, then dedicated flags.
Settings gather_settings(const std::string& config_path, const std::vector<std::string>& sets,
                         const Settings& flags) {
  Settings s = config_path.empty() ? Settings{} : read_settings_file(config_path);
  s = merge_settings(std::move(s), parse_sets(sets));
  return merge_settings(std::move(s), flags);
}

json settings_json(const Settings& settings) {
  json j = json::object();
  for (const auto& [k, v] : settings) j[k] = v;
  return j;
}

json truth_json(const TruthCounters& t) {
  return json{{"pulses", t.pulses},
              {"pairs", t.pairs},
              {"eventful_pulses", t.eventful_pulses},
              {"outcomes_00_10_01_11_20_02", t.outcomes},
              {"ref_tags", t.ref_tags},
              {"in_gate_clicks", t.in_gate_clicks},
              {"photon_clicks", t.photon_clicks},
              {"dark_clicks", t.dark_clicks},
              {"afterpulse_clicks", t.afterpulse_clicks},
              {"out_of_gate_clicks", t.out_of_gate_clicks}};
}

// ---- simulate ---------------------------------------------------------------

struct SimulatedFile {
  fs::path path;
  double delta_t_ps = 0.0;
  std::uint64_t seed = 0;
};

std::vector<SimulatedFile> simulate_files(const RunConfig& rc, const fs::path& target, bool scan,
                                          TagFormat format, json& manifest) {
  std::vector<SimulatedFile> files;
  std::vector<double> delays = scan ? rc.delays_ps : std::vector<double>{rc.sim.delta_t_ps};
  if (scan) fs::create_directories(target);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    SimConfig point = rc.sim;
    point.delta_t_ps = delays[i];
    if (scan) point.seed = derive_seed(rc.sim.seed, i);
    fs::path path = target;
    if (scan) {
      char name[32];
      std::snprintf(name, sizeof(name), "scan_%02zu.%s", i,
                    format == TagFormat::kBinary ? "zht" : "csv");
      path = target / name;
    }
    const SimResult result = run_simulation(point);
    write_tags_file(path, result.stream, format);
    json entry = file_entry(path);
    entry["delta_t_ps"] = delays[i];
    entry["seed"] = point.seed;
    entry["truth"] = truth_json(result.truth);
    manifest["outputs"].push_back(entry);
    files.push_back({path, delays[i], point.seed});
  }
  return files;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeOptions {
  double gate_ps = 2000.0;
  std::uint32_t dead_pulses = 5;
  bool free_shape = false;
  std::optional<double> nu_max;
  std::uint32_t lag_histogram = 0;
  bool export_events = false;
};

struct FileRates {
  fs::path path;
  RateSummary summary;
  std::uint32_t rep_period_ps = 10000;
};

Record rate_record(const std::string& file, const RateSummary& s, std::uint32_t rep_period_ps) {
  const double per_s = 1e12 / rep_period_ps;
  Record r;
  r.text("file", file).num("delta_t_ps", s.delta_t_ps);
  r.count("rows", s.counts.rows).count("live", s.counts.live);
  r.count("clicks1", s.counts.clicks1).count("clicks2", s.counts.clicks2);
  r.count("coincidences", s.counts.coincidences).count("noclick1", s.counts.noclick1);
  r.count("heralded_clicks", s.counts.heralded_clicks);
  r.num("singles1", s.singles1).num("singles1_err", s.singles1_err);
  r.num("singles2", s.singles2).num("singles2_err", s.singles2_err);
  r.num("coincidence", s.coincidence).num("coincidence_err", s.coincidence_err);
  r.num("heralded_rate", s.heralded_rate).num("heralded_rate_err", s.heralded_rate_err);
  r.num("heralding_success", s.heralding_success);
  r.num("heralding_success_err", s.heralding_success_err);
  r.count("rep_period_ps", rep_period_ps);
  r.num("singles1_per_s", s.singles1 * per_s).num("singles2_per_s", s.singles2 * per_s);
  r.num("coincidence_per_s", s.coincidence * per_s);
  r.num("heralded_rate_per_s", s.heralded_rate * per_s);
  return r;
}

Record fit_record(const std::string& curve, const char* mode, const FitResult* fit,
                  const Measurement* vis, const std::string& error) {
  const double nan = std::nan("");
  Record r;
  r.text("curve", curve).text("mode", mode);
  r.num("baseline", fit ? fit->baseline : nan).num("baseline_err", fit ? fit->baseline_err : nan);
  r.num("amplitude", fit ? fit->amplitude : nan).num("amplitude_err", fit ? fit->amplitude_err : nan);
  r.num("center_ps", fit ? fit->center : nan).num("center_err", fit ? fit->center_err : nan);
  r.num("width_ps", fit ? fit->width : nan).num("width_err", fit ? fit->width_err : nan);
  r.num("cwr", fit ? fit->cwr : nan).num("cwr_err", fit ? fit->cwr_err : nan);
  r.num("visibility", vis ? vis->value : nan).num("visibility_err", vis ? vis->error : nan);
  r.num("residual_norm", fit ? fit->residual_norm : nan);
  r.count("points", fit ? fit->points : 0).count("iterations", fit ? fit->iterations : 0);
  r.flag("flat", fit && fit->flat).text("error", error);
  return r;
}

std::vector<Record> comparison_records(const std::vector<FileRates>& rates, const RunConfig& model) {
  std::vector<Record> out;
  for (const auto& fr : rates) {
    const double nu = model.sim.profile.nu(fr.summary.delta_t_ps);
    for (const auto& c : compare_to_model(fr.summary, model.sim.source, model.sim.det1.eta,
                                          model.sim.det2.eta, nu)) {
      Record r;
      r.text("file", fr.path.generic_string()).num("delta_t_ps", fr.summary.delta_t_ps);
      r.num("nu", nu).text("rate", c.name).num("measured", c.measured);
      r.num("predicted", c.predicted).num("stderr", c.stderr_).num("z", c.z);
      r.flag("deterministic_mismatch", c.deterministic_mismatch);
      out.push_back(std::move(r));
    }
  }
  return out;
}

void emit(const fs::path& dir, const std::string& stem, const std::vector<Record>& records,
          json& manifest) {
  for (const char* ext : {".csv", ".jsonl"}) {
    const fs::path path = dir / (stem + ext);
    {
      auto out = open_out(path);
      if (std::string(ext) == ".csv") {
        write_csv(out, records);
      } else {
        write_jsonl(out, records);
      }
    }
    manifest["outputs"].push_back(file_entry(path));
  }
}

// Rethrows library errors with the offending file name in front.
[[noreturn]] void rethrow_for(const fs::path& path, const Error& e) {
  throw Error(e.kind(), path.string() + ": " + e.what());
}

// Looks for delta_t_ps next to a tag file: <file>.manifest.json or manifest.json.
std::optional<double> manifest_delay(const fs::path& file) {
  const fs::path candidates[] = {fs::path(file.string() + ".manifest.json"),
                                 file.parent_path() / "manifest.json"};
  for (const auto& m : candidates) {
    std::ifstream in(m);
    if (!in) continue;
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("outputs")) continue;
    for (const auto& o : j["outputs"]) {
      if (o.value("name", "") == file.filename().string() && o.contains("delta_t_ps")) {
        return o["delta_t_ps"].get<double>();
      }
    }
  }
  return std::nullopt;
}

std::vector<double> resolve_delays(const std::vector<fs::path>& files,
                                   const std::vector<double>& given) {
  if (!given.empty()) {
    if (given.size() != files.size()) {
      throw UsageError("--delays has " + std::to_string(given.size()) + " values for " +
                       std::to_string(files.size()) + " files");
    }
    return given;
  }
  std::vector<double> delays;
  for (const auto& f : files) {
    if (auto d = manifest_delay(f)) {
      delays.push_back(*d);
    } else if (files.size() == 1) {
      delays.push_back(0.0);
    } else {
      throw UsageError("no delay recorded for " + f.string() + "; pass --delays");
    }
  }
  return delays;
}

// Returns kExitNumerical if any fit failed, kExitOk otherwise.
int analyze_files(const std::vector<fs::path>& files, const std::vector<double>& delays,
                  const AnalyzeOptions& opt, const fs::path& out_dir,
                  const std::optional<RunConfig>& model, json& manifest, std::ostream& err) {
  fs::create_directories(out_dir);
  std::vector<FileRates> rates;
  std::vector<Record> rate_rows;
  std::vector<Record> lag_rows;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& path = files[i];
    try {
      const TagStream stream = read_tags_file(path);
      manifest["inputs"].push_back(file_entry(path));
      const PipelineResult res = run_pipeline(stream, {opt.gate_ps, opt.dead_pulses});
      FileRates fr{path, compute_rates(res.table, delays[i]), stream.header.rep_period_ps};
      rate_rows.push_back(rate_record(path.generic_string(), fr.summary, fr.rep_period_ps));
      rates.push_back(std::move(fr));
      if (opt.lag_histogram > 0) {
        for (Channel ch : {Channel::kD1, Channel::kD2}) {
          const auto h = click_lag_histogram(res.table, ch, opt.lag_histogram);
          for (std::size_t lag = 1; lag < h.size(); ++lag) {
            Record r;
            r.text("file", path.generic_string()).text("channel", to_string(ch));
            r.count("lag", lag).count("count", h[lag]);
            lag_rows.push_back(std::move(r));
          }
        }
      }
      if (opt.export_events) {
        char name[32];
        std::snprintf(name, sizeof(name), "events_%02zu.csv", i);
        {
          auto out = open_out(out_dir / name);
          write_event_table_csv(res.table, out);
        }
        manifest["outputs"].push_back(file_entry(out_dir / name));
      }
    } catch (const Error& e) {
      rethrow_for(path, e);
    }
  }
  emit(out_dir, "rates", rate_rows, manifest);
  if (!lag_rows.empty()) emit(out_dir, "lag_histogram", lag_rows, manifest);
  if (model) emit(out_dir, "comparison", comparison_records(rates, *model), manifest);

  if (files.size() < 5) return kExitOk;
  std::vector<FitPoint> her, unh, coi;
  for (const auto& fr : rates) {
    const auto& s = fr.summary;
    her.push_back({s.delta_t_ps, s.heralded_rate, s.heralded_rate_err});
    unh.push_back({s.delta_t_ps, s.singles2, s.singles2_err});
    coi.push_back({s.delta_t_ps, s.coincidence, s.coincidence_err});
  }
  std::vector<Record> fits;
  bool failed = false;
  auto report = [&](const std::string& curve, const Error& e) {
    failed = true;
    err << "warning: " << curve << " fit: " << e.what() << '\n';
    fits.push_back(fit_record(curve, "", nullptr, nullptr, e.what()));
  };

  std::optional<FitResult> hom;
  std::optional<Measurement> vis;
  try {
    hom = gaussian_fit(coi, FitShape::kDip);
    vis = visibility(*hom);
    fits.push_back(fit_record("coincidence", "free", &*hom, &*vis, ""));
  } catch (const Error& e) {
    report("coincidence", e);
  }
  // The coincidence dip pins center and width unless --free-shape is given.
  const bool locked = hom.has_value() && !opt.free_shape;
  std::optional<FitProfile> profile;
  if (locked) profile = FitProfile{hom->center, hom->width};
  std::optional<FitResult> her_fit, unh_fit;
  for (auto [curve, points, slot] : {std::tuple{"heralded", &her, &her_fit},
                                     std::tuple{"unheralded", &unh, &unh_fit}}) {
    try {
      *slot = gaussian_fit(*points, FitShape::kAuto, profile);
      fits.push_back(fit_record(curve, locked ? "profile" : "free", &**slot, nullptr, ""));
    } catch (const Error& e) {
      report(curve, e);
    }
  }
  emit(out_dir, "fits", fits, manifest);

  if (her_fit && unh_fit && (opt.nu_max || vis)) {
    const double nu_max = opt.nu_max ? *opt.nu_max : vis->value;
    std::vector<Record> eff;
    try {
      const auto e = estimate_efficiencies(*her_fit, *unh_fit, nu_max);
      Record r;
      r.num("nu_max", nu_max).num("eta1p", e.herald.value()).num("eta1p_err", e.herald_err);
      r.num("eta2p", e.output.value()).num("eta2p_err", e.output_err);
      eff.push_back(std::move(r));
      emit(out_dir, "efficiencies", eff, manifest);
    } catch (const Error& e) {
      failed = true;
      err << "warning: efficiency inversion: " << e.what() << '\n';
    }
  }
  return failed ? kExitNumerical : kExitOk;
}

// ---- compare ----------------------------------------------------------------

std::vector<FileRates> read_rates_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kFormat, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormat, path.string() + ": empty file");
  const auto head = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < head.size(); ++i) col[head[i]] = i;
  const char* needed[] = {"file",          "delta_t_ps", "rows",     "live",
                          "clicks1",       "clicks2",    "coincidences", "noclick1",
                          "heralded_clicks"};
  for (const char* n : needed) {
    if (!col.contains(n)) {
      throw Error(ErrorKind::kFormat, path.string() + ": missing column '" + n + "'");
    }
  }
  std::vector<FileRates> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != head.size()) {
      throw Error(ErrorKind::kFormat, path.string() + " line " + std::to_string(line_no) +
                                          ": expected " + std::to_string(head.size()) + " fields");
    }
    try {
      auto u = [&](const char* n) { return static_cast<std::uint64_t>(std::stoull(f[col[n]])); };
      RateCounts c;
      c.rows = u("rows");
      c.live = u("live");
      c.clicks1 = u("clicks1");
      c.clicks2 = u("clicks2");
      c.coincidences = u("coincidences");
      c.noclick1 = u("noclick1");
      c.heralded_clicks = u("heralded_clicks");
      const double delay = std::stod(f[col["delta_t_ps"]]);
      std::uint32_t rep = 10000;
      if (col.contains("rep_period_ps")) rep = static_cast<std::uint32_t>(u("rep_period_ps"));
      out.push_back({f[col["file"]], summarize(c, delay), rep});
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kFormat,
                  path.string() + " line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

// ---- model ------------------------------------------------------------------

struct ModelFlags {
  std::optional<double> eta1p, eta2p, numax, gamma, tau;
  std::optional<double> delay_min, delay_max;
  std::size_t points = 61;
};

std::vector<Record> model_curve(RunConfig rc, const ModelFlags& f) {
  SimConfig& sim = rc.sim;
  if (f.gamma) sim.source.gamma = *f.gamma;
  // Effective efficiencies are taken as detector efficiencies with unit collection.
  if (f.eta1p || f.eta2p) sim.source.kappa1 = sim.source.kappa2 = 1.0;
  if (f.eta1p) sim.det1.eta = *f.eta1p;
  if (f.eta2p) sim.det2.eta = *f.eta2p;
  if (f.numax || f.tau) {
    const double nu_max = f.numax.value_or(sim.profile.nu_max());
    const double tau = f.tau.value_or(sim.profile.tau());
    sim.profile = sim.profile.shape() == IndistinguishabilityProfile::Shape::kTriangular
                      ? IndistinguishabilityProfile::triangular(nu_max, tau)
                      : IndistinguishabilityProfile::gaussian(nu_max, tau);
  }
  sim.source.validate();
  if (f.points < 2) throw UsageError("--points must be at least 2");
  double lo = -3.0 * sim.profile.tau();
  double hi = 3.0 * sim.profile.tau();
  if (sim.profile.shape() == IndistinguishabilityProfile::Shape::kTabulated) {
    lo = sim.profile.table().front().first;
    hi = sim.profile.table().back().first;
  }
  lo = f.delay_min.value_or(lo);
  hi = f.delay_max.value_or(hi);
  if (!(lo <= hi)) throw UsageError("--delay-min must not exceed --delay-max");

  const auto& src = sim.source;
  const double eta1 = sim.det1.eta;
  const double eta2 = sim.det2.eta;
  const EffectiveEfficiency h = effective_efficiency(src, eta1);
  const EffectiveEfficiency o = effective_efficiency(src, eta2);
  const double cwr = cwr_approx(h, o, sim.profile.nu_max());
  const double per_s = 1e12 / sim.rep_period_ps;
  std::vector<Record> rows;
  for (std::size_t i = 0; i < f.points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(f.points - 1);
    const double nu = sim.profile.nu(t);
    const double s1 = p_click_single(src, eta1, nu);
    const double s2 = p_click_single(src, eta2, nu);
    const double cc = p_coincidence(src, eta1, eta2, nu);
    const double he = p_c2_given_nc1_exact(src, eta1, eta2, nu);
    const double ha = p_c2_given_nc1_approx(h, o, src.gamma, nu);
    Record r;
    r.num("delta_t_ps", t).num("nu", nu);
    r.num("singles1", s1).num("singles2", s2).num("coincidence", cc);
    r.num("heralded_exact", he).num("heralded_approx", ha);
    r.num("singles1_per_s", s1 * per_s).num("singles2_per_s", s2 * per_s);
    r.num("coincidence_per_s", cc * per_s).num("heralded_exact_per_s", he * per_s);
    r.num("heralded_approx_per_s", ha * per_s);
    r.num("ratio_to_wing", cwr_approx(h, o, nu)).num("cwr", cwr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void add_config_options(CLI::App* sub, std::string& config, std::vector<std::string>& sets) {
  sub->add_option("-c,--config", config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", sets, "override a config key (key=value), repeatable");
}

void add_analyze_options(CLI::App* sub, AnalyzeOptions& opt) {
  sub->add_option("--gate-ps", opt.gate_ps, "virtual gate window in ps")->capture_default_str();
  sub->add_option("--dead-pulses", opt.dead_pulses, "software dead time in pulses")
      ->capture_default_str();
  sub->add_flag("--free-shape", opt.free_shape,
                "fit center and width of every curve instead of taking them from the coincidence dip");
  sub->add_option("--nu-max", opt.nu_max, "overlap ceiling for the efficiency inversion "
                                          "(default: fitted visibility)");
  sub->add_option("--lag-histogram", opt.lag_histogram,
                  "write click lag histograms up to this many pulses");
  sub->add_flag("--export-events", opt.export_events, "write per-file event tables");
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat:
    case ErrorKind::kIntegrity:
    case ErrorKind::kInsufficientReference:
    case ErrorKind::kClockGlitch:
      return kExitFormat;
    case ErrorKind::kDegenerateInput:
    case ErrorKind::kNoSolution:
    case ErrorKind::kUndefinedRate:
    case ErrorKind::kFit:
    case ErrorKind::kWrongShape:
      return kExitNumerical;
    default:
      return kExitValidation;
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kFormat, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 unavailable");
  }
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"zeroherald: heralding on zero photons with a Hong-Ou-Mandel interferometer"};
  app.name(args.empty() ? "zeroherald" : fs::path(args[0]).filename().string());
  app.set_version_flag("--version", ZEROHERALD_VERSION);
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 2 usage, 3 validation, 4 file format or integrity, 5 numerical.");

  std::string config;
  std::vector<std::string> sets;

  auto* model = app.add_subcommand("model", "closed-form rate and CWR curves versus delay");
  ModelFlags mf;
  std::string model_out;
  std::string model_format = "csv";
  add_config_options(model, config, sets);
  model->add_option("--eta1p", mf.eta1p, "effective herald efficiency");
  model->add_option("--eta2p", mf.eta2p, "effective output efficiency");
  model->add_option("--numax", mf.numax, "peak overlap");
  model->add_option("--gamma", mf.gamma, "pair probability per pulse");
  model->add_option("--tau-ps", mf.tau, "coherence width in ps");
  model->add_option("--delay-min", mf.delay_min, "first delay in ps (default -3 tau)");
  model->add_option("--delay-max", mf.delay_max, "last delay in ps (default +3 tau)");
  model->add_option("--points", mf.points, "number of delays")->capture_default_str();
  model->add_option("-o,--out", model_out, "output file (default stdout)");
  model->add_option("--format", model_format, "csv or jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "simulate tag files");
  std::optional<std::uint64_t> seed, n_pulses;
  std::optional<double> delay;
  std::string sim_out, out_dir, tag_format = "binary";
  add_config_options(simulate, config, sets);
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--n-pulses", n_pulses, "pulses per file");
  simulate->add_option("--delay-ps", delay, "single delay; ignores delays_ps");
  simulate->add_option("-o,--out", sim_out, "tag file (single delay)");
  simulate->add_option("--out-dir", out_dir, "directory for a delay scan (scan_NN files)");
  simulate->add_option("--format", tag_format, "binary or csv")
      ->check(CLI::IsMember({"binary", "csv"}))
      ->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "rates, fits and comparisons from tag files");
  std::vector<std::string> inputs;
  std::vector<double> delays;
  std::string model_config;
  std::vector<std::string> model_sets;
  AnalyzeOptions aopt;
  analyze->add_option("files", inputs, "tag files")->required()->check(CLI::ExistingFile);
  analyze->add_option("--delays", delays, "delay per file in ps (default: from manifest)")
      ->delimiter(',');
  analyze->add_option("--out-dir", out_dir, "output directory")->required();
  analyze->add_option("--model-config", model_config, "config for z-score comparison")
      ->check(CLI::ExistingFile);
  analyze->add_option("--model-set", model_sets, "override a model config key, repeatable");
  add_analyze_options(analyze, aopt);

  auto* scan = app.add_subcommand("scan", "simulate and analyze a delay scan");
  add_config_options(scan, config, sets);
  scan->add_option("--seed", seed, "RNG seed");
  scan->add_option("--n-pulses", n_pulses, "pulses per delay");
  scan->add_option("--out-dir", out_dir, "output directory")->required();
  add_analyze_options(scan, aopt);

  auto* compare = app.add_subcommand("compare", "z-scores of a rates table against the model");
  std::string rates_path, compare_out;
  compare->add_option("rates", rates_path, "rates.csv from analyze")->required()->check(
      CLI::ExistingFile);
  add_config_options(compare, config, sets);
  compare->add_option("-o,--out", compare_out, "output file (default stdout)");

  // CLI11 consumes a reversed argument vector without the program name.
  std::vector<std::string> rev;
  for (std::size_t i = args.size(); i > 1; --i) rev.push_back(args[i - 1]);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (model->parsed()) {
      std::vector<Record> rows;
      try {
        rows = model_curve(build_config(gather_settings(config, sets, {})), mf);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kValidation && e.kind() != ErrorKind::kOutOfDomain) throw;
        throw UsageError(e.what());
      }
      std::ofstream file;
      if (!model_out.empty()) file = open_out(model_out);
      std::ostream& sink = model_out.empty() ? out : file;
      if (model_format == "csv") {
        write_csv(sink, rows);
      } else {
        write_jsonl(sink, rows);
      }
      return kExitOk;
    }

    if (simulate->parsed() || scan->parsed()) {
      Settings flags;
      if (seed) flags["seed"] = std::to_string(*seed);
      if (n_pulses) flags["n_pulses"] = std::to_string(*n_pulses);
      if (delay) flags["delta_t_ps"] = format_number(*delay);
      const Settings settings = gather_settings(config, sets, flags);
      RunConfig rc = build_config(settings);
      const bool scanning = scan->parsed() || (!delay && !rc.delays_ps.empty());
      json manifest = base_manifest(scan->parsed() ? "scan" : "simulate", args);
      manifest["config"] = settings_json(to_settings(rc));
      manifest["seed"] = rc.sim.seed;
      manifest["rng"] = Rng::kAlgorithm;
      fs::path target;
      fs::path manifest_path;
      if (scanning) {
        if (rc.delays_ps.empty()) throw Error(ErrorKind::kValidation, "delays_ps is not set");
        if (out_dir.empty()) throw UsageError("a delay scan needs --out-dir");
        target = out_dir;
        manifest_path = target / "manifest.json";
      } else {
        if (sim_out.empty()) throw UsageError("simulate needs --out (or delays_ps with --out-dir)");
        target = sim_out;
        manifest_path = sim_out + ".manifest.json";
      }
      const auto format = tag_format == "csv" ? TagFormat::kCsv : TagFormat::kBinary;
      const auto files = simulate_files(rc, target, scanning, format, manifest);
      int code = kExitOk;
      if (scan->parsed()) {
        std::vector<fs::path> paths;
        std::vector<double> ds;
        for (const auto& f : files) {
          paths.push_back(f.path);
          ds.push_back(f.delta_t_ps);
        }
        json analysis = base_manifest("analyze", args);
        code = analyze_files(paths, ds, aopt, target, rc, analysis, err);
        manifest["analysis"] = {{"gate_ps", aopt.gate_ps},
                                {"dead_pulses", aopt.dead_pulses},
                                {"free_shape", aopt.free_shape}};
        for (auto& o : analysis["outputs"]) manifest["outputs"].push_back(o);
      }
      manifest["timing"] = {{"wall_seconds", seconds_since(start)}};
      write_manifest(manifest_path, manifest);
      return code;
    }

    if (analyze->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      const auto ds = resolve_delays(paths, delays);
      std::optional<RunConfig> rc;
      if (!model_config.empty() || !model_sets.empty()) {
        rc = build_config(gather_settings(model_config, model_sets, {}));
      }
      json manifest = base_manifest("analyze", args);
      manifest["analysis"] = {{"gate_ps", aopt.gate_ps},
                              {"dead_pulses", aopt.dead_pulses},
                              {"free_shape", aopt.free_shape},
                              {"delays_ps", ds}};
      if (rc) manifest["model_config"] = settings_json(to_settings(*rc));
      const int code = analyze_files(paths, ds, aopt, out_dir, rc, manifest, err);
      manifest["timing"] = {{"wall_seconds", seconds_since(start)}};
      write_manifest(fs::path(out_dir) / "analysis_manifest.json", manifest);
      return code;
    }

    if (compare->parsed()) {
      const RunConfig rc = build_config(gather_settings(config, sets, {}));
      const auto rows = comparison_records(read_rates_csv(rates_path), rc);
      std::ofstream file;
      if (!compare_out.empty()) file = open_out(compare_out);
      write_csv(compare_out.empty() ? out : file, rows);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace zeroherald::cli
