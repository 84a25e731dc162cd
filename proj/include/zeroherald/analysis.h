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

// Measured quantities from event tables: per-live-pulse rates, no-click-heralded
// D2 rates, Gaussian fits of delay scans, visibility, center-to-wings ratios,
// effective-efficiency extraction and comparison against the closed forms.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zeroherald/model.h"
#include "zeroherald/pipeline.h"

namespace zeroherald {

/// Integer tallies over live rows (rows where neither channel is dead). Adding
/// the counts of disjoint tables gives the counts of their union.
struct RateCounts {
  std::uint64_t rows = 0;
  std::uint64_t live = 0;
  std::uint64_t clicks1 = 0;
  std::uint64_t clicks2 = 0;
  std::uint64_t coincidences = 0;
  std::uint64_t noclick1 = 0;
  /// Rows with D1 no-click and D2 click.
  std::uint64_t heralded_clicks = 0;

  RateCounts& operator+=(const RateCounts& other);
  friend bool operator==(const RateCounts&, const RateCounts&) = default;
};

RateCounts count_events(const PulseEventTable& table);

/// Rates per live pulse with Poisson standard errors sqrt(k)/N.
struct RateSummary {
  double delta_t_ps = 0.0;
  RateCounts counts;
  double singles1 = 0.0;
  double singles2 = 0.0;
  double coincidence = 0.0;
  /// P(C2 | NC1): heralded clicks over D1 no-click rows.
  double heralded_rate = 0.0;
  /// Fraction of live rows with a D1 no-click.
  double heralding_success = 0.0;
  double singles1_err = 0.0;
  double singles2_err = 0.0;
  double coincidence_err = 0.0;
  double heralded_rate_err = 0.0;
  double heralding_success_err = 0.0;
};

/// Throws kEmptyInput without live rows and kUndefinedRate without D1 no-click rows.
RateSummary summarize(const RateCounts& counts, double delta_t_ps);
RateSummary compute_rates(const PulseEventTable& table, double delta_t_ps);

/// Counts of consecutive click rows on one channel separated by `lag` pulses,
/// for lag = 1..max_lag (index 0 unused).
std::vector<std::uint64_t> click_lag_histogram(const PulseEventTable& table, Channel channel,
                                               std::uint32_t max_lag);

struct FitPoint {
  double delta_t = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
};

enum class FitShape { kPeak, kDip, kAuto };

/// f(t) = baseline + amplitude * exp(-(t - center)^2 / (2 width^2)).
struct FitResult {
  double baseline = 0.0;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;
  double baseline_err = 0.0;
  double amplitude_err = 0.0;
  double center_err = 0.0;
  double width_err = 0.0;
  /// (baseline + amplitude) / baseline and its propagated error.
  double cwr = 1.0;
  double cwr_err = 0.0;
  /// sqrt(sum of squared weighted residuals).
  double residual_norm = 0.0;
  std::size_t points = 0;
  int iterations = 0;
  /// Data had no spread; amplitude pinned to zero.
  bool flat = false;

  double evaluate(double t) const;
};

/// Center and width of a Gaussian, e.g. taken from a higher-contrast fit of the
/// same delay scan.
struct FitProfile {
  double center = 0.0;
  double width = 0.0;
};

/// Weighted (1/stderr^2) damped Gauss-Newton fit with a fixed deterministic start.
/// Center and width are kept inside the scanned range and between the finest delay
/// step and the full span. Non-positive stderr entries are replaced by the smallest
/// positive one. Needs at least 5 points; throws FitError when it fails to converge
/// or the amplitude sign contradicts a peak/dip hint.
///
/// With a fixed profile only baseline and amplitude are fitted (a linear problem);
/// center_err and width_err are then zero and the errors ignore any uncertainty in
/// the supplied profile.
FitResult gaussian_fit(std::span<const FitPoint> points, FitShape shape = FitShape::kAuto,
                       const std::optional<FitProfile>& profile = std::nullopt);

struct Measurement {
  double value = 0.0;
  double error = 0.0;
};

/// |amplitude| / baseline of a dip fit. Throws kWrongShape for a peak.
Measurement visibility(const FitResult& fit);

struct EfficiencyEstimate {
  EffectiveEfficiency herald{0.0};
  EffectiveEfficiency output{0.0};
  double herald_err = 0.0;
  double output_err = 0.0;
};

/// Output efficiency from the unheralded (D2 singles) CWR, then heralding
/// efficiency from the heralded CWR at that output efficiency.
EfficiencyEstimate estimate_efficiencies(const FitResult& heralded_peak,
                                         const FitResult& unheralded, double nu_max);

struct RateComparison {
  std::string name;
  double measured = 0.0;
  double predicted = 0.0;
  /// Binomial error of the prediction over the measured row count.
  double stderr_ = 0.0;
  double z = 0.0;
  /// Zero predicted spread but a nonzero deviation.
  bool deterministic_mismatch = false;
};

/// z-scores of singles, coincidence, heralded rate and heralding success against
/// the dark-count-free closed forms at the given nu.
std::vector<RateComparison> compare_to_model(const RateSummary& summary, const SourceParams& src,
                                             double eta1, double eta2, double nu);

}  // namespace zeroherald
