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

// Closed-form photon statistics for a pulsed pair source feeding a 50/50
// beamsplitter with non-photon-number-resolving click detectors at both outputs.
// Everything here is a pure function of its arguments.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace zeroherald {

/// Pair-source parameters: emission probability per pulse and the two input
/// coupling efficiencies.
struct SourceParams {
  double gamma = 1e-4;
  double kappa1 = 1.0;
  double kappa2 = 1.0;

  void validate() const;
  /// Arithmetic mean of the couplings.
  double kappa_mean() const { return 0.5 * (kappa1 + kappa2); }
  /// Geometric mean of the couplings; never exceeds kappa_mean().
  double kappa_geo() const;
};

struct DetectorParams {
  double eta = 1.0;
  /// Dark-click probability inside one gate window.
  double dark_prob = 0.0;
  /// Pulses after a click during which the detector cannot fire.
  std::uint32_t dead_pulses = 0;
  /// Probability that a click is followed by a spurious click on the first live pulse.
  double afterpulse_prob = 0.0;
  /// Dark-click probability per pulse period landing outside the gate window.
  /// Only the simulator uses this; the closed forms ignore out-of-gate events.
  double out_of_gate_dark_prob = 0.0;

  void validate() const;
};

/// Coupling-weighted detector efficiency sqrt(kappa1*kappa2)*eta.
class EffectiveEfficiency {
 public:
  explicit EffectiveEfficiency(double value);
  double value() const { return value_; }
  friend bool operator==(EffectiveEfficiency, EffectiveEfficiency) = default;

 private:
  double value_;
};

EffectiveEfficiency effective_efficiency(const SourceParams& src, double eta);

/// Delay-dependent two-photon overlap.
class IndistinguishabilityProfile {
 public:
  enum class Shape { kGaussian, kTriangular, kTabulated };

  /// nu_max * exp(-(dt/tau)^2)
  static IndistinguishabilityProfile gaussian(double nu_max, double tau);
  /// nu_max * max(0, 1 - |dt|/tau)
  static IndistinguishabilityProfile triangular(double nu_max, double tau);
  /// Piecewise-linear interpolation of (delay, nu) points. Delays must be strictly
  /// increasing and bracket zero; nu_max is the interpolated value at zero and no
  /// entry may exceed it.
  static IndistinguishabilityProfile tabulated(std::vector<std::pair<double, double>> table);

  /// Throws ErrorKind::kOutOfDomain for tabulated profiles queried outside the table.
  double nu(double delta_t) const;

  Shape shape() const { return shape_; }
  double nu_max() const { return nu_max_; }
  double tau() const { return tau_; }
  const std::vector<std::pair<double, double>>& table() const { return table_; }

 private:
  IndistinguishabilityProfile(Shape shape, double nu_max, double tau,
                              std::vector<std::pair<double, double>> table);

  Shape shape_;
  double nu_max_;
  double tau_;
  std::vector<std::pair<double, double>> table_;
};

const char* to_string(IndistinguishabilityProfile::Shape shape);

/// Photon-number outcome probabilities at the two beamsplitter outputs,
/// truncated at one emitted pair. p00 is the normalization complement.
struct OutputDistribution {
  double p00 = 1.0;
  double p10 = 0.0;
  double p01 = 0.0;
  double p11 = 0.0;
  double p20 = 0.0;
  double p02 = 0.0;

  double sum() const { return p00 + p10 + p01 + p11 + p20 + p02; }
  /// Probability of (m, n); zero for outcomes outside the truncated support.
  double at(int m, int n) const;
};

/// (1-d)(1-eta)^n
double p_noclick_given_n(const DetectorParams& det, unsigned n);

/// Probability of a no-click event for a photon-number distribution P_n (index = n).
/// The distribution must sum to one within 1e-9.
double success_probability(std::span<const double> photon_dist, const DetectorParams& det);

/// P_0 / sum_n (1-eta)^n P_n. The dark-count factor cancels, so dark_prob is unused.
double heralded_fidelity(std::span<const double> photon_dist, const DetectorParams& det);

OutputDistribution output_distribution(const SourceParams& src, double nu);

/// Singles probability at a detector of efficiency `eta` (dark counts neglected).
double p_click_single(const SourceParams& src, double eta, double nu);

double p_coincidence(const SourceParams& src, double eta1, double eta2, double nu);

/// Bayes-rule P(C2 | NC1) built from the singles and coincidence probabilities.
double p_c2_given_nc1_exact(const SourceParams& src, double eta1, double eta2, double nu);

/// Small-gamma, balanced-coupling approximation of P(C2 | NC1) in terms of
/// effective efficiencies. Not accurate unless gamma << 1.
double p_c2_given_nc1_approx(EffectiveEfficiency herald, EffectiveEfficiency output,
                             double gamma, double nu);

/// Center-to-wings ratio of the heralded D2 rate: value at nu_max over value at nu=0.
double cwr_approx(EffectiveEfficiency herald, EffectiveEfficiency output, double nu_max);

/// Heralding efficiency that reproduces `cwr` for the given output efficiency.
/// Throws kNoSolution when no efficiency in [0, 1] does.
EffectiveEfficiency invert_cwr_for_eta1(double cwr, EffectiveEfficiency output, double nu_max);

/// Output efficiency that reproduces `cwr` for an unheralded (herald efficiency 0) scan.
EffectiveEfficiency invert_unheralded_cwr_for_eta2(double cwr, double nu_max);

}  // namespace zeroherald
