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

#include "zeroherald/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

constexpr double kNormalizationTolerance = 1e-9;
constexpr double kRangeSlack = 1e-12;

void require_unit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorKind::kValidation,
                std::string(name) + " must lie in [0, 1], got " + std::to_string(value));
  }
}

void require_distribution(std::span<const double> dist) {
  if (dist.empty()) {
    throw Error(ErrorKind::kValidation, "photon-number distribution is empty");
  }
  for (double p : dist) {
    if (!(p >= 0.0)) {
      throw Error(ErrorKind::kValidation, "photon-number distribution has a negative entry");
    }
  }
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw Error(ErrorKind::kValidation,
                "photon-number distribution sums to " + std::to_string(total) + ", not 1");
  }
}

}  // namespace

void SourceParams::validate() const {
  require_unit(gamma, "gamma");
  require_unit(kappa1, "kappa1");
  require_unit(kappa2, "kappa2");
}

double SourceParams::kappa_geo() const { return std::sqrt(kappa1 * kappa2); }

void DetectorParams::validate() const {
  require_unit(eta, "eta");
  require_unit(dark_prob, "dark_prob");
  require_unit(afterpulse_prob, "afterpulse_prob");
  require_unit(out_of_gate_dark_prob, "out_of_gate_dark_prob");
}

EffectiveEfficiency::EffectiveEfficiency(double value) : value_(value) {
  require_unit(value, "effective efficiency");
}

EffectiveEfficiency effective_efficiency(const SourceParams& src, double eta) {
  src.validate();
  require_unit(eta, "eta");
  return EffectiveEfficiency(src.kappa_geo() * eta);
}

IndistinguishabilityProfile::IndistinguishabilityProfile(
    Shape shape, double nu_max, double tau, std::vector<std::pair<double, double>> table)
    : shape_(shape), nu_max_(nu_max), tau_(tau), table_(std::move(table)) {}

IndistinguishabilityProfile IndistinguishabilityProfile::gaussian(double nu_max, double tau) {
  require_unit(nu_max, "nu_max");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorKind::kValidation, "profile width tau must be positive");
  }
  return IndistinguishabilityProfile(Shape::kGaussian, nu_max, tau, {});
}

IndistinguishabilityProfile IndistinguishabilityProfile::triangular(double nu_max, double tau) {
  require_unit(nu_max, "nu_max");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorKind::kValidation, "profile width tau must be positive");
  }
  return IndistinguishabilityProfile(Shape::kTriangular, nu_max, tau, {});
}

IndistinguishabilityProfile IndistinguishabilityProfile::tabulated(
    std::vector<std::pair<double, double>> table) {
  if (table.size() < 2) {
    throw Error(ErrorKind::kValidation, "tabulated profile needs at least two points");
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    require_unit(table[i].second, "tabulated nu");
    if (i > 0 && !(table[i].first > table[i - 1].first)) {
      throw Error(ErrorKind::kValidation, "tabulated profile delays must be strictly increasing");
    }
  }
  if (table.front().first > 0.0 || table.back().first < 0.0) {
    throw Error(ErrorKind::kValidation, "tabulated profile must bracket zero delay");
  }
  IndistinguishabilityProfile profile(Shape::kTabulated, 0.0, 0.0, std::move(table));
  profile.nu_max_ = profile.nu(0.0);
  for (const auto& [delay, value] : profile.table_) {
    if (value > profile.nu_max_) {
      throw Error(ErrorKind::kValidation, "tabulated profile exceeds its zero-delay value");
    }
  }
  return profile;
}

double IndistinguishabilityProfile::nu(double delta_t) const {
  switch (shape_) {
    case Shape::kGaussian: {
      const double x = delta_t / tau_;
      return nu_max_ * std::exp(-x * x);
    }
    case Shape::kTriangular:
      return nu_max_ * std::max(0.0, 1.0 - std::abs(delta_t) / tau_);
    case Shape::kTabulated: {
      if (!(delta_t >= table_.front().first && delta_t <= table_.back().first)) {
        throw Error(ErrorKind::kOutOfDomain,
                    "delay " + std::to_string(delta_t) + " outside tabulated profile range");
      }
      auto hi = std::lower_bound(table_.begin(), table_.end(), delta_t,
                                 [](const auto& point, double t) { return point.first < t; });
      if (hi->first == delta_t) return hi->second;
      auto lo = std::prev(hi);
      const double w = (delta_t - lo->first) / (hi->first - lo->first);
      return lo->second + w * (hi->second - lo->second);
    }
  }
  return 0.0;
}

const char* to_string(IndistinguishabilityProfile::Shape shape) {
  switch (shape) {
    case IndistinguishabilityProfile::Shape::kGaussian: return "gaussian";
    case IndistinguishabilityProfile::Shape::kTriangular: return "triangular";
    case IndistinguishabilityProfile::Shape::kTabulated: return "tabulated";
  }
  return "unknown";
}

double OutputDistribution::at(int m, int n) const {
  if (m == 0 && n == 0) return p00;
  if (m == 1 && n == 0) return p10;
  if (m == 0 && n == 1) return p01;
  if (m == 1 && n == 1) return p11;
  if (m == 2 && n == 0) return p20;
  if (m == 0 && n == 2) return p02;
  return 0.0;
}

double p_noclick_given_n(const DetectorParams& det, unsigned n) {
  det.validate();
  return (1.0 - det.dark_prob) * std::pow(1.0 - det.eta, static_cast<double>(n));
}

double success_probability(std::span<const double> photon_dist, const DetectorParams& det) {
  require_distribution(photon_dist);
  det.validate();
  double total = 0.0;
  double miss = 1.0;
  for (double p : photon_dist) {
    total += miss * p;
    miss *= 1.0 - det.eta;
  }
  return (1.0 - det.dark_prob) * total;
}

double heralded_fidelity(std::span<const double> photon_dist, const DetectorParams& det) {
  require_distribution(photon_dist);
  det.validate();
  double denominator = 0.0;
  double miss = 1.0;
  for (double p : photon_dist) {
    denominator += miss * p;
    miss *= 1.0 - det.eta;
  }
  if (!(denominator > 0.0)) {
    throw Error(ErrorKind::kDegenerateInput,
                "no-click probability is zero; heralded fidelity undefined");
  }
  return photon_dist[0] / denominator;
}

OutputDistribution output_distribution(const SourceParams& src, double nu) {
  src.validate();
  require_unit(nu, "nu");
  const double g = src.gamma;
  const double k1 = src.kappa1;
  const double k2 = src.kappa2;
  OutputDistribution out;
  out.p11 = 0.5 * g * k1 * k2 * (1.0 - nu);
  out.p10 = 0.5 * g * (k1 * (1.0 - k2) + (1.0 - k1) * k2);
  out.p01 = out.p10;
  out.p20 = 0.25 * g * k1 * k2 * (1.0 + nu);
  out.p02 = out.p20;
  out.p00 = 1.0 - g * (k1 + k2 - k1 * k2);
  return out;
}

double p_click_single(const SourceParams& src, double eta, double nu) {
  src.validate();
  require_unit(eta, "eta");
  require_unit(nu, "nu");
  // Written as gamma*eta*kbar - gamma*eta^2*ktilde^2*(1+nu)/4, which equals the
  // bracketed form without dividing by ktilde (zero when either coupling is zero).
  const double kt = src.kappa_geo();
  return src.gamma * eta * src.kappa_mean() - 0.25 * src.gamma * eta * eta * kt * kt * (1.0 + nu);
}

double p_coincidence(const SourceParams& src, double eta1, double eta2, double nu) {
  src.validate();
  require_unit(eta1, "eta1");
  require_unit(eta2, "eta2");
  require_unit(nu, "nu");
  return 0.5 * src.gamma * eta1 * eta2 * src.kappa1 * src.kappa2 * (1.0 - nu);
}

double p_c2_given_nc1_exact(const SourceParams& src, double eta1, double eta2, double nu) {
  const double c1 = p_click_single(src, eta1, nu);
  const double c2 = p_click_single(src, eta2, nu);
  const double joint = p_coincidence(src, eta1, eta2, nu);
  if (!(c1 < 1.0)) {
    throw Error(ErrorKind::kDegenerateInput, "P(C1) = 1; no no-click events to condition on");
  }
  return (c2 - joint) / (1.0 - c1);
}

double p_c2_given_nc1_approx(EffectiveEfficiency herald, EffectiveEfficiency output,
                             double gamma, double nu) {
  require_unit(gamma, "gamma");
  require_unit(nu, "nu");
  const double h = herald.value();
  const double o = output.value();
  return 0.25 * gamma * o * (4.0 - o - 2.0 * h + nu * (2.0 * h - o));
}

double cwr_approx(EffectiveEfficiency herald, EffectiveEfficiency output, double nu_max) {
  require_unit(nu_max, "nu_max");
  const double h = herald.value();
  const double o = output.value();
  // One division, so the fixed points 2, 1 and 2/3 come out exactly.
  const double wings = 4.0 - 2.0 * h - o;
  return (wings + nu_max * (2.0 * h - o)) / wings;
}

EffectiveEfficiency invert_cwr_for_eta1(double cwr, EffectiveEfficiency output, double nu_max) {
  require_unit(nu_max, "nu_max");
  if (!(nu_max > 0.0)) {
    throw Error(ErrorKind::kNoSolution, "nu_max = 0 leaves the heralding efficiency unobservable");
  }
  const double o = output.value();
  const double lo = cwr_approx(EffectiveEfficiency(0.0), output, nu_max);
  const double hi = cwr_approx(EffectiveEfficiency(1.0), output, nu_max);
  if (!(cwr >= lo - kRangeSlack && cwr <= hi + kRangeSlack)) {
    throw Error(ErrorKind::kNoSolution, "CWR " + std::to_string(cwr) + " outside attainable range [" +
                                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  // r(4 - 2h - o) = 2h - o with r = (cwr - 1)/nu_max, linear in h.
  const double r = (cwr - 1.0) / nu_max;
  const double h = (4.0 * r + o * (1.0 - r)) / (2.0 * (1.0 + r));
  return EffectiveEfficiency(std::clamp(h, 0.0, 1.0));
}

EffectiveEfficiency invert_unheralded_cwr_for_eta2(double cwr, double nu_max) {
  require_unit(nu_max, "nu_max");
  if (!(nu_max > 0.0)) {
    throw Error(ErrorKind::kNoSolution, "nu_max = 0 leaves the output efficiency unobservable");
  }
  const double lo = 1.0 - nu_max / 3.0;
  if (!(cwr >= lo - kRangeSlack && cwr <= 1.0 + kRangeSlack)) {
    throw Error(ErrorKind::kNoSolution, "unheralded CWR " + std::to_string(cwr) +
                                            " outside attainable range [" + std::to_string(lo) +
                                            ", 1]");
  }
  // r(4 - o) = -o with r = (cwr - 1)/nu_max.
  const double r = (cwr - 1.0) / nu_max;
  const double o = 4.0 * r / (r - 1.0);
  return EffectiveEfficiency(std::clamp(o, 0.0, 1.0));
}

}  // namespace zeroherald
