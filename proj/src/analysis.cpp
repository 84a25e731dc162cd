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

#include "zeroherald/analysis.h"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "zeroherald/errors.h"

namespace zeroherald {
namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelativeTolerance = 1e-9;

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

double gaussian_term(double t, double center, double width) {
  const double x = (t - center) / width;
  return std::exp(-0.5 * x * x);
}

struct Problem {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> w;

  double chi2(const Vec4& p) const {
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = y[i] - (p[0] + p[1] * gaussian_term(t[i], p[2], p[3]));
      total += w[i] * r * r;
    }
    return total;
  }

  // Normal equations J^T W J and J^T W r at p.
  void normal_equations(const Vec4& p, Mat4& jtj, Vec4& jtr) const {
    jtj.setZero();
    jtr.setZero();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = gaussian_term(t[i], p[2], p[3]);
      const double dx = t[i] - p[2];
      Vec4 j;
      j << 1.0, g, p[1] * g * dx / (p[3] * p[3]), p[1] * g * dx * dx / (p[3] * p[3] * p[3]);
      const double r = y[i] - (p[0] + p[1] * g);
      jtj.noalias() += w[i] * j * j.transpose();
      jtr.noalias() += w[i] * r * j;
    }
  }
};

// Fills the result from the final parameters and the (a, b) covariance.
FitResult finish(FitResult fit, const Vec4& p, double chi2, const Eigen::Matrix2d& cov_ab,
                 const Eigen::Vector2d& shape_err, FitShape shape) {
  fit.residual_norm = std::sqrt(chi2);
  fit.baseline = p[0];
  fit.amplitude = p[1];
  fit.center = p[2];
  fit.width = p[3];
  fit.baseline_err = std::sqrt(std::max(cov_ab(0, 0), 0.0));
  fit.amplitude_err = std::sqrt(std::max(cov_ab(1, 1), 0.0));
  fit.center_err = shape_err[0];
  fit.width_err = shape_err[1];
  if (!(fit.baseline > 0.0)) throw FitError("fitted baseline is not positive", fit.residual_norm);
  const double a = fit.baseline;
  const double b = fit.amplitude;
  fit.cwr = (a + b) / a;
  const Eigen::Vector2d grad(-b / (a * a), 1.0 / a);
  fit.cwr_err = std::sqrt(std::max(grad.dot(cov_ab * grad), 0.0));
  if (shape == FitShape::kPeak && !(b > 0.0)) {
    throw FitError("peak fit produced a non-positive amplitude", fit.residual_norm);
  }
  if (shape == FitShape::kDip && !(b < 0.0)) {
    throw FitError("dip fit produced a non-negative amplitude", fit.residual_norm);
  }
  return fit;
}

}  // namespace

RateCounts& RateCounts::operator+=(const RateCounts& other) {
  rows += other.rows;
  live += other.live;
  clicks1 += other.clicks1;
  clicks2 += other.clicks2;
  coincidences += other.coincidences;
  noclick1 += other.noclick1;
  heralded_clicks += other.heralded_clicks;
  return *this;
}

RateCounts count_events(const PulseEventTable& table) {
  RateCounts c;
  c.rows = table.rows();
  std::uint64_t dead_rows = 0;
  for (const auto& r : table.sparse_rows()) {
    if (r.d1 == PulseState::kDead || r.d2 == PulseState::kDead) {
      ++dead_rows;
      continue;
    }
    const bool c1 = r.d1 == PulseState::kClick;
    const bool c2 = r.d2 == PulseState::kClick;
    c.clicks1 += c1;
    c.clicks2 += c2;
    c.coincidences += c1 && c2;
  }
  c.live = c.rows - dead_rows;
  c.noclick1 = c.live - c.clicks1;
  c.heralded_clicks = c.clicks2 - c.coincidences;
  return c;
}

RateSummary summarize(const RateCounts& counts, double delta_t_ps) {
  if (counts.live == 0) throw Error(ErrorKind::kEmptyInput, "event table has no live rows");
  if (counts.noclick1 == 0) {
    throw Error(ErrorKind::kUndefinedRate, "no D1 no-click rows; heralded rate undefined");
  }
  RateSummary s;
  s.delta_t_ps = delta_t_ps;
  s.counts = counts;
  const auto rate = [](std::uint64_t k, std::uint64_t n) {
    return static_cast<double>(k) / static_cast<double>(n);
  };
  const auto error = [](std::uint64_t k, std::uint64_t n) {
    return std::sqrt(static_cast<double>(k)) / static_cast<double>(n);
  };
  s.singles1 = rate(counts.clicks1, counts.live);
  s.singles2 = rate(counts.clicks2, counts.live);
  s.coincidence = rate(counts.coincidences, counts.live);
  s.heralded_rate = rate(counts.heralded_clicks, counts.noclick1);
  s.heralding_success = rate(counts.noclick1, counts.live);
  s.singles1_err = error(counts.clicks1, counts.live);
  s.singles2_err = error(counts.clicks2, counts.live);
  s.coincidence_err = error(counts.coincidences, counts.live);
  s.heralded_rate_err = error(counts.heralded_clicks, counts.noclick1);
  s.heralding_success_err = error(counts.noclick1, counts.live);
  return s;
}

RateSummary compute_rates(const PulseEventTable& table, double delta_t_ps) {
  return summarize(count_events(table), delta_t_ps);
}

std::vector<std::uint64_t> click_lag_histogram(const PulseEventTable& table, Channel channel,
                                               std::uint32_t max_lag) {
  if (channel == Channel::kRef) {
    throw Error(ErrorKind::kValidation, "lag histogram needs a detector channel");
  }
  std::vector<std::uint64_t> histogram(static_cast<std::size_t>(max_lag) + 1, 0);
  std::optional<std::uint64_t> last;
  for (const auto& r : table.sparse_rows()) {
    const PulseState s = channel == Channel::kD1 ? r.d1 : r.d2;
    if (s != PulseState::kClick) continue;
    if (last && r.pulse - *last <= max_lag) ++histogram[r.pulse - *last];
    last = r.pulse;
  }
  return histogram;
}

double FitResult::evaluate(double t) const {
  if (flat || width <= 0.0) return baseline;
  return baseline + amplitude * gaussian_term(t, center, width);
}

FitResult gaussian_fit(std::span<const FitPoint> input, FitShape shape,
                       const std::optional<FitProfile>& profile) {
  if (input.size() < 5) throw Error(ErrorKind::kValidation, "Gaussian fit needs at least 5 points");
  std::vector<FitPoint> pts(input.begin(), input.end());
  std::stable_sort(pts.begin(), pts.end(),
                   [](const FitPoint& a, const FitPoint& b) { return a.delta_t < b.delta_t; });

  double min_err = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (!std::isfinite(p.value) || !std::isfinite(p.delta_t)) {
      throw Error(ErrorKind::kValidation, "non-finite fit input");
    }
    if (p.stderr_ > 0.0) min_err = std::min(min_err, p.stderr_);
  }
  Problem problem;
  for (const auto& p : pts) {
    const double err = p.stderr_ > 0.0 ? p.stderr_ : (std::isfinite(min_err) ? min_err : 1.0);
    problem.t.push_back(p.delta_t);
    problem.y.push_back(p.value);
    problem.w.push_back(1.0 / (err * err));
  }

  const std::size_t n = pts.size();
  const double span = pts.back().delta_t - pts.front().delta_t;
  if (!(span > 0.0)) throw Error(ErrorKind::kValidation, "fit points span no delay range");

  // Deterministic start: baseline from the outer quartiles, center at the largest
  // deviation from it, width a sixth of the span.
  const std::size_t q = std::max<std::size_t>(1, n / 4);
  double outer = 0.0;
  for (std::size_t i = 0; i < q; ++i) outer += pts[i].value + pts[n - 1 - i].value;
  const double a0 = outer / static_cast<double>(2 * q);
  std::size_t pick = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = pts[i].value - a0;
    const double score = shape == FitShape::kPeak ? dev : shape == FitShape::kDip ? -dev : std::abs(dev);
    if (score > best) {
      best = score;
      pick = i;
    }
  }
  // The peak stays inside the scanned range, and its width between the finest
  // delay step and the full span; noisy scans otherwise run off to a one-point
  // spike or an unbounded bump.
  double min_width = span;
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = pts[i].delta_t - pts[i - 1].delta_t;
    if (gap > 0.0) min_width = std::min(min_width, gap);
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vec4 lower(-kInf, -kInf, pts.front().delta_t, min_width);
  const Vec4 upper(kInf, kInf, pts.back().delta_t, span);
  Vec4 p;
  p << a0, pts[pick].value - a0, pts[pick].delta_t, span / 6.0;
  p[3] = std::clamp(p[3], min_width, span);

  const auto [lo_it, hi_it] = std::minmax_element(
      pts.begin(), pts.end(), [](const FitPoint& a, const FitPoint& b) { return a.value < b.value; });
  const double scale = std::max(std::abs(a0), std::numeric_limits<double>::min());
  FitResult fit;
  fit.points = n;
  if (hi_it->value - lo_it->value <= 1e-14 * scale) {
    // No spread: pin the amplitude at zero and report the linear (a, b) covariance.
    fit.flat = true;
    fit.baseline = a0;
    fit.amplitude = 0.0;
    fit.center = profile ? profile->center : 0.5 * (pts.front().delta_t + pts.back().delta_t);
    fit.width = profile ? profile->width : span / 6.0;
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d j(1.0, gaussian_term(problem.t[i], fit.center, fit.width));
      info += problem.w[i] * j * j.transpose();
    }
    const Eigen::Matrix2d cov = info.inverse();
    fit.baseline_err = std::sqrt(cov(0, 0));
    fit.amplitude_err = std::sqrt(cov(1, 1));
    fit.cwr = 1.0;
    fit.cwr_err = fit.amplitude_err / std::abs(fit.baseline);
    fit.residual_norm = std::sqrt(problem.chi2(Vec4(fit.baseline, 0.0, fit.center, fit.width)));
    return fit;
  }

  if (profile) {
    if (!(profile->width > 0.0) || !std::isfinite(profile->center)) {
      throw Error(ErrorKind::kValidation, "fixed fit profile needs a finite center and positive width");
    }
    // Linear in (a, b) once the shape is fixed: one weighted solve.
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d j(1.0, gaussian_term(problem.t[i], profile->center, profile->width));
      info += problem.w[i] * j * j.transpose();
      rhs += problem.w[i] * problem.y[i] * j;
    }
    const Eigen::Matrix2d cov = info.inverse();
    const Eigen::Vector2d ab = cov * rhs;
    p << ab[0], ab[1], profile->center, profile->width;
    fit.iterations = 0;
    return finish(fit, p, problem.chi2(p), cov, Eigen::Vector2d::Zero(), shape);
  }

  double chi2 = problem.chi2(p);
  double lambda = 1e-3;
  double growth = 2.0;
  bool converged = false;
  int iteration = 0;
  Mat4 jtj;
  Vec4 jtr;
  for (; iteration < kMaxIterations && !converged; ++iteration) {
    problem.normal_equations(p, jtj, jtr);
    // A bounded parameter sitting on its bound and pushed outward is held fixed
    // for this iteration (projected Levenberg-Marquardt).
    std::array<bool, 4> held{};
    for (int k = 2; k < 4; ++k) {
      held[k] = (p[k] <= lower[k] && jtr[k] < 0.0) || (p[k] >= upper[k] && jtr[k] > 0.0);
    }
    bool accepted = false;
    while (!accepted) {
      // Solve in units where the diagonal of J^T W J is one; the raw matrix
      // mixes rates near 1e-5 with delays near 1e-1.
      Vec4 scale_k;
      for (int k = 0; k < 4; ++k) scale_k[k] = 1.0 / std::sqrt(std::max(jtj(k, k), 1e-300));
      Mat4 damped = scale_k.asDiagonal() * jtj * scale_k.asDiagonal();
      damped.diagonal().array() += lambda;
      Vec4 rhs = scale_k.cwiseProduct(jtr);
      for (int k = 0; k < 4; ++k) {
        if (!held[k]) continue;
        damped.row(k).setZero();
        damped.col(k).setZero();
        damped(k, k) = 1.0;
        rhs[k] = 0.0;
      }
      Vec4 trial = p + scale_k.cwiseProduct(damped.ldlt().solve(rhs));
      for (int k = 2; k < 4; ++k) trial[k] = std::clamp(trial[k], lower[k], upper[k]);
      const Vec4 step = trial - p;
      const double trial_chi2 = trial[3] > 0.0 && step.allFinite() ? problem.chi2(trial)
                                                                  : std::numeric_limits<double>::infinity();
      if (trial_chi2 < chi2) {
        const Vec4 ref(std::abs(p[0]), std::abs(p[0]) + std::abs(p[1]), p[3], p[3]);
        double change = 0.0;
        for (int k = 0; k < 4; ++k) change = std::max(change, std::abs(step[k]) / ref[k]);
        // Gain ratio against the quadratic model; smooth damping update after
        // Nielsen, which avoids ping-ponging between two damping levels.
        const double predicted = 2.0 * step.dot(jtr) - step.dot(jtj * step);
        const double rho = predicted > 0.0 ? (chi2 - trial_chi2) / predicted : 0.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        lambda = std::max(lambda, 1e-15);
        growth = 2.0;
        p = trial;
        chi2 = trial_chi2;
        accepted = true;
        converged = change < kRelativeTolerance;
      } else {
        lambda *= growth;
        growth *= 2.0;
        if (lambda > 1e12) {
          // No downhill step left at any damping: p is a local minimum.
          accepted = true;
          converged = true;
        }
      }
    }
  }
  fit.iterations = iteration;
  fit.residual_norm = std::sqrt(chi2);
  if (!converged) throw FitError("Gaussian fit did not converge in 200 iterations", fit.residual_norm);

  problem.normal_equations(p, jtj, jtr);
  const Mat4 cov = jtj.completeOrthogonalDecomposition().pseudoInverse();
  return finish(fit, p, chi2, cov.topLeftCorner<2, 2>(),
                Eigen::Vector2d(std::sqrt(std::max(cov(2, 2), 0.0)), std::sqrt(std::max(cov(3, 3), 0.0))),
                shape);
}

Measurement visibility(const FitResult& fit) {
  if (fit.amplitude > 0.0) throw Error(ErrorKind::kWrongShape, "visibility needs a dip fit");
  // |b|/a = 1 - cwr, so the CWR error carries over unchanged.
  return Measurement{-fit.amplitude / fit.baseline, fit.cwr_err};
}

EfficiencyEstimate estimate_efficiencies(const FitResult& heralded_peak,
                                         const FitResult& unheralded, double nu_max) {
  const auto solve = [nu_max](double peak_cwr, double dip_cwr) {
    const EffectiveEfficiency output = invert_unheralded_cwr_for_eta2(dip_cwr, nu_max);
    const EffectiveEfficiency herald = invert_cwr_for_eta1(peak_cwr, output, nu_max);
    return std::pair{herald, output};
  };
  const auto [herald, output] = solve(heralded_peak.cwr, unheralded.cwr);
  const double forward_peak = cwr_approx(herald, output, nu_max);
  const double forward_dip = cwr_approx(EffectiveEfficiency(0.0), output, nu_max);
  if (std::abs(forward_peak - heralded_peak.cwr) > 1e-6 ||
      std::abs(forward_dip - unheralded.cwr) > 1e-6) {
    throw Error(ErrorKind::kNoSolution, "CWR pair is not reproduced by any efficiency pair in [0, 1]");
  }
  EfficiencyEstimate estimate{herald, output, 0.0, 0.0};
  // Linear error propagation by central differences, clipped to the attainable range.
  const double h = 1e-6;
  const auto derivative = [&](auto&& f, double x, double err) {
    if (!(err > 0.0)) return 0.0;
    double up = 0.0;
    double down = 0.0;
    try {
      up = f(x + h);
      down = f(x - h);
    } catch (const Error&) {
      return 0.0;
    }
    return std::abs(up - down) / (2.0 * h) * err;
  };
  const double d_output = derivative(
      [&](double c) { return invert_unheralded_cwr_for_eta2(c, nu_max).value(); }, unheralded.cwr,
      unheralded.cwr_err);
  estimate.output_err = d_output;
  const double d_herald_peak = derivative(
      [&](double c) { return invert_cwr_for_eta1(c, output, nu_max).value(); }, heralded_peak.cwr,
      heralded_peak.cwr_err);
  const double d_herald_dip = derivative(
      [&](double c) { return solve(heralded_peak.cwr, c).first.value(); }, unheralded.cwr,
      unheralded.cwr_err);
  estimate.herald_err = std::hypot(d_herald_peak, d_herald_dip);
  return estimate;
}

std::vector<RateComparison> compare_to_model(const RateSummary& summary, const SourceParams& src,
                                             double eta1, double eta2, double nu) {
  const double c1 = p_click_single(src, eta1, nu);
  const double c2 = p_click_single(src, eta2, nu);
  const double both = p_coincidence(src, eta1, eta2, nu);
  const double heralded = p_c2_given_nc1_exact(src, eta1, eta2, nu);
  const auto& k = summary.counts;
  std::vector<RateComparison> out;
  const auto add = [&out](const char* name, double measured, double predicted, std::uint64_t trials) {
    RateComparison c;
    c.name = name;
    c.measured = measured;
    c.predicted = predicted;
    c.stderr_ = trials ? std::sqrt(predicted * (1.0 - predicted) / static_cast<double>(trials)) : 0.0;
    const double deviation = measured - predicted;
    if (c.stderr_ > 0.0) {
      c.z = deviation / c.stderr_;
    } else if (deviation != 0.0) {
      c.deterministic_mismatch = true;
      c.z = std::copysign(std::numeric_limits<double>::infinity(), deviation);
    }
    out.push_back(c);
  };
  add("singles1", summary.singles1, c1, k.live);
  add("singles2", summary.singles2, c2, k.live);
  add("coincidence", summary.coincidence, both, k.live);
  add("heralded_rate", summary.heralded_rate, heralded, k.noclick1);
  add("heralding_success", summary.heralding_success, 1.0 - c1, k.live);
  return out;
}

}  // namespace zeroherald
