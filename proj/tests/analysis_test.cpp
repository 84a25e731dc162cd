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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "test_support.h"
#include "zeroherald/errors.h"
#include "zeroherald/sim.h"

namespace zh = zeroherald;
using zh::EffectiveEfficiency;
using zh::ErrorKind;
using zh::FitPoint;
using zh::FitShape;
using zh::testing::kind_of;

namespace {

using Clicks = std::vector<std::uint64_t>;

zh::PulseEventTable table(Clicks d1, Clicks d2, std::uint64_t rows, std::uint32_t dead = 0) {
  return zh::build_event_table({std::move(d1), std::move(d2)}, rows, dead);
}

zh::SourceParams source(double gamma, double kappa) {
  zh::SourceParams s;
  s.gamma = gamma;
  s.kappa1 = kappa;
  s.kappa2 = kappa;
  return s;
}

std::vector<double> delays(double tau) {
  std::vector<double> d;
  for (int i = -6; i <= 6; ++i) d.push_back(0.5 * tau * i);
  return d;
}

// Heralded-rate curve sampled from the exact closed form with binomial noise.
std::vector<FitPoint> noisy_heralded_curve(std::mt19937_64& engine, double eta1, double eta2,
                                           double trials) {
  const auto src = source(1e-4, 0.5);
  const auto profile = zh::IndistinguishabilityProfile::gaussian(0.975, 0.1);
  std::vector<FitPoint> pts;
  for (double t : delays(0.1)) {
    const double p = zh::p_c2_given_nc1_exact(src, eta1, eta2, profile.nu(t));
    const auto k = std::binomial_distribution<std::uint64_t>(static_cast<std::uint64_t>(trials), p)(engine);
    pts.push_back({t, static_cast<double>(k) / trials, std::sqrt(static_cast<double>(k)) / trials});
  }
  return pts;
}

}  // namespace

TEST_CASE("all-no-click table") {
  const auto s = zh::compute_rates(table({}, {}, 100), 0.0);
  CHECK(s.counts.live == 100);
  CHECK(s.singles1 == 0.0);
  CHECK(s.singles2 == 0.0);
  CHECK(s.coincidence == 0.0);
  CHECK(s.heralded_rate == 0.0);
  CHECK(s.heralding_success == 1.0);
}

TEST_CASE("ten-row counting fixture") {
  // D1 clicks on rows 0-3, so 6 rows are no-click; D2 clicks on 4 and 7 among
  // those, plus a coincidence on row 1.
  const auto s = zh::compute_rates(table({0, 1, 2, 3}, {1, 4, 7}, 10), 12.5);
  CHECK(s.delta_t_ps == 12.5);
  CHECK(s.counts.noclick1 == 6);
  CHECK(s.counts.heralded_clicks == 2);
  CHECK(s.heralded_rate == 1.0 / 3.0);
  CHECK(s.heralding_success == 0.6);
  CHECK(s.singles2 == 0.3);
  CHECK(s.coincidence == 0.1);
  CHECK(s.heralded_rate_err == doctest::Approx(std::sqrt(2.0) / 6.0));
}

TEST_CASE("dead rows are left out of numerator and denominator") {
  // Dead time 2. D1 clicks on 0, so rows 1-2 are dead on D1; D2 clicks on 2
  // and 5, so rows 3-4 and 6-7 are dead on D2. Live rows: 0 and 5.
  const auto s = zh::compute_rates(table({0}, {2, 5}, 8, 2), 0.0);
  CHECK(s.counts.rows == 8);
  CHECK(s.counts.live == 2);
  CHECK(s.counts.clicks1 == 1);
  CHECK(s.counts.clicks2 == 1);
  CHECK(s.counts.coincidences == 0);
  CHECK(s.counts.noclick1 == 1);
  CHECK(s.heralded_rate == 1.0);
}

TEST_CASE("rate errors") {
  CHECK(kind_of([] { zh::compute_rates(table({}, {}, 0), 0.0); }) == ErrorKind::kEmptyInput);
  CHECK(kind_of([] { zh::compute_rates(table({0, 1, 2}, {}, 3), 0.0); }) == ErrorKind::kUndefinedRate);
}

TEST_CASE("estimator identities on random tables") {
  zh::testing::Draws draws(31);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t rows = 1 + draws.below(200);
    Clicks c1;
    Clicks c2;
    for (std::uint64_t k = 0; k < rows; ++k) {
      if (draws.unit() < 0.2) c1.push_back(k);
      if (draws.unit() < 0.3) c2.push_back(k);
    }
    const auto dead = static_cast<std::uint32_t>(draws.below(4));
    const auto t = table(c1, c2, rows, dead);
    const auto c = zh::count_events(t);
    // Singles at D2 split exactly into heralded and coincident clicks.
    CHECK(c.clicks2 == c.heralded_clicks + c.coincidences);
    CHECK(c.noclick1 + c.clicks1 == c.live);
    std::uint64_t live = 0;
    for (const auto& row : t.dense_rows()) {
      live += row.d1 != zh::PulseState::kDead && row.d2 != zh::PulseState::kDead;
    }
    CHECK(c.live == live);

    // Counting is additive over row partitions.
    const std::uint64_t cut = rows / 2;
    std::vector<zh::EventRow> head;
    std::vector<zh::EventRow> tail;
    for (auto row : t.sparse_rows()) {
      if (row.pulse < cut) {
        head.push_back(row);
      } else {
        row.pulse -= cut;
        tail.push_back(row);
      }
    }
    auto parts = zh::count_events(zh::PulseEventTable(cut, dead, head));
    parts += zh::count_events(zh::PulseEventTable(rows - cut, dead, tail));
    CHECK(parts == c);
  }
}

TEST_CASE("click lag histogram") {
  const auto t = table({0, 2, 3, 9}, {5}, 12);
  const auto h = zh::click_lag_histogram(t, zh::Channel::kD1, 5);
  CHECK(h == std::vector<std::uint64_t>{0, 1, 1, 0, 0, 0});
  CHECK(kind_of([&] { zh::click_lag_histogram(t, zh::Channel::kRef, 5); }) == ErrorKind::kValidation);
}

TEST_CASE("exact Gaussian samples are recovered") {
  const double a = 2.0e-5;
  const double b = 7.0e-6;
  const double t0 = 0.013;
  const double sigma = 0.07;
  std::vector<FitPoint> pts;
  for (double t : delays(0.1)) {
    pts.push_back({t, a + b * std::exp(-0.5 * (t - t0) * (t - t0) / (sigma * sigma)), 1e-7});
  }
  const auto fit = zh::gaussian_fit(pts, FitShape::kPeak);
  CHECK(fit.baseline == doctest::Approx(a).epsilon(1e-6));
  CHECK(fit.amplitude == doctest::Approx(b).epsilon(1e-6));
  CHECK(fit.center == doctest::Approx(t0).epsilon(1e-6));
  CHECK(fit.width == doctest::Approx(sigma).epsilon(1e-6));
  CHECK(fit.residual_norm < 1e-6);
  CHECK(fit.points == 13);
  CHECK(fit.evaluate(t0) == doctest::Approx(a + b));

  // Input order does not matter.
  std::vector<FitPoint> reversed(pts.rbegin(), pts.rend());
  const auto again = zh::gaussian_fit(reversed, FitShape::kAuto);
  CHECK(again.cwr == fit.cwr);
}

TEST_CASE("fit with a fixed center and width") {
  const double a = 1.4e-5;
  const double b = -6.0e-7;
  const zh::FitProfile shape{0.004, 0.0707};
  std::vector<FitPoint> pts;
  for (double t : delays(0.1)) {
    const double u = (t - shape.center) / shape.width;
    pts.push_back({t, a + b * std::exp(-0.5 * u * u), 2e-7});
  }
  const auto fit = zh::gaussian_fit(pts, FitShape::kAuto, shape);
  CHECK(fit.baseline == doctest::Approx(a).epsilon(1e-12));
  CHECK(fit.amplitude == doctest::Approx(b).epsilon(1e-9));
  CHECK(fit.center == shape.center);
  CHECK(fit.width == shape.width);
  CHECK(fit.center_err == 0.0);
  CHECK(fit.width_err == 0.0);
  CHECK(fit.cwr == doctest::Approx((a + b) / a).epsilon(1e-12));
  CHECK(fit.cwr_err > 0.0);

  // Locking the shape can only shrink the amplitude uncertainty.
  const auto free = zh::gaussian_fit(pts, FitShape::kAuto);
  CHECK(fit.amplitude_err <= free.amplitude_err);

  CHECK(kind_of([&] { zh::gaussian_fit(pts, FitShape::kPeak, shape); }) == ErrorKind::kFit);
  CHECK(kind_of([&] { zh::gaussian_fit(pts, FitShape::kAuto, zh::FitProfile{0.0, 0.0}); }) ==
        ErrorKind::kValidation);
}

TEST_CASE("fit of the heralded-rate closed form") {
  const auto profile = zh::IndistinguishabilityProfile::gaussian(0.975, 0.1);
  const EffectiveEfficiency h1(0.16);
  const EffectiveEfficiency h2(0.15);
  std::vector<FitPoint> peak;
  std::vector<FitPoint> dip;
  for (double t : delays(0.1)) {
    const double nu = profile.nu(t);
    peak.push_back({t, zh::p_c2_given_nc1_approx(h1, h2, 1e-4, nu), 1e-7});
    dip.push_back({t, zh::p_c2_given_nc1_approx(EffectiveEfficiency(0.0), h2, 1e-4, nu), 1e-7});
  }
  const auto p = zh::gaussian_fit(peak, FitShape::kPeak);
  const auto d = zh::gaussian_fit(dip, FitShape::kDip);
  CHECK(std::abs(p.cwr - zh::cwr_approx(h1, h2, 0.975)) < 0.005);
  CHECK(std::abs(p.cwr - 1.047) < 0.005);
  CHECK(std::abs(d.cwr - 0.962) < 0.005);
  // tau is the 1/e half-width, so the fitted sigma is tau / sqrt(2).
  CHECK(p.width == doctest::Approx(0.1 / std::sqrt(2.0)).epsilon(1e-6));

  CHECK(zh::gaussian_fit(dip, FitShape::kAuto).amplitude < 0.0);
  CHECK(zh::gaussian_fit(peak, FitShape::kAuto).amplitude > 0.0);
}

TEST_CASE("flat data") {
  std::vector<FitPoint> pts;
  for (double t : delays(0.1)) pts.push_back({t, 3e-5, 1e-6});
  const auto fit = zh::gaussian_fit(pts);
  CHECK(fit.flat);
  CHECK(fit.amplitude == 0.0);
  CHECK(fit.cwr == 1.0);
  CHECK(fit.cwr_err > 0.0);
  CHECK(fit.baseline == doctest::Approx(3e-5));
}

TEST_CASE("fit input checks") {
  std::vector<FitPoint> few{{0, 1, 1}, {1, 1, 1}, {2, 2, 1}, {3, 1, 1}};
  CHECK(kind_of([&] { zh::gaussian_fit(few); }) == ErrorKind::kValidation);
  std::vector<FitPoint> same_delay(6, FitPoint{1.0, 1.0, 0.1});
  same_delay[2].value = 2.0;
  CHECK(kind_of([&] { zh::gaussian_fit(same_delay); }) == ErrorKind::kValidation);
}

TEST_CASE("visibility") {
  zh::FitResult fit;
  fit.baseline = 1.0;
  fit.amplitude = -0.975;
  CHECK(zh::visibility(fit).value == doctest::Approx(0.975));
  fit.amplitude = 0.0;
  CHECK(zh::visibility(fit).value == 0.0);
  fit.amplitude = 0.2;
  CHECK(kind_of([&] { zh::visibility(fit); }) == ErrorKind::kWrongShape);
}

TEST_CASE("efficiency extraction") {
  zh::FitResult peak;
  zh::FitResult flat;
  flat.cwr = 0.962;
  peak.cwr = 1.047;
  const auto e = zh::estimate_efficiencies(peak, flat, 0.975);
  CHECK(std::abs(e.output.value() - 0.15) < 0.001);
  CHECK(std::abs(e.herald.value() - 0.16) < 0.002);

  peak.cwr = zh::cwr_approx(EffectiveEfficiency(0.3), EffectiveEfficiency(0.2), 1.0);
  flat.cwr = zh::cwr_approx(EffectiveEfficiency(0.0), EffectiveEfficiency(0.2), 1.0);
  peak.cwr_err = 0.01;
  flat.cwr_err = 0.005;
  const auto r = zh::estimate_efficiencies(peak, flat, 1.0);
  CHECK(std::abs(r.herald.value() - 0.3) < 1e-6);
  CHECK(std::abs(r.output.value() - 0.2) < 1e-6);
  CHECK(r.herald_err > 0.0);
  CHECK(r.output_err > 0.0);

  flat.cwr = 0.5;
  CHECK(kind_of([&] { zh::estimate_efficiencies(peak, flat, 1.0); }) == ErrorKind::kNoSolution);
  flat.cwr = 0.962;
  peak.cwr = 2.5;
  CHECK(kind_of([&] { zh::estimate_efficiencies(peak, flat, 0.975); }) == ErrorKind::kNoSolution);
}

TEST_CASE("comparison against the model") {
  // No pairs: everything is zero and z is defined as zero.
  const auto zero = zh::compare_to_model(zh::compute_rates(table({}, {}, 1000), 0.0), source(0.0, 1.0),
                                         0.5, 0.5, 0.0);
  for (const auto& c : zero) {
    CHECK(c.z == 0.0);
    CHECK_FALSE(c.deterministic_mismatch);
  }
  // A click where the model allows none is a deterministic mismatch.
  const auto bad = zh::compare_to_model(zh::compute_rates(table({3}, {}, 1000), 0.0), source(0.0, 1.0),
                                        0.5, 0.5, 0.0);
  CHECK(bad[0].deterministic_mismatch);
  CHECK(std::isinf(bad[0].z));
}

TEST_CASE("z-scores are calibrated on model-generated counts") {
  const auto src = source(1e-3, 0.5);
  const double eta1 = 0.32;
  const double eta2 = 0.30;
  const double nu = 0.6;
  const double c1 = zh::p_click_single(src, eta1, nu);
  const double c2 = zh::p_click_single(src, eta2, nu);
  const double both = zh::p_coincidence(src, eta1, eta2, nu);
  std::mt19937_64 engine(17);
  int clean = 0;
  const auto synth = [&](std::uint64_t n, double e1, double e2) {
    // Multinomial over (both, D1 only, D2 only, neither) by sequential binomials.
    zh::RateCounts c;
    c.rows = c.live = n;
    c.coincidences = std::binomial_distribution<std::uint64_t>(n, both)(engine);
    const auto only1 = std::binomial_distribution<std::uint64_t>(n - c.coincidences, (c1 - both) / (1 - both))(engine);
    const auto only2 = std::binomial_distribution<std::uint64_t>(
        n - c.coincidences - only1, (c2 - both) / (1 - c1))(engine);
    c.clicks1 = c.coincidences + only1;
    c.clicks2 = c.coincidences + only2;
    c.noclick1 = n - c.clicks1;
    c.heralded_clicks = only2;
    return zh::compare_to_model(zh::summarize(c, 0.0), src, e1, e2, nu);
  };
  for (int seed = 0; seed < 100; ++seed) {
    bool ok = true;
    for (const auto& r : synth(1000000, eta1, eta2)) ok = ok && std::abs(r.z) < 3.0;
    clean += ok;
  }
  // All five rates inside 3 sigma happens with probability about 0.989 per
  // seed, so about one seed in a hundred is expected to show an excursion.
  CHECK(clean >= 96);

  // A wrong efficiency in the prediction is exposed more strongly with more data.
  const double z_small = std::abs(synth(100000, 0.25, eta2)[0].z);
  const double z_large = std::abs(synth(10000000, 0.25, eta2)[0].z);
  CHECK(z_large > 5.0 * z_small);
  CHECK(z_large > 10.0);
}

TEST_CASE("fitted CWR is unbiased over 100 noisy scans") {
  std::mt19937_64 engine(2026);
  const double eta1 = 0.32;
  const double eta2 = 0.30;
  const auto src = source(1e-4, 0.5);
  const double expected = zh::p_c2_given_nc1_exact(src, eta1, eta2, 0.975) /
                          zh::p_c2_given_nc1_exact(src, eta1, eta2, 0.0);
  double sum = 0.0;
  double sum_err = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto fit = zh::gaussian_fit(noisy_heralded_curve(engine, eta1, eta2, 1e9), FitShape::kAuto);
    sum += fit.cwr;
    sum_err += fit.cwr_err;
  }
  const double mean = sum / 100.0;
  const double mean_err = sum_err / 100.0;
  CHECK(std::abs(mean - expected) < mean_err);
}

TEST_CASE("simulated heralded rate at zero indistinguishability") {
  zh::SimConfig cfg;
  cfg.source = source(1e-4, 0.5);
  cfg.det1.eta = 0.32;
  cfg.det2.eta = 0.30;
  cfg.profile = zh::IndistinguishabilityProfile::gaussian(0.975, 0.1);
  cfg.delta_t_ps = 10.0;  // far wing: nu underflows to zero
  cfg.n_pulses = 100000000;
  cfg.seed = 4;
  const auto sim = zh::run_simulation(cfg);
  const auto s = zh::compute_rates(zh::run_pipeline(sim.stream, {}).table, cfg.delta_t_ps);
  const double predicted = zh::p_c2_given_nc1_exact(cfg.source, 0.32, 0.30, 0.0);
  CHECK(std::abs(s.heralded_rate - predicted) < 3.0 * s.heralded_rate_err);
}

TEST_CASE("CWR crosses one where the heralding efficiency is half the output efficiency") {
  // eta' = kappa * eta with kappa = 1, output efficiency 0.4.
  const auto scan_b = [](double eta1) {
    zh::SimConfig cfg;
    cfg.source = source(1e-2, 1.0);
    cfg.det1.eta = eta1;
    cfg.det2.eta = 0.4;
    cfg.profile = zh::IndistinguishabilityProfile::gaussian(1.0, 0.1);
    cfg.n_pulses = 10000000;
    cfg.seed = 600;
    const auto dts = delays(0.1);
    std::vector<FitPoint> pts;
    for (const auto& point : zh::scan_delays(cfg, dts)) {
      const auto s = zh::compute_rates(zh::run_pipeline(point.result.stream, {}).table, point.delta_t_ps);
      pts.push_back({point.delta_t_ps, s.heralded_rate, s.heralded_rate_err});
    }
    const auto fit = zh::gaussian_fit(pts, FitShape::kAuto);
    return fit.amplitude / fit.amplitude_err;
  };
  CHECK(scan_b(0.8) > 5.0);
  CHECK(scan_b(0.02) < -5.0);
  CHECK(std::abs(scan_b(0.2)) < 3.0);
}
