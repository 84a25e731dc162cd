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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_support.h"
#include "zeroherald/errors.h"

namespace zh = zeroherald;
using zh::EffectiveEfficiency;
using zh::ErrorKind;
using zh::testing::kind_of;

namespace {

zh::SourceParams source(double gamma, double k1, double k2) {
  zh::SourceParams s;
  s.gamma = gamma;
  s.kappa1 = k1;
  s.kappa2 = k2;
  return s;
}

zh::DetectorParams detector(double eta, double dark) {
  zh::DetectorParams d;
  d.eta = eta;
  d.dark_prob = dark;
  return d;
}

}  // namespace

TEST_CASE("source and detector parameter validation") {
  CHECK_NOTHROW(source(1e-4, 0.5, 0.25).validate());
  CHECK(kind_of([] { source(-0.1, 0.5, 0.5).validate(); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { source(0.1, 1.5, 0.5).validate(); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { detector(0.5, 2.0).validate(); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { EffectiveEfficiency(1.01); }) == ErrorKind::kValidation);

  zh::testing::Draws draws(11);
  for (int i = 0; i < 1000; ++i) {
    const auto s = source(draws.unit(), draws.unit(), draws.unit());
    CHECK(s.kappa_geo() <= s.kappa_mean() + 1e-15);
  }
  CHECK(zh::effective_efficiency(source(1e-4, 0.25, 0.25), 0.64).value() ==
        doctest::Approx(0.16).epsilon(1e-15));
}

TEST_CASE("nu_of_delay profiles") {
  const auto g = zh::IndistinguishabilityProfile::gaussian(0.975, 250.0);
  CHECK(g.nu(0.0) == 0.975);
  CHECK(g.nu(1e9) == 0.0);
  const auto unit = zh::IndistinguishabilityProfile::gaussian(1.0, 3.0);
  CHECK(unit.nu(3.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(unit.nu(3.0) == doctest::Approx(0.3679).epsilon(1e-4));

  const auto t = zh::IndistinguishabilityProfile::triangular(0.9, 10.0);
  CHECK(t.nu(0.0) == 0.9);
  CHECK(t.nu(5.0) == doctest::Approx(0.45));
  CHECK(t.nu(-5.0) == t.nu(5.0));
  CHECK(t.nu(20.0) == 0.0);

  const auto tab = zh::IndistinguishabilityProfile::tabulated({{-2.0, 0.0}, {0.0, 0.8}, {2.0, 0.2}});
  CHECK(tab.nu_max() == 0.8);
  CHECK(tab.nu(1.0) == doctest::Approx(0.5));
  CHECK(tab.nu(-1.0) == doctest::Approx(0.4));
  CHECK(kind_of([&] { tab.nu(2.5); }) == ErrorKind::kOutOfDomain);
  CHECK(kind_of([] { zh::IndistinguishabilityProfile::tabulated({{1.0, 0.1}, {2.0, 0.2}}); }) ==
        ErrorKind::kValidation);
  CHECK(kind_of([] { zh::IndistinguishabilityProfile::tabulated({{0.0, 0.1}, {0.0, 0.2}}); }) ==
        ErrorKind::kValidation);
  CHECK(kind_of([] { zh::IndistinguishabilityProfile::gaussian(0.9, 0.0); }) ==
        ErrorKind::kValidation);

  // Range and evenness over random delays.
  zh::testing::Draws draws(5);
  for (int i = 0; i < 1000; ++i) {
    const double dt = draws.range(-50.0, 50.0);
    for (const auto& p : {g, t, unit}) {
      CHECK(p.nu(dt) >= 0.0);
      CHECK(p.nu(dt) <= p.nu_max());
      CHECK(p.nu(dt) == p.nu(-dt));
    }
  }
}

TEST_CASE("p_noclick_given_n") {
  CHECK(zh::p_noclick_given_n(detector(0.37, 0.0), 0) == 1.0);
  CHECK(zh::p_noclick_given_n(detector(1.0, 0.0), 3) == 0.0);
  // Oracle: enumerate detection of each of two photons; no click needs both missed and no dark.
  double enumerated = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (a == 0 && b == 0) enumerated += 0.5 * 0.5 * 0.99;
    }
  }
  CHECK(enumerated == doctest::Approx(0.2475).epsilon(1e-15));
  CHECK(zh::p_noclick_given_n(detector(0.5, 0.01), 2) == doctest::Approx(0.2475).epsilon(1e-15));
}

TEST_CASE("success_probability and heralded_fidelity") {
  const std::vector<double> half{0.5, 0.5};
  CHECK(zh::success_probability(half, detector(0.5, 0.0)) == doctest::Approx(0.75));
  CHECK(zh::success_probability(std::vector<double>{1.0}, detector(0.3, 0.0)) == 1.0);
  CHECK(zh::success_probability(half, detector(0.5, 0.1)) == doctest::Approx(0.675));
  CHECK(kind_of([&] { zh::success_probability(std::vector<double>{0.5, 0.4}, detector(0.5, 0)); }) ==
        ErrorKind::kValidation);

  CHECK(zh::heralded_fidelity(std::vector<double>{0.2, 0.5, 0.3}, detector(1.0, 0.0)) ==
        doctest::Approx(1.0));
  CHECK(zh::heralded_fidelity(half, detector(0.5, 0.0)) == doctest::Approx(2.0 / 3.0));
  CHECK(zh::heralded_fidelity(half, detector(0.0, 0.0)) == doctest::Approx(0.5));
  CHECK(kind_of([] { zh::heralded_fidelity(std::vector<double>{0.0, 1.0}, detector(1.0, 0.0)); }) ==
        ErrorKind::kDegenerateInput);

  // Dark counts cancel out of the fidelity.
  zh::testing::Draws draws(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> dist{draws.unit() + 0.01, draws.unit(), draws.unit()};
    double total = dist[0] + dist[1] + dist[2];
    for (double& p : dist) p /= total;
    const double eta = draws.unit();
    CHECK(zh::heralded_fidelity(dist, detector(eta, 0.0)) ==
          zh::heralded_fidelity(dist, detector(eta, 0.5)));
  }
}

TEST_CASE("output_distribution") {
  const auto ideal_bunched = zh::output_distribution(source(1e-4, 1.0, 1.0), 1.0);
  CHECK(ideal_bunched.p11 == 0.0);

  const auto dist = zh::output_distribution(source(4e-4, 1.0, 1.0), 0.0);
  CHECK(dist.p20 == doctest::Approx(1e-4).epsilon(1e-14));
  CHECK(dist.p02 == doctest::Approx(1e-4).epsilon(1e-14));
  CHECK(dist.p11 == doctest::Approx(2e-4).epsilon(1e-14));
  CHECK(dist.p11 / dist.p20 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(dist.at(2, 0) == dist.p20);
  CHECK(dist.at(2, 2) == 0.0);

  zh::testing::Draws draws(7);
  for (int i = 0; i < 10000; ++i) {
    const double g = draws.unit(), k1 = draws.unit(), k2 = draws.unit(), nu = draws.unit();
    const auto d = zh::output_distribution(source(g, k1, k2), nu);
    CHECK(std::abs(d.sum() - 1.0) <= 1e-12);
    CHECK(d.p10 == d.p01);
    CHECK(d.p20 == d.p02);
    for (double p : {d.p00, d.p10, d.p01, d.p11, d.p20, d.p02}) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    const auto oracle = zh::testing::enumerate_outputs(g, k1, k2, nu);
    for (int m = 0; m < 3; ++m) {
      for (int n = 0; n + m < 3; ++n) {
        CHECK(std::abs(d.at(m, n) - oracle[m][n]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("singles and coincidence probabilities") {
  const auto ideal = source(1e-4, 1.0, 1.0);
  CHECK(zh::p_click_single(ideal, 0.0, 0.3) == 0.0);
  CHECK(zh::p_click_single(ideal, 1.0, 0.0) == doctest::Approx(0.75e-4).epsilon(1e-13));

  const auto half = source(1e-4, 0.5, 0.5);
  const auto d = zh::output_distribution(half, 0.975);
  const double table_value = 0.3 * (d.p10 + d.p11) + (2 * 0.3 - 0.3 * 0.3) * d.p20;
  CHECK(zh::p_click_single(half, 0.3, 0.975) == doctest::Approx(table_value).epsilon(1e-13));
  CHECK(table_value == doctest::Approx(1.38890625e-05).epsilon(1e-12));

  CHECK(zh::p_coincidence(ideal, 0.7, 0.4, 1.0) == 0.0);
  CHECK(zh::p_coincidence(ideal, 1.0, 1.0, 0.0) == doctest::Approx(0.5e-4).epsilon(1e-13));
  CHECK(zh::p_coincidence(source(0.0, 0.6, 0.6), 1.0, 1.0, 0.0) == 0.0);

  // Oracle equivalence on random parameters.
  zh::testing::Draws draws(13);
  for (int i = 0; i < 5000; ++i) {
    const double g = draws.unit(), k1 = draws.unit(), k2 = draws.unit();
    const double e1 = draws.unit(), e2 = draws.unit(), nu = draws.unit();
    const auto oracle = zh::testing::brute_force_clicks(g, k1, k2, e1, e2, nu);
    const auto s = source(g, k1, k2);
    CHECK(std::abs(zh::p_click_single(s, e1, nu) - oracle.c1) <= 1e-12);
    CHECK(std::abs(zh::p_click_single(s, e2, nu) - oracle.c2) <= 1e-12);
    CHECK(std::abs(zh::p_coincidence(s, e1, e2, nu) - oracle.both) <= 1e-12);
  }
}

TEST_CASE("p_c2_given_nc1_exact") {
  const auto s = source(1e-4, 0.5, 0.5);
  CHECK(zh::p_c2_given_nc1_exact(s, 0.0, 0.3, 0.4) == zh::p_click_single(s, 0.3, 0.4));

  // Only the (2,0) and (0,2) branches survive a perfect no-click; (0,2) clicks D2.
  const double perfect = zh::p_c2_given_nc1_exact(source(1e-4, 1.0, 1.0), 1.0, 1.0, 1.0);
  CHECK(perfect == doctest::Approx(5.000250012500625e-05).epsilon(1e-12));
  CHECK(perfect == doctest::Approx(0.5e-4).epsilon(1e-4));

  const double exact = zh::p_c2_given_nc1_exact(source(1e-4, 0.25, 0.25), 0.64, 0.60, 0.975);
  CHECK(exact == doctest::Approx(1.3859266730154535e-05).epsilon(1e-12));
  const double approx = zh::p_c2_given_nc1_approx(EffectiveEfficiency(0.16), EffectiveEfficiency(0.15),
                                                  1e-4, 0.975);
  CHECK(std::abs(exact - approx) / exact <= 1e-3);

  CHECK_NOTHROW(zh::p_c2_given_nc1_exact(source(1.0, 1.0, 1.0), 1.0, 1.0, 1.0));

  zh::testing::Draws draws(17);
  for (int i = 0; i < 2000; ++i) {
    const double g = draws.unit(), k1 = draws.unit(), k2 = draws.unit();
    const double e1 = draws.unit(), e2 = draws.unit(), nu = draws.unit();
    const auto oracle = zh::testing::brute_force_clicks(g, k1, k2, e1, e2, nu);
    CHECK(zh::p_c2_given_nc1_exact(source(g, k1, k2), e1, e2, nu) ==
          doctest::Approx(oracle.c2_given_nc1).epsilon(1e-10));
  }
}

TEST_CASE("approximation consistency on balanced coupling") {
  for (double kappa : {0.25, 0.5, 1.0}) {
    for (double nu : {0.0, 0.5, 0.975}) {
      for (int i = 1; i <= 20; ++i) {
        for (int j = 1; j <= 20; ++j) {
          const double e1 = i / 20.0, e2 = j / 20.0;
          const double exact = zh::p_c2_given_nc1_exact(source(1e-4, kappa, kappa), e1, e2, nu);
          const double approx = zh::p_c2_given_nc1_approx(
              EffectiveEfficiency(kappa * e1), EffectiveEfficiency(kappa * e2), 1e-4, nu);
          CHECK(std::abs(exact - approx) / exact <= 1e-3);
        }
      }
    }
  }
}

TEST_CASE("p_c2_given_nc1_approx") {
  const EffectiveEfficiency one(1.0);
  for (double o : {0.15, 0.5, 1.0}) {
    const double at0 = zh::p_c2_given_nc1_approx(one, EffectiveEfficiency(o), 1e-4, 0.0);
    for (double nu : {0.25, 0.5, 1.0}) {
      const double at_nu = zh::p_c2_given_nc1_approx(one, EffectiveEfficiency(o), 1e-4, nu);
      CHECK(at_nu / at0 == doctest::Approx(1.0 + nu).epsilon(1e-14));
    }
  }
  CHECK(zh::p_c2_given_nc1_approx(EffectiveEfficiency(0.4), EffectiveEfficiency(0.0), 1e-4, 0.5) == 0.0);

  const double ratio =
      zh::p_c2_given_nc1_approx(EffectiveEfficiency(0.16), EffectiveEfficiency(0.15), 1e-4, 0.975) /
      zh::p_c2_given_nc1_approx(EffectiveEfficiency(0.16), EffectiveEfficiency(0.15), 1e-4, 0.0);
  CHECK(ratio == doctest::Approx(1.0469546742209632).epsilon(1e-13));
  CHECK(ratio == doctest::Approx(1.047).epsilon(1e-3));
}

TEST_CASE("cwr_approx") {
  for (double o : {0.0, 0.15, 0.5, 1.0}) {
    CHECK(zh::cwr_approx(EffectiveEfficiency(1.0), EffectiveEfficiency(o), 1.0) == 2.0);
  }
  for (double nu : {0.3, 0.975, 1.0}) {
    CHECK(zh::cwr_approx(EffectiveEfficiency(0.075), EffectiveEfficiency(0.15), nu) == 1.0);
  }
  CHECK(zh::cwr_approx(EffectiveEfficiency(0.0), EffectiveEfficiency(1.0), 1.0) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const double peak = zh::cwr_approx(EffectiveEfficiency(0.16), EffectiveEfficiency(0.15), 0.975);
  const double dip = zh::cwr_approx(EffectiveEfficiency(0.0), EffectiveEfficiency(0.15), 0.975);
  CHECK(std::abs(peak - 1.047) <= 1e-3);
  CHECK(std::abs(dip - 0.962) <= 1e-3);
  CHECK(std::round(peak * 100) / 100 == 1.05);
  CHECK(std::round(dip * 100) / 100 == 0.96);

  zh::testing::Draws draws(23);
  for (int i = 0; i < 5000; ++i) {
    const EffectiveEfficiency h(draws.unit()), o(draws.unit());
    const double nu = draws.unit();
    const double ratio = zh::p_c2_given_nc1_approx(h, o, 1e-4, nu) /
                         zh::p_c2_given_nc1_approx(h, o, 1e-4, 0.0);
    CHECK(zh::cwr_approx(h, o, nu) == doctest::Approx(ratio).epsilon(1e-12));
    const double c = zh::cwr_approx(h, o, 1.0);
    CHECK(c >= 2.0 / 3.0 - 1e-15);
    CHECK(c <= 2.0 + 1e-15);
  }
  // Strictly increasing in the heralding efficiency.
  for (double o : {0.05, 0.15, 0.5, 1.0}) {
    double previous = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double c = zh::cwr_approx(EffectiveEfficiency(i / 100.0), EffectiveEfficiency(o), 0.9);
      CHECK(c > previous);
      previous = c;
    }
  }
}

TEST_CASE("invert_cwr_for_eta1") {
  CHECK(zh::invert_cwr_for_eta1(1.0, EffectiveEfficiency(0.15), 0.975).value() ==
        doctest::Approx(0.075).epsilon(1e-12));
  CHECK(zh::invert_cwr_for_eta1(2.0, EffectiveEfficiency(0.5), 1.0).value() ==
        doctest::Approx(1.0).epsilon(1e-12));
  const double h = zh::invert_cwr_for_eta1(1.047, EffectiveEfficiency(0.15), 0.975).value();
  CHECK(h == doctest::Approx(0.16007827788649698).epsilon(1e-9));
  CHECK(zh::cwr_approx(EffectiveEfficiency(h), EffectiveEfficiency(0.15), 0.975) ==
        doctest::Approx(1.047).epsilon(1e-9));

  CHECK(kind_of([] { zh::invert_cwr_for_eta1(2.5, EffectiveEfficiency(0.15), 0.975); }) ==
        ErrorKind::kNoSolution);
  CHECK(kind_of([] { zh::invert_cwr_for_eta1(0.5, EffectiveEfficiency(0.15), 0.975); }) ==
        ErrorKind::kNoSolution);
  CHECK(kind_of([] { zh::invert_cwr_for_eta1(1.0, EffectiveEfficiency(0.15), 0.0); }) ==
        ErrorKind::kNoSolution);

  zh::testing::Draws draws(29);
  for (int i = 0; i < 5000; ++i) {
    const EffectiveEfficiency h0(draws.unit()), o(draws.unit());
    const double nu = draws.range(0.05, 1.0);
    const double c = zh::cwr_approx(h0, o, nu);
    const auto back = zh::invert_cwr_for_eta1(c, o, nu);
    CHECK(zh::cwr_approx(back, o, nu) == doctest::Approx(c).epsilon(1e-9));
    CHECK(back.value() == doctest::Approx(h0.value()).epsilon(1e-7));
  }
}

TEST_CASE("invert_unheralded_cwr_for_eta2") {
  CHECK(zh::invert_unheralded_cwr_for_eta2(0.962, 0.975).value() ==
        doctest::Approx(0.15004935834155986).epsilon(1e-9));
  CHECK(zh::invert_unheralded_cwr_for_eta2(2.0 / 3.0, 1.0).value() == doctest::Approx(1.0));
  CHECK(zh::invert_unheralded_cwr_for_eta2(1.0, 0.5).value() == 0.0);
  CHECK(kind_of([] { zh::invert_unheralded_cwr_for_eta2(1.1, 0.5); }) == ErrorKind::kNoSolution);
  CHECK(kind_of([] { zh::invert_unheralded_cwr_for_eta2(0.6, 1.0); }) == ErrorKind::kNoSolution);
}
