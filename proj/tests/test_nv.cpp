#include <cmath>
#include <vector>

#include <doctest.h>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/nv.hpp"

using namespace dqm;

TEST_CASE("resonance center follows the linear Zeeman shift") {
  // 2.870 GHz - 28.024 GHz/T * 1 mT
  CHECK(resonance_center(1e-3, transition::zero_to_minus_one) ==
        doctest::Approx(2.841976e9).epsilon(1e-12));
  CHECK(resonance_center(1e-3, transition::zero_to_plus_one) ==
        doctest::Approx(2.898024e9).epsilon(1e-12));
  CHECK(resonance_center(0.0, transition::zero_to_minus_one) == 2.870e9);
  // the two branches move symmetrically
  const double b = 0.7e-3;
  const double lo = resonance_center(b, transition::zero_to_minus_one);
  const double hi = resonance_center(b, transition::zero_to_plus_one);
  CHECK(hi - 2.870e9 == doctest::Approx(2.870e9 - lo));
}

TEST_CASE("linear Zeeman model refuses high fields") {
  CHECK_THROWS_AS(resonance_center(10e-3, transition::zero_to_minus_one),
                  invalid_argument_error);
  CHECK_THROWS_AS(resonance_center(-11e-3, transition::zero_to_plus_one),
                  invalid_argument_error);
  CHECK_NOTHROW(resonance_center(9.9e-3, transition::zero_to_minus_one));
}

TEST_CASE("three-tone drive builds the coincidence comb") {
  const double a = 2.16e6;
  const double c = 0.004;
  const auto set = build_resonance_set(2.87e9, a, c, 200e3, true);
  REQUIRE(set.lines.size() == 5);
  const double offsets[5] = {-2 * a, -a, 0.0, a, 2 * a};
  const double counts[5] = {1, 2, 3, 2, 1};
  for (int i = 0; i < 5; ++i) {
    CHECK(set.lines[i].offset_hz == offsets[i]);
    CHECK(set.lines[i].weight == doctest::Approx(counts[i] * c));
  }
}

TEST_CASE("single-tone drive sees each hyperfine line once") {
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, false);
  REQUIRE(set.lines.size() == 3);
  CHECK(set.lines[0].offset_hz == -2.16e6);
  CHECK(set.lines[1].offset_hz == 0.0);
  CHECK(set.lines[2].offset_hz == 2.16e6);
  for (const auto& l : set.lines) CHECK(l.weight == doctest::Approx(0.004));
}

TEST_CASE("zero hyperfine splitting collapses the comb to one line") {
  const auto three = build_resonance_set(2.87e9, 0.0, 0.004, 200e3, true);
  REQUIRE(three.lines.size() == 1);
  CHECK(three.lines[0].weight == doctest::Approx(9 * 0.004));
  const auto single = build_resonance_set(2.87e9, 0.0, 0.004, 200e3, false);
  REQUIRE(single.lines.size() == 1);
  CHECK(single.lines[0].weight == doctest::Approx(3 * 0.004));
}

TEST_CASE("fluorescence at the comb center sums the overlapping dips") {
  const double a = 2.16e6;
  const double c = 0.004;
  const double fwhm = 200e3;
  const auto set = build_resonance_set(2.87e9, a, c, fwhm, true);
  // hand-summed Lorentzians: 3c at zero detuning plus the neighbour tails
  const double g2 = 1e5 * 1e5;
  const double expected = 1.0 - (3 * c + 2 * (2 * c) * g2 / (a * a + g2) +
                                 2 * c * g2 / (4 * a * a + g2));
  CHECK(fluorescence_factor(set, 2.87e9) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(fluorescence_factor(set, 2.87e9) == doctest::Approx(0.9879614954).epsilon(1e-9));
}

TEST_CASE("fluorescence approaches unity far from resonance and never hits zero") {
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, true);
  CHECK(fluorescence_factor(set, 2.87e9 + 500e6) == doctest::Approx(1.0).epsilon(1e-6));
  // heavily overlapped strong dips would go negative without the clamp
  const auto strong = build_resonance_set(2.87e9, 10e3, 0.34, 500e3, true);
  const double f = fluorescence_factor(strong, 2.87e9);
  CHECK(f > 0.0);
  CHECK(f <= 1e-6);
}

TEST_CASE("first harmonic vanishes at the symmetry point") {
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, true);
  CHECK(std::abs(lockin_first_harmonic(set, 2.87e9, 100e3)) < 1e-10);
  CHECK(lockin_first_harmonic(set, 2.87e9 - 80e3, 0.0) == 0.0);
}

TEST_CASE("small-deviation first harmonic reduces to the curve slope") {
  // Taylor expansion of the demodulation integral: a1 -> f_dev * dF/df
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, true);
  for (double detune : {-100e3, -50e3, 60e3, 140e3}) {
    const double fc = 2.87e9 + detune;
    const double dev = 50.0;
    const double h = 1.0;
    const double slope =
        (fluorescence_factor(set, fc + h) - fluorescence_factor(set, fc - h)) / (2 * h);
    CHECK(lockin_first_harmonic(set, fc, dev) ==
          doctest::Approx(dev * slope).epsilon(1e-4));
  }
}

TEST_CASE("first harmonic sign tracks the side of the dip") {
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, true);
  CHECK(lockin_first_harmonic(set, 2.87e9 - 100e3, 100e3) < 0.0);
  CHECK(lockin_first_harmonic(set, 2.87e9 + 100e3, 100e3) > 0.0);
}

TEST_CASE("adaptive quadrature agrees with a dense reference sum") {
  const auto set = build_resonance_set(2.87e9, 2.16e6, 0.004, 200e3, true);
  const double fc = 2.87e9 + 120e3;
  const double dev = 100e3;
  const int n = 1 << 16;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double theta = two_pi * (k + 0.5) / n;
    acc += fluorescence_factor(set, fc + dev * std::cos(theta)) * std::cos(theta);
  }
  const double reference = 2.0 * acc / n;
  CHECK(lockin_first_harmonic(set, fc, dev) ==
        doctest::Approx(reference).epsilon(1e-5));
}

TEST_CASE("comb construction rejects out-of-range parameters") {
  CHECK_THROWS_AS(build_resonance_set(2.87e9, 2.16e6, 1.0, 200e3, true),
                  invalid_argument_error);
  CHECK_THROWS_AS(build_resonance_set(2.87e9, 2.16e6, -0.1, 200e3, true),
                  invalid_argument_error);
  CHECK_THROWS_AS(build_resonance_set(2.87e9, 2.16e6, 0.004, 0.0, true),
                  invalid_argument_error);
  CHECK_THROWS_AS(build_resonance_set(2.87e9, -1.0, 0.004, 200e3, true),
                  invalid_argument_error);
  CHECK_NOTHROW(build_resonance_set(2.87e9, 2.16e6, 0.0, 200e3, true));
}
