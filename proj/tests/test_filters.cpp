#include <cmath>
#include <complex>
#include <vector>

#include <doctest.h>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/filters.hpp"
#include "dqm/types.hpp"

using namespace dqm;

namespace {

// Bilinear-transformed Butterworth magnitude: the analog prototype response
// evaluated at the warped frequency, which the cascade must match exactly.
double butterworth_magnitude(int order, double f_hz, double fc_hz, double rate_hz) {
  const double ratio = std::tan(pi * f_hz / rate_hz) / std::tan(pi * fc_hz / rate_hz);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

}  // namespace

TEST_CASE("lowpass magnitude matches the warped analog prototype") {
  const double rate = 100e3;
  const double fc = 1e3;
  for (int order : {1, 2, 3, 4, 8}) {
    const auto lp = design_butterworth_lowpass(order, fc, rate);
    for (double f : {10.0, 250.0, 1000.0, 2500.0, 10000.0, 40000.0}) {
      const double expected = butterworth_magnitude(order, f, fc, rate);
      CHECK(std::abs(lp.response(f, rate)) == doctest::Approx(expected).epsilon(1e-9));
    }
    // -3 dB exactly at the design cutoff, unity at DC
    CHECK(std::abs(lp.response(fc, rate)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(lp.response(0.0, rate)) == doctest::Approx(1.0));
  }
}

TEST_CASE("fourth-order lowpass at the decimation beat frequency") {
  // the number the channel-separation figure rests on: 1 kHz cutoff sampled
  // at 100 kHz, evaluated at the 2.5 kHz inter-channel beat
  const auto lp = design_butterworth_lowpass(4, 1e3, 100e3);
  const double mag = std::abs(lp.response(2.5e3, 100e3));
  CHECK(mag == doctest::Approx(0.0254).epsilon(2e-3));
  CHECK(mag < 0.03);
  // the first-order economy variant is an order of magnitude worse
  const auto lp1 = design_butterworth_lowpass(1, 1e3, 100e3);
  CHECK(std::abs(lp1.response(2.5e3, 100e3)) > 10.0 * mag);
}

TEST_CASE("highpass mirrors the lowpass behaviour") {
  const double rate = 5e3;
  const double fc = 25.0;
  const auto hp = design_butterworth_highpass(4, fc, rate);
  CHECK(std::abs(hp.response(fc, rate)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::abs(hp.response(0.001, rate)) < 1e-8);
  CHECK(std::abs(hp.response(2000.0, rate)) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("notch nulls its center and passes the far field") {
  const double rate = 5e3;
  const auto nf = design_notch(50.0, 30.0, rate);
  CHECK(std::abs(nf.response(50.0, rate)) < 1e-12);
  CHECK(std::abs(nf.response(0.0, rate)) == doctest::Approx(1.0));
  CHECK(std::abs(nf.response(500.0, rate)) == doctest::Approx(1.0).epsilon(1e-2));
  // bandwidth f0/q: the -3 dB points sit near 50 +/- 50/60
  const double half = std::abs(nf.response(50.0 - 50.0 / 60.0, rate));
  CHECK(half == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(2e-2));
}

TEST_CASE("step processing equals batch processing") {
  auto a = design_butterworth_lowpass(4, 100.0, 5e3);
  auto b = design_butterworth_lowpass(4, 100.0, 5e3);
  std::vector<double> in(256);
  for (std::size_t i = 0; i < in.size(); ++i)
    in[i] = std::sin(0.1 * static_cast<double>(i)) + (i == 0 ? 1.0 : 0.0);
  std::vector<double> batch(in.size());
  b.process(in.data(), batch.data(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(a.step(in[i]) == batch[i]);
}

TEST_CASE("reset clears filter state") {
  auto lp = design_butterworth_lowpass(2, 100.0, 5e3);
  const double first = lp.step(1.0);
  lp.step(0.5);
  lp.reset();
  CHECK(lp.step(1.0) == first);
}

TEST_CASE("cascade append multiplies responses") {
  const double rate = 5e3;
  auto lp = design_butterworth_lowpass(2, 300.0, rate);
  auto combined = design_butterworth_lowpass(2, 300.0, rate);
  combined.append(design_notch(50.0, 30.0, rate));
  const auto nf = design_notch(50.0, 30.0, rate);
  for (double f : {10.0, 50.0, 120.0, 700.0}) {
    const auto expected = lp.response(f, rate) * nf.response(f, rate);
    const auto got = combined.response(f, rate);
    CHECK(std::abs(got - expected) < 1e-12);
  }
}

TEST_CASE("descriptor chain designs compose the same filters") {
  const double rate = 5e3;
  const std::vector<filter_spec> chain{
      {filter_spec::kind::notch, 50.0, 0.0, 4, 30.0},
      {filter_spec::kind::bandpass, 25.0, 300.0, 4, 30.0},
  };
  const auto designed = design_chain(chain, rate);
  // band center passes, notch center and out-of-band reject
  CHECK(std::abs(designed.response(100.0, rate)) > 0.9);
  CHECK(std::abs(designed.response(50.0, rate)) < 1e-10);
  CHECK(std::abs(designed.response(5.0, rate)) < 0.05);
  CHECK(std::abs(designed.response(1500.0, rate)) < 0.05);
}

TEST_CASE("apply_filter keeps rate and length and filters causally") {
  time_series trace(5e3, std::vector<double>(1000, 1.0), unit::tesla);
  const std::vector<filter_spec> chain{{filter_spec::kind::lowpass, 100.0, 0.0, 2, 30.0}};
  const auto out = apply_filter(trace, chain);
  CHECK(out.sample_rate_hz == trace.sample_rate_hz);
  CHECK(out.size() == trace.size());
  CHECK(out.value_unit == trace.value_unit);
  // settles to the DC gain of one
  CHECK(out.samples.back() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.samples.front() < 0.1);
}

TEST_CASE("filter designs reject nonsense") {
  CHECK_THROWS_AS(design_butterworth_lowpass(0, 100.0, 5e3), invalid_argument_error);
  CHECK_THROWS_AS(design_butterworth_lowpass(4, 0.0, 5e3), invalid_argument_error);
  CHECK_THROWS_AS(design_butterworth_lowpass(4, 2500.0, 5e3), invalid_argument_error);
  CHECK_THROWS_AS(design_notch(50.0, 0.0, 5e3), invalid_argument_error);
}
