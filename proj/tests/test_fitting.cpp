#include <cmath>
#include <cstddef>
#include <vector>

#include <doctest.h>

#include "dqm/errors.hpp"
#include "dqm/fitting.hpp"
#include "dqm/random.hpp"
#include "dqm/types.hpp"

using namespace dqm;

namespace {

// reference forward model, written out independently of the fitter:
// y(f) = sum_sk A_sk * d/du [g^2/(u^2+g^2)] = sum_sk A_sk * (-2 g^2 u)/(u^2+g^2)^2
double model_point(double f, const std::vector<double>& centers,
                   const std::vector<std::vector<double>>& amps, double fwhm,
                   double hyperfine) {
  const double g = fwhm / 2.0;
  double y = 0.0;
  for (std::size_t s = 0; s < centers.size(); ++s) {
    const std::size_t n_k = amps[s].size();
    for (std::size_t k = 0; k < n_k; ++k) {
      const double off =
          (static_cast<double>(k) - 0.5 * static_cast<double>(n_k - 1)) * hyperfine;
      const double u = f - centers[s] - off;
      const double den = u * u + g * g;
      y += amps[s][k] * (-2.0 * g * g * u) / (den * den);
    }
  }
  return y;
}

spectrum synth_sweep(const std::vector<double>& centers,
                     const std::vector<std::vector<double>>& amps, double fwhm,
                     double hyperfine, double noise_sigma, std::uint64_t salt) {
  const std::size_t n = 801;
  const double mid = (centers.front() + centers.back()) / 2.0;
  const double span = 12e6;
  const random_stream rs(777 + salt, stream_id::test_base + 2);
  std::vector<double> f(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = mid - span / 2 + span * static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = model_point(f[i], centers, amps, fwhm, hyperfine) +
           noise_sigma * rs.normal_at(i);
  }
  return spectrum(f, y, spectrum_kind::demodulated);
}

}  // namespace

TEST_CASE("noiseless single-set fit recovers the parameters") {
  const std::vector<double> centers{2.8414e9};
  const std::vector<std::vector<double>> amps{{0.5e-5, 1.1e-5, 1.6e-5, 0.9e-5, 0.4e-5}};
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, 0.0, 0);
  const auto fit =
      fit_derivative_lorentzian_sum(data, 1, 2.16e6, {2.8414e9 + 120e3}, 260e3);
  REQUIRE(fit.sets.size() == 1);
  CHECK(std::abs(fit.sets[0].center_hz - 2.8414e9) < 50.0);
  CHECK(fit.sets[0].fwhm_hz == doctest::Approx(200e3).epsilon(1e-4));
  REQUIRE(fit.sets[0].amplitudes.size() == 5);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(fit.sets[0].amplitudes[k] == doctest::Approx(amps[0][k]).epsilon(1e-3));
  CHECK(fit.residual_rms < 1e-9);
  CHECK(fit.iterations < 200);
}

TEST_CASE("two overlapping combs resolve under realistic noise") {
  const std::vector<double> centers{2.841411e9, 2.842588e9};
  // basis peak is ~0.65/g per unit amplitude, so these give ~1e-5 V signals
  const std::vector<std::vector<double>> amps{
      {0.5, 1.0, 1.5, 1.0, 0.5}, {0.4, 0.8, 1.2, 0.8, 0.4}};
  const double sigma = 1e-8;  // ~0.1% of the peak response
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, sigma, 1);
  const auto fit = fit_derivative_lorentzian_sum(
      data, 2, 2.16e6, {centers[0] - 50e3, centers[1] + 50e3}, 150e3);
  REQUIRE(fit.sets.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(std::abs(fit.sets[s].center_hz - centers[s]) < 500.0);
    CHECK(fit.sets[s].fwhm_hz == doctest::Approx(200e3).epsilon(5e-3));
    CHECK(fit.sets[s].center_stderr_hz > 0.0);
    CHECK(fit.sets[s].center_stderr_hz < 1e3);
  }
  const double sep = fit.sets[1].center_hz - fit.sets[0].center_hz;
  CHECK(sep == doctest::Approx(1.177008e6).epsilon(1e-3));
  CHECK(fit.residual_rms == doctest::Approx(sigma).epsilon(0.2));
}

TEST_CASE("fit results come back sorted by center") {
  const std::vector<double> centers{2.8414e9, 2.8426e9};
  const std::vector<std::vector<double>> amps{
      {0.5, 1.0, 1.5, 1.0, 0.5}, {0.4, 0.8, 1.2, 0.8, 0.4}};
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, 1e-8, 2);
  // initial guesses deliberately given in descending order
  const auto fit = fit_derivative_lorentzian_sum(
      data, 2, 2.16e6, {centers[1] + 50e3, centers[0] - 50e3}, 200e3);
  REQUIRE(fit.sets.size() == 2);
  CHECK(fit.sets[0].center_hz < fit.sets[1].center_hz);
}

TEST_CASE("three-component combs fit single-tone sweeps") {
  const std::vector<double> centers{2.8414e9};
  const std::vector<std::vector<double>> amps{{0.9e-5, 1.0e-5, 1.1e-5}};
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, 0.0, 3);
  const auto fit =
      fit_derivative_lorentzian_sum(data, 1, 2.16e6, {2.8414e9 - 80e3}, 200e3, 3);
  REQUIRE(fit.sets[0].amplitudes.size() == 3);
  CHECK(std::abs(fit.sets[0].center_hz - 2.8414e9) < 50.0);
}

TEST_CASE("coincident initial centers are structurally degenerate") {
  const std::vector<double> centers{2.8414e9, 2.8426e9};
  const std::vector<std::vector<double>> amps{
      {0.5, 1.0, 1.5, 1.0, 0.5}, {0.4, 0.8, 1.2, 0.8, 0.4}};
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, 1e-8, 4);
  CHECK_THROWS_AS(fit_derivative_lorentzian_sum(data, 2, 2.16e6,
                                                {2.8420e9, 2.8420e9}, 200e3),
                  fit_degeneracy_error);
}

TEST_CASE("a guess far outside the data cannot converge") {
  const std::vector<double> centers{2.8414e9};
  const std::vector<std::vector<double>> amps{{0.5, 1.0, 1.5, 1.0, 0.5}};
  const auto data = synth_sweep(centers, amps, 200e3, 2.16e6, 1e-8, 5);
  // 100 MHz off: every basis function is numerically flat over the window
  CHECK_THROWS_AS(
      fit_derivative_lorentzian_sum(data, 1, 2.16e6, {2.8414e9 + 100e6}, 200e3),
      fit_error);
}

TEST_CASE("proportional fit recovers a line through the origin") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y;
  for (const double v : x) y.push_back(3.25 * v);
  const auto fit = fit_proportional(x, y);
  CHECK(fit.slope == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(fit.slope_stderr == doctest::Approx(0.0).scale(1e-9));

  // with symmetric residuals the slope stays put and the stderr turns on
  std::vector<double> y2 = y;
  y2[0] += 0.1;
  y2[4] -= 0.02;  // 0.1*1 and -0.02*5: orthogonal to x in the normal equations
  const auto fit2 = fit_proportional(x, y2);
  CHECK(fit2.slope == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(fit2.slope_stderr > 0.0);
}

TEST_CASE("proportional fit needs a nonzero abscissa") {
  CHECK_THROWS_AS(fit_proportional({0.0, 0.0}, {1.0, 2.0}), fit_error);
  CHECK_THROWS_AS(fit_proportional({1.0, 2.0}, {1.0}), invalid_argument_error);
}
