#include "dqm/nv.hpp"

#include <algorithm>
#include <cmath>

#include "dqm/errors.hpp"

namespace dqm {

double resonance_center(double bias_field_t, transition t, const physical_constants& pc) {
  if (!(std::abs(bias_field_t) < 10e-3))
    throw invalid_argument_error(
        "resonance_center: |field| must be below 10 mT (linear Zeeman model)");
  return pc.zero_field_splitting_hz + transition_sign(t) * pc.gamma_e_hz_per_t * bias_field_t;
}

resonance_set build_resonance_set(double center_hz, double hyperfine_hz,
                                  double contrast_per_line, double fwhm_hz,
                                  bool three_tone) {
  // zero is allowed here (a muted ensemble, used by the crosstalk probe);
  // the config layer is stricter and demands a strictly positive contrast
  if (!(contrast_per_line >= 0.0 && contrast_per_line < 1.0))
    throw invalid_argument_error("build_resonance_set: contrast_per_line must be in [0, 1)");
  if (!(fwhm_hz > 0.0))
    throw invalid_argument_error("build_resonance_set: fwhm_hz must be positive");
  if (hyperfine_hz < 0.0)
    throw invalid_argument_error("build_resonance_set: hyperfine_hz must be non-negative");

  resonance_set set;
  set.center_hz = center_hz;
  set.fwhm_hz = fwhm_hz;

  const double a = hyperfine_hz;
  if (three_tone) {
    // coincidence counts of a 3-tone comb swept across 3 hyperfine lines
    set.lines = {{-2.0 * a, 1.0 * contrast_per_line},
                 {-a, 2.0 * contrast_per_line},
                 {0.0, 3.0 * contrast_per_line},
                 {a, 2.0 * contrast_per_line},
                 {2.0 * a, 1.0 * contrast_per_line}};
  } else {
    set.lines = {{-a, contrast_per_line}, {0.0, contrast_per_line}, {a, contrast_per_line}};
  }

  if (a == 0.0) {
    // degenerate splitting: collapse to one line carrying the total weight
    double total = 0.0;
    for (const auto& l : set.lines) total += l.weight;
    set.lines = {{0.0, total}};
  }
  return set;
}

double fluorescence_factor(const resonance_set& set, double f_hz) {
  const double g = 0.5 * set.fwhm_hz;
  const double g2 = g * g;
  double dip = 0.0;
  for (const auto& line : set.lines) {
    const double d = f_hz - set.center_hz - line.offset_hz;
    dip += line.weight * g2 / (d * d + g2);
  }
  // fluorescence is a positive fraction of the off-resonant level
  return std::clamp(1.0 - dip, 1e-12, 1.0);
}

double lockin_first_harmonic(const resonance_set& set, double f_center_hz,
                             double f_dev_hz) {
  if (f_dev_hz < 0.0)
    throw invalid_argument_error("lockin_first_harmonic: f_dev_hz must be non-negative");
  if (f_dev_hz == 0.0) return 0.0;

  auto midpoint = [&](int n) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double theta = two_pi * (k + 0.5) / n;
      const double c = std::cos(theta);
      acc += fluorescence_factor(set, f_center_hz + f_dev_hz * c) * c;
    }
    return 2.0 * acc / n;  // (1/pi) * integral over [0, 2pi)
  };

  double prev = midpoint(64);
  for (int n = 128; n <= (1 << 18); n *= 2) {
    const double next = midpoint(n);
    // relative convergence with an absolute floor for the symmetric-zero case
    if (std::abs(next - prev) <= 1e-6 * std::abs(next) + 1e-15) return next;
    prev = next;
  }
  return prev;
}

}  // namespace dqm
