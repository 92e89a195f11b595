#pragma once

#include <vector>

#include "dqm/constants.hpp"

namespace dqm {

enum class transition { zero_to_minus_one, zero_to_plus_one };

// ms=0 -> ms=-1 resonance moves down with field, ms=0 -> ms=+1 moves up.
inline double transition_sign(transition t) noexcept {
  return t == transition::zero_to_minus_one ? -1.0 : 1.0;
}

// f_res = D + sign * gamma_e * B  (axial field, linear Zeeman regime)
double resonance_center(double bias_field_t, transition t,
                        const physical_constants& pc = {});

struct resonance_line {
  double offset_hz = 0.0;  // offset from the set center
  double weight = 0.0;     // fractional fluorescence dip depth of this line
};

// One ensemble's effective ODMR line comb around a common center. The comb is
// what a frequency sweep sees; it already folds together hyperfine structure
// and the drive tone pattern.
struct resonance_set {
  double center_hz = 0.0;
  double fwhm_hz = 0.0;  // per-line Lorentzian FWHM
  std::vector<resonance_line> lines;
};

// Build the line comb for one ensemble.
//
// The three hyperfine lines (splitting A) each carry `contrast_per_line`.
// With a single drive tone the sweep crosses each line once: offsets
// {-A, 0, +A}, equal weights. With the three-tone drive (tones spaced by A)
// a sweep sees a coincidence comb: the tone comb crossed with the line comb
// gives overlap counts 1,2,3,2,1 at offsets {-2A..+2A}, so the central dip is
// three lines deep. Degenerate offsets (A = 0) are merged into a single line
// with the summed weight.
resonance_set build_resonance_set(double center_hz, double hyperfine_hz,
                                  double contrast_per_line, double fwhm_hz,
                                  bool three_tone);

// Relative fluorescence at probe frequency f: 1 minus the sum of Lorentzian
// dips, clamped to (0, 1].
double fluorescence_factor(const resonance_set& set, double f_hz);

// First Fourier cosine coefficient of the fluorescence seen under sinusoidal
// frequency modulation:
//
//   a1(fc) = (1/pi) * integral_0^2pi F(fc + f_dev*cos(theta)) * cos(theta) dtheta
//
// This is the settled lock-in x output (per unit photocurrent and gain) at
// center frequency fc, and the quasi-static oracle for the demodulation chain.
// Evaluated by midpoint quadrature with doubling until the relative change is
// below 1e-6 (the integrand is smooth and periodic, so convergence is fast).
double lockin_first_harmonic(const resonance_set& set, double f_center_hz,
                             double f_dev_hz);

}  // namespace dqm
