#pragma once

#include <cstddef>
#include <vector>

#include "dqm/types.hpp"

namespace dqm {

// One fitted resonance comb: a shared center and linewidth plus an
// independent amplitude per comb component.
struct lineshape_fit {
  double center_hz = 0.0;
  double fwhm_hz = 0.0;
  std::vector<double> amplitudes;
  double center_stderr_hz = 0.0;
  double fwhm_stderr_hz = 0.0;
};

struct sweep_fit_result {
  std::vector<lineshape_fit> sets;  // sorted by center
  double residual_rms = 0.0;        // sqrt(SSR / m)
  std::size_t iterations = 0;
};

// Fit y(f) = sum over sets s and components k of
//
//   A_sk * d/du [ g^2 / (u^2 + g^2) ],  u = f - c_s - off_k,  g = fwhm_s / 2
//
// where the component offsets off_k are centered multiples of the hyperfine
// splitting (five components span -2A .. +2A). This is the small-deviation
// shape of a modulated sweep across a dip comb: the in-phase output follows
// the derivative of the summed Lorentzians.
//
// Levenberg-Marquardt with the analytic Jacobian and multiplicative damping;
// amplitudes are seeded by linear least squares at the initial centers and
// width. Divergence (damping beyond 1e12 without a cost reduction) raises
// fit_error; a structurally singular system, e.g. two sets started on the
// same center, raises fit_degeneracy_error. Standard errors come from the
// unscaled normal equations at the optimum with the usual SSR/(m-p) variance.
sweep_fit_result fit_derivative_lorentzian_sum(const spectrum& data, std::size_t n_sets,
                                               double hyperfine_hz,
                                               const std::vector<double>& initial_centers_hz,
                                               double initial_fwhm_hz,
                                               std::size_t components_per_set = 5);

struct proportional_fit_result {
  double slope = 0.0;
  double slope_stderr = 0.0;
};

// Least-squares line through the origin: slope = sum(xy) / sum(x^2). The
// stderr uses the residual variance with one fitted parameter. All-zero
// abscissae raise fit_error.
proportional_fit_result fit_proportional(const std::vector<double>& x,
                                         const std::vector<double>& y);

}  // namespace dqm
