#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dqm/config.hpp"
#include "dqm/parallel.hpp"

namespace dqm {

// Axial field of a thin circular loop per ampere-turn, at signed axial
// distance d from the loop plane. Even in d.
double loop_field_per_amp_turn(double radius_m, double axial_distance_m) noexcept;
// d/dd of the above (odd in d).
double loop_field_gradient_per_amp_turn(double radius_m, double axial_distance_m) noexcept;

// Total static field of the bias assembly at a point on the axis, with the
// compensation coils carrying `coil_current_a` in series.
double bias_field_at(const bias_field_config& bias, double position_m,
                     double coil_current_a);
// Same, at the configured series current.
double bias_field_at(const bias_field_config& bias, double position_m);

// Geometric coil field per ampere of series current at a point (both loops,
// polarities applied). This is what a calibration measurement would report.
double coil_field_per_amp_at(const bias_field_config& bias, double position_m);

// Default bias assembly solved so that, at the nominal series current:
//   - the per-amp coil field at the two sensor positions equals the measured
//     calibration constants exactly,
//   - the total field has a local extremum at each sensor position (first
//     spatial derivative zero), making the sensors gradient-insensitive,
//   - the resonance separation between the channels comes out at its nominal
//     operating value.
// Throws fit_error if the Newton solve fails to converge (it cannot for the
// shipped defaults; the guard exists for exotic constant overrides).
bias_field_config default_bias_config(double sensor_separation_m = 3.6e-3,
                                      double target_field_separation_t = 42e-6);

// Static field seen by one channel: magnet profile at the sensor position
// plus the measured coil constant times the series current. The measured
// constants are authoritative here, not the loop geometry.
double channel_static_field(const run_config& cfg, std::size_t channel);
// Same with an explicit coil current (for modulation on top of the bias).
double channel_field_at_current(const run_config& cfg, std::size_t channel,
                                double coil_current_a);

// Coil constant from a Zeeman-splitting measurement: straight-line fit of
// splitting versus coil current; the slope is 2*gamma_e*k, so k follows as
// slope / (2*gamma_e). Signed. Requires at least two distinct currents.
double calibrate_coil_from_zeeman(const std::vector<double>& currents_a,
                                  const std::vector<double>& splittings_hz,
                                  const physical_constants& pc);

// Environmental magnetic noise traces, one per channel, in tesla at the full
// sample rate. Composition per channel:
//   env_i = cmf * common + (1 - cmf) * independent_i
// Each component is white floor + pink (FFT-shaped, rolled off above the
// corner) + mains-style line peaks (phase-diffusing sinusoids whose width is
// the Lorentzian FWHM). Every draw is counter-indexed, so serial and parallel
// execution produce identical traces.
std::vector<std::vector<double>> generate_environmental_noise(
    const noise_config& noise, std::size_t n_channels, std::size_t n_samples,
    double sample_rate_hz, std::uint64_t seed,
    exec_mode mode = default_exec_mode());

}  // namespace dqm
