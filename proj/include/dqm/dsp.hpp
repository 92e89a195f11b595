#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dqm/config.hpp"
#include "dqm/filters.hpp"
#include "dqm/parallel.hpp"
#include "dqm/types.hpp"

namespace dqm {

// Welch spectral density estimate: Hann-windowed segments at 50% overlap,
// per-segment mean removal, one-sided density in (input unit)^2 per Hz.
// Frequencies run 0 .. rate/2 in steps of rate/segment_length. Segments are
// transformed independently (parallelizable); the averaging order is fixed so
// both execution modes agree bitwise.
spectrum welch_psd(const time_series& trace, std::size_t segment_length,
                   exec_mode mode = default_exec_mode());

// Largest even segment not exceeding preferred_duration_s, capped at a
// quarter of the trace so at least ~7 half-overlapped averages remain.
std::size_t default_welch_segment(const time_series& trace, double preferred_duration_s);

spectrum psd_to_asd(const spectrum& psd);

// Equivalent width of the chain's power response: integral of |H|^2 over
// [0, Nyquist] divided by the peak |H|^2, evaluated on a doubling Simpson
// grid to a relative tolerance of 1e-4.
double noise_equivalent_bandwidth(const std::vector<filter_spec>& chain, double rate_hz);

// ideal rectangular passband
inline double brickwall_noise_equivalent_bandwidth(double f_low_hz, double f_high_hz) {
  return f_high_hz - f_low_hz;
}

// The post-detection selection used for the headline sensitivity number:
// every configured notch followed by the measurement bandpass.
std::vector<filter_spec> analysis_filter_chain(const analysis_config& analysis);

struct sensitivity_report {
  double rms_t = 0.0;                       // standard deviation of the filtered trace
  double noise_equivalent_bandwidth_hz = 0.0;
  double sensitivity_t_per_rthz = 0.0;      // rms / sqrt(2 * bandwidth)
};

// Converts the standard deviation of a band-limited field trace into an
// amplitude spectral density figure. For noise that is white across an
// equivalent bandwidth B, the variance is S^2 * B with S the one-sided ASD,
// and a magnetometer quoted at S resolves S/sqrt(2T) after averaging for T;
// the quoted per-root-hertz sensitivity is therefore rms / sqrt(2B).
sensitivity_report sensitivity(const time_series& filtered_trace, double nep_bandwidth_hz);

// Field-referred shot-noise floor of one channel: current noise density
// sqrt(2 e I) against the discriminator slope in amps per hertz of detuning,
// expressed per root hertz of field bandwidth.
double shot_noise_limit_t_per_rthz(double photocurrent_a, double slope_a_per_hz,
                                   const physical_constants& pc = {});

// sample-wise difference of two equally sampled field traces
time_series gradiometer(const time_series& a, const time_series& b);

struct bandwidth_result {
  spectrum transfer;  // measured amplitude ratio at each test frequency
  double f3db_hz = 0.0;
};

// Small-signal transfer measurement over a frequency grid. `response_ratio_at`
// runs the instrument with a test tone at the given frequency and returns the
// measured amplitude over the injected amplitude. The -3 dB point is the
// log-log interpolated crossing of 1/sqrt(2) after the last grid point at or
// above that level; a grid that never reaches or never drops below the level
// is an error, since the corner would be extrapolation.
bandwidth_result measure_bandwidth(const std::function<double(double)>& response_ratio_at,
                                   const std::vector<double>& frequencies_hz);

}  // namespace dqm
