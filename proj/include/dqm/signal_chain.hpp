#pragma once

#include <cstdint>
#include <vector>

#include "dqm/config.hpp"
#include "dqm/nv.hpp"
#include "dqm/parallel.hpp"
#include "dqm/types.hpp"

namespace dqm {

// One frequency-modulated microwave source. Every channel owns exactly one;
// the servo moves `center_hz`, the dither parameters come from the channel
// config and stay fixed during a run.
struct mw_drive {
  double center_hz = 0.0;
  double mod_frequency_hz = 0.0;
  double mod_deviation_hz = 0.0;
  double mod_phase_rad = 0.0;
};

inline mw_drive drive_for(const ensemble_config& ch, double center_hz) {
  return {center_hz, ch.mod_frequency_hz, ch.mod_deviation_hz, ch.mod_phase_rad};
}

double instantaneous_mw_frequency(const mw_drive& drive, double t_s);

// Photocurrent of the shared detector for samples [first, first + count) of a
// run. All ensembles are pumped by one laser and collected onto one balanced
// photodetector, so the output is the sum of the per-ensemble currents; the
// frequency-division separation happens later, in the lock-ins.
//
// Per sample, for each channel: the ensemble resonance comb sits at the
// Zeeman-shifted center for that channel's total field sample, the drive
// probes it at the instantaneous FM frequency, and the resulting relative
// fluorescence scales the channel's baseline photocurrent. Laser intensity
// noise multiplies the summed current (relative noise, common to all
// channels); shot noise is then added with per-sample variance e * I * rate,
// i.e. the two-sided white density 2eI folded to the sampling bandwidth
// rate/2. With balanced detection the reference arm, matched to the summed
// no-dip baseline, is subtracted from the output and the intensity noise is
// reduced by the configured suppression figure; shot noise, being photon
// statistics of the signal arm, survives the subtraction.
//
// Randomness is drawn at counter positions equal to the absolute sample
// index, so splitting a run into segments changes nothing and the parallel
// path is bitwise identical to the serial one.
std::vector<double> synthesize_photocurrent(
    const std::vector<ensemble_config>& channels, const std::vector<mw_drive>& drives,
    const std::vector<std::vector<double>>& total_field_t, std::size_t first,
    std::size_t count, const noise_config& noise, const lockin_config& lockin,
    const physical_constants& pc, double sample_rate_hz, std::uint64_t seed,
    exec_mode mode);

struct lockin_settings {
  double reference_frequency_hz = 0.0;
  double reference_phase_rad = 0.0;
  double lpf_cutoff_hz = 1e3;
  int lpf_order = 4;
  double decimated_rate_hz = 5e3;   // must divide the input rate
  double gain_v_per_a = 1.0;        // transimpedance, folds amps to volts
};

lockin_settings lockin_settings_for(const run_config& cfg, std::size_t channel);

// Decimated in-phase and quadrature outputs, in volts.
struct demod_output {
  time_series x;
  time_series y;
};

// Dual-phase lock-in demodulation of a photocurrent trace:
//
//   x = LPF(2 g I(t) cos(2 pi f t + phi)),  y = LPF(-2 g I(t) sin(2 pi f t + phi))
//
// followed by decimation that keeps filtered samples 0, M, 2M, ... where
// M = rate / decimated_rate. The factor two makes a full-scale input tone
// A cos(2 pi f t + phi) read back as x = A, y = 0. Filters are causal
// Butterworth cascades starting from rest; callers discard their own settling
// window. `start_time_s` places the reference oscillator for segment reruns.
demod_output lockin_demodulate(const time_series& photocurrent,
                               const lockin_settings& settings, double start_time_s = 0.0,
                               exec_mode mode = default_exec_mode());

// Channel-separation probe. One channel at a time is given its configured
// contrast while every other ensemble is muted (contrast zero, so it only
// contributes its flat baseline current); all MW sources keep running with
// their usual dithers, parked a half-linewidth above their resonance where
// the in-phase response is largest. Entry [i][j] is the rms of lock-in i's
// complex output divided by the rms of the driven lock-in j's own complex
// output, measured after a settling window is dropped. Environmental field
// noise, laser noise and shot noise are disabled so the matrix isolates the
// deterministic inter-channel leakage of the demodulation chain.
std::vector<std::vector<double>> crosstalk_matrix(const run_config& cfg,
                                                  exec_mode mode = default_exec_mode());

}  // namespace dqm
