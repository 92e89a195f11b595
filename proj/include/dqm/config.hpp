#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dqm/constants.hpp"
#include "dqm/nv.hpp"

namespace dqm {

inline bool operator==(const physical_constants& a, const physical_constants& b) {
  return a.gamma_e_hz_per_t == b.gamma_e_hz_per_t &&
         a.zero_field_splitting_hz == b.zero_field_splitting_hz &&
         a.electron_charge_c == b.electron_charge_c;
}

// One NV ensemble plus the microwave drive assigned to it. Channel index in
// the run config doubles as the channel id used in output tables.
struct ensemble_config {
  double position_mm = 0.0;               // along the bias profile axis
  double contrast_per_line = 0.004;       // fractional dip depth per hyperfine line
  double fwhm_hz = 200e3;
  double hyperfine_splitting_hz = 2.16e6;
  double baseline_photocurrent_a = 1.0e-3;
  double t2_star_s = 4.6e-6;              // consistency bound: fwhm >= 1/(pi*T2*)
  bool three_tone = true;
  transition mw_transition = transition::zero_to_minus_one;

  // frequency modulation of this channel's MW source
  double mod_frequency_hz = 7.5e3;
  double mod_deviation_hz = 100e3;
  double mod_phase_rad = 0.0;

  bool operator==(const ensemble_config&) const = default;
};

// Static bias field along the sensor axis: a gently sloped quadratic magnet
// profile plus one compensation loop per channel, both loops in series.
//
// The loop geometry is illustrative; the measured per-channel coil constants
// in `calibration_t_per_a` are authoritative for channel arithmetic, and the
// default geometry is solved so that the geometric field-per-amp at the two
// sensor positions matches them exactly (see default_bias_config()).
struct bias_field_config {
  double magnet_center_t = 1.0e-3;
  double magnet_slope_t_per_m = 0.0;
  double magnet_curvature_t_per_m2 = 0.0;
  double coil_radius_m = 2.5e-3;
  std::array<double, 2> coil_positions_m{{0.0, 0.0}};
  std::array<double, 2> coil_turns{{1.0, 1.0}};
  std::array<double, 2> coil_polarity{{1.0, -1.0}};
  double series_current_a = 25e-3;
  std::array<double, 2> calibration_t_per_a{{0.60e-3, -0.65e-3}};

  bool operator==(const bias_field_config&) const = default;
};

struct line_peak_config {
  double frequency_hz = 50.0;
  double amplitude_t_rms = 50e-12;
  double width_hz = 0.2;

  bool operator==(const line_peak_config&) const = default;
};

struct noise_config {
  double env_white_floor_t_per_rthz = 15e-12;
  double env_pink_amplitude_t_per_rthz = 0.9e-9;  // at 1 Hz
  double env_pink_corner_hz = 25.0;               // pink rolls off above this
  double env_pink_beta = 1.0;
  std::vector<line_peak_config> line_peaks;
  double common_mode_fraction = 1.0;
  double laser_rin_rel_per_rthz = 1e-7;  // before balanced-detection suppression
  bool shot_noise_enabled = true;

  bool operator==(const noise_config&) const = default;
};

struct lockin_config {
  double lpf_cutoff_hz = 1e3;
  int lpf_order = 4;
  double transimpedance_v_per_a = 1.0;
  bool balanced_detection = true;
  double balanced_rin_suppression_db = 20.0;

  bool operator==(const lockin_config&) const = default;
};

struct servo_config {
  double alpha_hz_per_v = 1e6;  // FM-port coefficient, MW shift per feedback volt
  double target_bandwidth_hz = 200.0;
  // explicit gains bypass auto-tuning when all three are present
  std::optional<double> kp;
  std::optional<double> ki;
  std::optional<double> kd;
  double output_min_v = -10.0;
  double output_max_v = 10.0;
  double lock_threshold_fraction = 0.5;  // of the linewidth, for the locked flag
  double lock_settle_s = 0.1;            // time below threshold before "locked"

  bool operator==(const servo_config&) const = default;
};

// Post-detection analysis chain settings (applied to decimated field traces).
struct analysis_config {
  std::vector<double> notch_hz{50.0, 90.0, 100.0, 150.0, 200.0, 250.0};
  double notch_q = 30.0;
  double bandpass_low_hz = 25.0;
  double bandpass_high_hz = 300.0;
  int bandpass_order = 4;
  double welch_segment_s = 10.0;
  double transient_discard_s = 2.0;  // covers servo settling and Q=30 notch ring-down

  bool operator==(const analysis_config&) const = default;
};

// Scenario-level knobs (measurement schedules, probe amplitudes).
struct scenario_config {
  double sweep_span_hz = 12e6;        // total width, centered between the two resonances;
                                      // wide enough for both five-line hyperfine combs
  std::size_t sweep_points = 801;
  double sweep_deviation_hz = 20e3;   // gentler FM for spectroscopy than for locking
  double sweep_settle_s = 0.004;
  double sweep_average_s = 0.002;

  double calibration_tone_hz = 30.0;
  std::vector<double> calibration_current_amplitudes_a{1e-4, 2e-4, 5e-4, 1e-3, 2e-3};
  double calibration_settle_s = 0.5;
  double calibration_measure_s = 2.0;

  std::vector<double> bandwidth_frequencies_hz{
      10.0, 16.0, 25.0, 40.0, 63.0, 100.0, 140.0, 200.0,
      280.0, 400.0, 560.0, 800.0, 1000.0};
  double bandwidth_amplitude_t = 100e-9;
  double bandwidth_settle_s = 0.3;
  double bandwidth_min_measure_s = 0.5;

  bool operator==(const scenario_config&) const = default;
};

struct run_config {
  double sample_rate_hz = 100e3;
  double decimated_rate_hz = 5e3;
  double duration_s = 10.0;
  std::uint64_t seed = 1;
  physical_constants constants;
  std::vector<ensemble_config> channels;
  bias_field_config bias;
  noise_config noise;
  lockin_config lockin;
  std::vector<servo_config> servo;  // one entry per channel, or one broadcast entry
  analysis_config analysis;
  scenario_config scenario;

  std::size_t channel_count() const noexcept { return channels.size(); }
  const servo_config& servo_for(std::size_t channel) const {
    return servo.size() == 1 ? servo.front() : servo.at(channel);
  }

  bool operator==(const run_config&) const = default;
};

// The stock two-channel bench setup (solved bias geometry, mains peaks).
run_config default_run_config();

// Parse a JSON config document. Missing keys take defaults, unknown keys are
// errors carrying the dotted field path, and validate() runs on the result.
run_config parse_config(const std::string& json_text);
run_config load_config_file(const std::string& path);

// Full round-trip serialization (every key explicit, sorted, 2-space indent).
std::string serialize_config(const run_config& cfg);

// Cross-field consistency checks; throws config_error on violation.
void validate(const run_config& cfg);

}  // namespace dqm
