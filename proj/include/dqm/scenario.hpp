#pragma once

#include <string>

#include "dqm/config.hpp"
#include "dqm/parallel.hpp"

namespace dqm {

struct scenario_options {
  std::string output_dir = ".";
  exec_mode mode = default_exec_mode();
};

// Each scenario simulates one bench measurement on the two-channel setup and
// writes its tables plus summary.json into output_dir. All of them require
// exactly two configured channels. Failures surface as exceptions; the CLI
// maps them to exit codes.

// Open-loop spectroscopy: one MW source (the first channel's modulator, at
// the configured sweep deviation) stepped across a window centered between
// the two predicted resonances. Writes sweep.csv and fits the first lock-in's
// curve with two resonance combs; an unusable fit still leaves the table and
// is reported through the sweep_fit_ok summary flag.
void scenario_sweep(const run_config& cfg, const scenario_options& opt);

// Closed-loop response scale check: a sine tone on the shared compensation
// coil current, stepped through the configured amplitude list, each run
// projected onto the tone to get the measured field amplitude per channel,
// then a proportional fit of measured against expected (amplitude times the
// coil constant). Writes calibrate.csv.
void scenario_calibrate(const run_config& cfg, const scenario_options& opt);

// Closed-loop noise run: tracks for the configured duration, discards the
// configured transient, writes traces.csv (decimated field readouts) and
// psd.csv (Welch ASDs for both channels and their difference), and computes
// in-band sensitivity figures through the analysis filter chain.
void scenario_noise(const run_config& cfg, const scenario_options& opt);

// Closed-loop small-signal transfer: a common field tone stepped over the
// configured frequency grid, amplitude ratio measured per channel, -3 dB
// corner interpolated from the first channel's curve. Writes bandwidth.csv.
void scenario_bandwidth(const run_config& cfg, const scenario_options& opt);

// Deterministic channel-separation matrix (noise sources disabled). Writes
// crosstalk.csv in long form: source_channel, measured_channel, ratio.
void scenario_crosstalk(const run_config& cfg, const scenario_options& opt);

// `dqmsim <scenario> --config <path|default> [--seed N] [--out DIR]
// [--duration S]`. Returns the process exit code: 0 on success, 1 when a
// scenario fails at runtime, 2 for usage or configuration errors.
int cli_main(int argc, const char* const* argv);

}  // namespace dqm
