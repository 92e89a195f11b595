#include "dqm/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dqm/constants.hpp"
#include "dqm/dsp.hpp"
#include "dqm/errors.hpp"
#include "dqm/field.hpp"
#include "dqm/filters.hpp"
#include "dqm/fitting.hpp"
#include "dqm/io.hpp"
#include "dqm/nv.hpp"
#include "dqm/servo.hpp"
#include "dqm/signal_chain.hpp"
#include "dqm/types.hpp"

namespace dqm {
namespace {

namespace fs = std::filesystem;

using summary_map = std::vector<std::pair<std::string, double>>;

fs::path prepare_output_dir(const scenario_options& opt) {
  fs::path dir = opt.output_dir.empty() ? fs::path(".") : fs::path(opt.output_dir);
  fs::create_directories(dir);
  return dir;
}

// The output tables pin two channel columns, so the scenarios are defined for
// the two-ensemble bench only.
void require_two_channels(const run_config& cfg) {
  if (cfg.channel_count() != 2)
    throw invalid_argument_error("scenario requires exactly two configured channels");
}

std::size_t count_at(double seconds, double rate_hz) {
  return static_cast<std::size_t>(std::llround(seconds * rate_hz));
}

// Complex amplitude of a known tone over samples [first, first + count).
// Callers pick the window to cover an integer number of tone periods, which
// keeps the projection orthogonal to DC and to slow drift.
std::complex<double> tone_amplitude(const std::vector<double>& samples, std::size_t first,
                                    std::size_t count, double rate_hz, double f_hz) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t j = 0; j < count; ++j) {
    const double ph = two_pi * f_hz * static_cast<double>(first + j) / rate_hz;
    acc += samples[first + j] * std::complex<double>(std::cos(ph), -std::sin(ph));
  }
  return 2.0 / static_cast<double>(count) * acc;
}

void ensure_locked(const channel_loop_report& rep, std::size_t channel,
                   const std::string& step) {
  const std::string tag = "channel " + std::to_string(channel + 1);
  if (rep.time_to_lock_s < 0.0)
    throw lock_loss_error(tag + " never locked during " + step);
  if (rep.lock_lost) throw lock_loss_error(tag + " lost lock during " + step);
}

}  // namespace

void scenario_sweep(const run_config& cfg, const scenario_options& opt) {
  require_two_channels(cfg);
  const fs::path dir = prepare_output_dir(opt);
  const auto& sc = cfg.scenario;
  const auto& pc = cfg.constants;
  const double rate = cfg.sample_rate_hz;

  std::array<double, 2> predicted{};
  for (std::size_t c = 0; c < 2; ++c)
    predicted[c] =
        resonance_center(channel_static_field(cfg, c), cfg.channels[c].mw_transition, pc);

  const std::size_t points = sc.sweep_points;
  if (points < 2) throw invalid_argument_error("sweep: needs at least two points");
  const double f_first = 0.5 * (predicted[0] + predicted[1]) - 0.5 * sc.sweep_span_hz;
  const double df = sc.sweep_span_hz / static_cast<double>(points - 1);

  const std::size_t settle_n = count_at(sc.sweep_settle_s, rate);
  const std::size_t avg_n = count_at(sc.sweep_average_s, rate);
  if (avg_n == 0)
    throw invalid_argument_error("sweep: averaging window shorter than one sample");
  const std::size_t n_per = settle_n + avg_n;

  // Static bias plus environmental noise, generated for the whole sweep up
  // front so each step's segment comes from one continuous record.
  auto field = generate_environmental_noise(cfg.noise, 2, n_per * points, rate, cfg.seed,
                                            opt.mode);
  for (std::size_t c = 0; c < 2; ++c) {
    const double b0 = channel_static_field(cfg, c);
    for (auto& b : field[c]) b += b0;
  }

  // One spectroscopy source is stepped across both resonances, dithering at
  // the first channel's modulation frequency with the gentler sweep deviation.
  // Both lock-ins record the whole time; their filters and reference clocks
  // run continuously across the steps, as on the bench.
  std::array<biquad_cascade, 2> fx;
  std::array<double, 2> omega{};
  std::array<double, 2> phase{};
  for (std::size_t c = 0; c < 2; ++c) {
    fx[c] =
        design_butterworth_lowpass(cfg.lockin.lpf_order, cfg.lockin.lpf_cutoff_hz, rate);
    omega[c] = two_pi * cfg.channels[c].mod_frequency_hz;
    phase[c] = cfg.channels[c].mod_phase_rad;
  }
  const double gain = cfg.lockin.transimpedance_v_per_a;
  const double dt = 1.0 / rate;

  std::vector<double> freq(points);
  std::array<std::vector<double>, 2> avg_x;
  for (auto& v : avg_x) v.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    freq[k] = f_first + df * static_cast<double>(k);
    const mw_drive source{freq[k], cfg.channels[0].mod_frequency_hz, sc.sweep_deviation_hz,
                          cfg.channels[0].mod_phase_rad};
    const std::vector<mw_drive> drives{source, source};
    const auto current =
        synthesize_photocurrent(cfg.channels, drives, field, k * n_per, n_per, cfg.noise,
                                cfg.lockin, pc, rate, cfg.seed, opt.mode);
    std::array<double, 2> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n_per; ++i) {
      const double t = static_cast<double>(k * n_per + i) * dt;
      for (std::size_t c = 0; c < 2; ++c) {
        const double v = fx[c].step(2.0 * gain * current[i] * std::cos(omega[c] * t + phase[c]));
        if (i >= settle_n) acc[c] += v;
      }
    }
    for (std::size_t c = 0; c < 2; ++c)
      avg_x[c][k] = acc[c] / static_cast<double>(avg_n);
  }

  csv_writer table({"mw_frequency_hz", "lockin_x_ch1_v", "lockin_x_ch2_v"});
  for (std::size_t k = 0; k < points; ++k)
    table.add_row(std::vector<double>{freq[k], avg_x[0][k], avg_x[1][k]});
  table.write_file((dir / "sweep.csv").string());

  // The swept source passes through both dips, so the first lock-in alone
  // sees the full two-comb curve; fit it with two resonance sets and map the
  // sorted fit results back to channels by their predicted order.
  summary_map summary;
  summary.emplace_back("predicted_center_ch1_hz", predicted[0]);
  summary.emplace_back("predicted_center_ch2_hz", predicted[1]);
  summary.emplace_back("predicted_separation_hz", std::abs(predicted[1] - predicted[0]));
  double fit_ok = 1.0;
  try {
    const spectrum data(freq, avg_x[0], spectrum_kind::demodulated);
    const std::vector<double> init{std::min(predicted[0], predicted[1]),
                                   std::max(predicted[0], predicted[1])};
    const std::size_t components = cfg.channels[0].three_tone ? 5 : 3;
    const auto fit = fit_derivative_lorentzian_sum(
        data, 2, cfg.channels[0].hyperfine_splitting_hz, init, cfg.channels[0].fwhm_hz,
        components);
    const bool ch1_low = predicted[0] <= predicted[1];
    const lineshape_fit& s1 = ch1_low ? fit.sets[0] : fit.sets[1];
    const lineshape_fit& s2 = ch1_low ? fit.sets[1] : fit.sets[0];
    summary.emplace_back("center_ch1_hz", s1.center_hz);
    summary.emplace_back("center_ch2_hz", s2.center_hz);
    summary.emplace_back("center_stderr_ch1_hz", s1.center_stderr_hz);
    summary.emplace_back("center_stderr_ch2_hz", s2.center_stderr_hz);
    summary.emplace_back("fwhm_ch1_hz", s1.fwhm_hz);
    summary.emplace_back("fwhm_ch2_hz", s2.fwhm_hz);
    summary.emplace_back("fwhm_stderr_ch1_hz", s1.fwhm_stderr_hz);
    summary.emplace_back("fwhm_stderr_ch2_hz", s2.fwhm_stderr_hz);
    summary.emplace_back("separation_hz", std::abs(s2.center_hz - s1.center_hz));
    summary.emplace_back("fit_residual_rms_v", fit.residual_rms);
    summary.emplace_back("fit_iterations", static_cast<double>(fit.iterations));
  } catch (const fit_error&) {
    // the table is already on disk; report the failed fit instead of dying
    fit_ok = 0.0;
  }
  summary.emplace_back("sweep_fit_ok", fit_ok);
  write_summary_json((dir / "summary.json").string(), "sweep", cfg.seed, summary, cfg);
}

void scenario_calibrate(const run_config& cfg, const scenario_options& opt) {
  require_two_channels(cfg);
  const fs::path dir = prepare_output_dir(opt);
  const auto& sc = cfg.scenario;
  const double f_tone = sc.calibration_tone_hz;
  const auto& amps = sc.calibration_current_amplitudes_a;
  if (amps.empty()) throw invalid_argument_error("calibrate: no probe amplitudes configured");

  run_config run = cfg;
  run.duration_s = sc.calibration_settle_s + sc.calibration_measure_s;
  const double rate = cfg.sample_rate_hz;
  const double dec = cfg.decimated_rate_hz;
  const std::size_t n = count_at(run.duration_s, rate);

  const auto periods = static_cast<std::size_t>(std::floor(sc.calibration_measure_s * f_tone));
  if (periods == 0)
    throw invalid_argument_error("calibrate: measurement window shorter than one tone period");
  const std::size_t first = count_at(sc.calibration_settle_s, dec);
  const std::size_t window = count_at(static_cast<double>(periods) / f_tone, dec);

  std::array<std::vector<double>, 2> expected;
  std::array<std::vector<double>, 2> measured;
  csv_writer table(
      {"amplitude_a", "expected_ch1_t", "measured_ch1_t", "expected_ch2_t", "measured_ch2_t"});

  for (std::size_t m = 0; m < amps.size(); ++m) {
    // a sine tone on the shared series current; each channel sees it through
    // its own coil constant, sign included
    std::vector<std::vector<double>> applied(2, std::vector<double>(n));
    for (std::size_t c = 0; c < 2; ++c) {
      const double scale = cfg.bias.calibration_t_per_a[c] * amps[m];
      for (std::size_t i = 0; i < n; ++i)
        applied[c][i] = scale * std::sin(two_pi * f_tone * static_cast<double>(i) / rate);
    }
    // every amplitude is its own bench run with fresh noise, still seeded
    run.seed = cfg.seed + m;
    const auto res = run_locked(run, applied, opt.mode);
    std::array<double, 2> row{};
    for (std::size_t c = 0; c < 2; ++c) {
      ensure_locked(res.channels[c], c,
                    "calibration at " + format_double(amps[m]) + " A");
      if (first + window > res.delta_b[c].size())
        throw invalid_argument_error("calibrate: projection window exceeds the run");
      row[c] = std::abs(
          tone_amplitude(res.delta_b[c].samples, first, window, dec, f_tone));
      expected[c].push_back(std::abs(cfg.bias.calibration_t_per_a[c]) * amps[m]);
      measured[c].push_back(row[c]);
    }
    table.add_row(std::vector<double>{amps[m], expected[0].back(), row[0],
                                      expected[1].back(), row[1]});
  }
  table.write_file((dir / "calibrate.csv").string());

  summary_map summary;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto fit = fit_proportional(expected[c], measured[c]);
    const std::string suffix = "_ch" + std::to_string(c + 1);
    summary.emplace_back("slope" + suffix, fit.slope);
    summary.emplace_back("slope_stderr" + suffix, fit.slope_stderr);
  }
  summary.emplace_back("tone_frequency_hz", f_tone);
  summary.emplace_back("amplitudes_run", static_cast<double>(amps.size()));
  write_summary_json((dir / "summary.json").string(), "calibrate", cfg.seed, summary, cfg);
}

void scenario_noise(const run_config& cfg, const scenario_options& opt) {
  require_two_channels(cfg);
  const fs::path dir = prepare_output_dir(opt);
  const auto& an = cfg.analysis;
  if (cfg.duration_s <= an.transient_discard_s)
    throw invalid_argument_error("noise: duration does not outlast the transient discard");

  const auto res = run_locked(cfg, {}, opt.mode);
  for (std::size_t c = 0; c < 2; ++c) ensure_locked(res.channels[c], c, "the noise run");

  const double dec = res.decimated_rate_hz;
  const std::size_t skip = count_at(an.transient_discard_s, dec);
  std::array<time_series, 2> trimmed;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& s = res.delta_b[c].samples;
    if (skip >= s.size())
      throw invalid_argument_error("noise: nothing left after the transient discard");
    trimmed[c] = time_series(dec, std::vector<double>(s.begin() + skip, s.end()), unit::tesla);
  }
  const time_series grad = gradiometer(trimmed[0], trimmed[1]);

  csv_writer traces({"time_s", "delta_b_ch1_t", "delta_b_ch2_t"});
  for (std::size_t j = 0; j < trimmed[0].size(); ++j) {
    const double t = static_cast<double>(skip + j) / dec;
    traces.add_row(std::vector<double>{t, trimmed[0].samples[j], trimmed[1].samples[j]});
  }
  traces.write_file((dir / "traces.csv").string());

  const std::size_t segment = default_welch_segment(trimmed[0], an.welch_segment_s);
  const spectrum asd1 = psd_to_asd(welch_psd(trimmed[0], segment, opt.mode));
  const spectrum asd2 = psd_to_asd(welch_psd(trimmed[1], segment, opt.mode));
  const spectrum asdg = psd_to_asd(welch_psd(grad, segment, opt.mode));
  csv_writer psd(
      {"frequency_hz", "asd_ch1_t_per_rthz", "asd_ch2_t_per_rthz", "asd_grad_t_per_rthz"});
  for (std::size_t j = 0; j < asd1.size(); ++j)
    psd.add_row(std::vector<double>{asd1.frequencies_hz[j], asd1.values[j], asd2.values[j],
                                    asdg.values[j]});
  psd.write_file((dir / "psd.csv").string());

  // Headline sensitivity goes through the analysis chain. The notches ring
  // for a while after switch-on (Q of 30), so a second transient window is
  // dropped from the filtered traces before taking the rms.
  const auto chain = analysis_filter_chain(an);
  const double neb = noise_equivalent_bandwidth(chain, dec);
  const auto in_band = [&](const time_series& tr) {
    time_series f = apply_filter(tr, chain);
    if (skip >= f.size())
      throw invalid_argument_error("noise: trace too short for the filtered analysis");
    f.samples.erase(f.samples.begin(), f.samples.begin() + static_cast<std::ptrdiff_t>(skip));
    return sensitivity(f, neb);
  };
  const sensitivity_report s1 = in_band(trimmed[0]);
  const sensitivity_report s2 = in_band(trimmed[1]);
  const sensitivity_report sg = in_band(grad);

  summary_map summary;
  summary.emplace_back("sensitivity_ch1_t_per_rthz", s1.sensitivity_t_per_rthz);
  summary.emplace_back("sensitivity_ch2_t_per_rthz", s2.sensitivity_t_per_rthz);
  summary.emplace_back("sensitivity_grad_t_per_rthz", sg.sensitivity_t_per_rthz);
  summary.emplace_back("in_band_rms_ch1_t", s1.rms_t);
  summary.emplace_back("in_band_rms_ch2_t", s2.rms_t);
  summary.emplace_back("in_band_rms_grad_t", sg.rms_t);
  summary.emplace_back("noise_equivalent_bandwidth_hz", neb);
  summary.emplace_back("mean_photocurrent_a", res.mean_photocurrent_a);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& rep = res.channels[c];
    const std::string suffix = "_ch" + std::to_string(c + 1);
    const double slope_a_per_hz =
        rep.discriminator_slope_v_per_hz / cfg.lockin.transimpedance_v_per_a;
    summary.emplace_back("shot_noise_limit" + suffix + "_t_per_rthz",
                         shot_noise_limit_t_per_rthz(res.mean_photocurrent_a,
                                                     slope_a_per_hz, cfg.constants));
    summary.emplace_back("lock_center" + suffix + "_hz", rep.lock_center_hz);
    summary.emplace_back("discriminator_slope" + suffix + "_v_per_hz",
                         rep.discriminator_slope_v_per_hz);
    summary.emplace_back("predicted_f3db" + suffix + "_hz", rep.predicted_f3db_hz);
    summary.emplace_back("time_to_lock" + suffix + "_s", rep.time_to_lock_s);
    summary.emplace_back("invalid_samples" + suffix,
                         static_cast<double>(rep.invalid_samples));
  }
  write_summary_json((dir / "summary.json").string(), "noise", cfg.seed, summary, cfg);
}

void scenario_bandwidth(const run_config& cfg, const scenario_options& opt) {
  require_two_channels(cfg);
  const fs::path dir = prepare_output_dir(opt);
  const auto& sc = cfg.scenario;
  const double amp = sc.bandwidth_amplitude_t;
  const double rate = cfg.sample_rate_hz;
  const double dec = cfg.decimated_rate_hz;

  std::vector<double> ratio_ch2;
  ratio_ch2.reserve(sc.bandwidth_frequencies_hz.size());
  std::vector<channel_loop_report> reports;
  std::size_t step = 0;

  const auto ratio_at = [&](double f) {
    // measure over whole tone periods: at least the configured window and at
    // least ten periods so the low end is not starved of cycles
    const double want = std::max(sc.bandwidth_min_measure_s, 10.0 / f);
    const auto periods = static_cast<std::size_t>(std::ceil(want * f - 1e-9));
    const double measure = static_cast<double>(periods) / f;

    run_config run = cfg;
    run.duration_s = sc.bandwidth_settle_s + measure;
    run.seed = cfg.seed + step;
    ++step;
    const std::size_t n = count_at(run.duration_s, rate);
    // the probe mimics an ambient field change, common to both sensors
    std::vector<std::vector<double>> applied(2, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      applied[0][i] = amp * std::sin(two_pi * f * static_cast<double>(i) / rate);
    applied[1] = applied[0];

    const auto res = run_locked(run, applied, opt.mode);
    const std::string step_name = "the bandwidth tone at " + format_double(f) + " Hz";
    for (std::size_t c = 0; c < 2; ++c) ensure_locked(res.channels[c], c, step_name);
    reports = res.channels;

    const std::size_t first = count_at(sc.bandwidth_settle_s, dec);
    std::size_t window = count_at(measure, dec);
    if (first + window > res.delta_b[0].size()) window = res.delta_b[0].size() - first;
    ratio_ch2.push_back(
        std::abs(tone_amplitude(res.delta_b[1].samples, first, window, dec, f)) / amp);
    return std::abs(tone_amplitude(res.delta_b[0].samples, first, window, dec, f)) / amp;
  };

  const bandwidth_result bw1 = measure_bandwidth(ratio_at, sc.bandwidth_frequencies_hz);
  // second channel's corner from the ratios recorded during the same sweep
  std::size_t replay = 0;
  const bandwidth_result bw2 = measure_bandwidth(
      [&](double) { return ratio_ch2[replay++]; }, sc.bandwidth_frequencies_hz);

  csv_writer table({"frequency_hz", "ratio_ch1", "ratio_ch2"});
  for (std::size_t k = 0; k < bw1.transfer.size(); ++k)
    table.add_row(std::vector<double>{bw1.transfer.frequencies_hz[k],
                                      bw1.transfer.values[k], ratio_ch2[k]});
  table.write_file((dir / "bandwidth.csv").string());

  summary_map summary;
  summary.emplace_back("f3db_ch1_hz", bw1.f3db_hz);
  summary.emplace_back("f3db_ch2_hz", bw2.f3db_hz);
  for (std::size_t c = 0; c < reports.size(); ++c)
    summary.emplace_back("predicted_f3db_ch" + std::to_string(c + 1) + "_hz",
                         reports[c].predicted_f3db_hz);
  summary.emplace_back("tones_run", static_cast<double>(step));
  write_summary_json((dir / "summary.json").string(), "bandwidth", cfg.seed, summary, cfg);
}

void scenario_crosstalk(const run_config& cfg, const scenario_options& opt) {
  require_two_channels(cfg);
  const fs::path dir = prepare_output_dir(opt);
  const auto matrix = crosstalk_matrix(cfg, opt.mode);

  csv_writer table({"source_channel", "measured_channel", "ratio"});
  for (std::size_t j = 0; j < matrix.size(); ++j)
    for (std::size_t i = 0; i < matrix.size(); ++i)
      table.add_row(std::vector<double>{static_cast<double>(j + 1),
                                        static_cast<double>(i + 1), matrix[i][j]});
  table.write_file((dir / "crosstalk.csv").string());

  summary_map summary;
  summary.emplace_back("crosstalk_ch1_to_ch2", matrix[1][0]);
  summary.emplace_back("crosstalk_ch2_to_ch1", matrix[0][1]);
  summary.emplace_back("max_offdiagonal", std::max(matrix[1][0], matrix[0][1]));
  write_summary_json((dir / "summary.json").string(), "crosstalk", cfg.seed, summary, cfg);
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"two-channel FDM diamond magnetometer bench simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  double duration = 0.0;

  const std::array<std::pair<const char*, const char*>, 5> scenarios{{
      {"sweep", "open-loop resonance sweep and two-comb fit"},
      {"calibrate", "closed-loop response scale against the coil constants"},
      {"noise", "closed-loop noise run: traces, spectra, sensitivity"},
      {"bandwidth", "closed-loop small-signal transfer and -3 dB corner"},
      {"crosstalk", "deterministic channel separation matrix"},
  }};
  for (const auto& [name, desc] : scenarios) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path,
                    "config file path, or the literal \"default\"")
        ->required();
    sub->add_option("--seed", seed, "override the RNG seed");
    sub->add_option("--out", out_dir, "output directory, created if missing");
    sub->add_option("--duration", duration, "override the run duration in seconds");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  CLI::App* sub = app.get_subcommands().front();

  run_config cfg;
  try {
    cfg = config_path == "default" ? default_run_config() : load_config_file(config_path);
    if (sub->count("--seed") > 0) cfg.seed = seed;
    if (sub->count("--duration") > 0) cfg.duration_s = duration;
    validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  scenario_options opt;
  opt.output_dir = out_dir;
  try {
    const std::string name = sub->get_name();
    if (name == "sweep") scenario_sweep(cfg, opt);
    else if (name == "calibrate") scenario_calibrate(cfg, opt);
    else if (name == "noise") scenario_noise(cfg, opt);
    else if (name == "bandwidth") scenario_bandwidth(cfg, opt);
    else scenario_crosstalk(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << sub->get_name() << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dqm
