#include "dqm/signal_chain.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/field.hpp"
#include "dqm/filters.hpp"
#include "dqm/random.hpp"

namespace dqm {

double instantaneous_mw_frequency(const mw_drive& drive, double t_s) {
  return drive.center_hz +
         drive.mod_deviation_hz *
             std::cos(two_pi * drive.mod_frequency_hz * t_s + drive.mod_phase_rad);
}

std::vector<double> synthesize_photocurrent(
    const std::vector<ensemble_config>& channels, const std::vector<mw_drive>& drives,
    const std::vector<std::vector<double>>& total_field_t, std::size_t first,
    std::size_t count, const noise_config& noise, const lockin_config& lockin,
    const physical_constants& pc, double sample_rate_hz, std::uint64_t seed,
    exec_mode mode) {
  const std::size_t n_ch = channels.size();
  if (n_ch == 0) throw invalid_argument_error("synthesize_photocurrent: no channels");
  if (drives.size() != n_ch || total_field_t.size() != n_ch)
    throw invalid_argument_error(
        "synthesize_photocurrent: channels, drives and field traces must align");
  if (sample_rate_hz <= 0)
    throw invalid_argument_error("synthesize_photocurrent: sample rate must be positive");
  for (const auto& f : total_field_t)
    if (f.size() < first + count)
      throw invalid_argument_error(
          "synthesize_photocurrent: field trace shorter than the requested window");

  // Enforce the linear-Zeeman range up front; the hot loop then computes the
  // resonance shift inline without per-sample checks (throwing from inside an
  // OpenMP region would abort).
  for (std::size_t c = 0; c < n_ch; ++c) {
    for (std::size_t i = first; i < first + count; ++i) {
      if (!(std::abs(total_field_t[c][i]) < 10e-3))
        throw invalid_argument_error(
            "synthesize_photocurrent: field outside the linear Zeeman range");
    }
  }

  std::vector<resonance_set> combs;
  combs.reserve(n_ch);
  for (const auto& ch : channels)
    combs.push_back(build_resonance_set(0.0, ch.hyperfine_splitting_hz,
                                        ch.contrast_per_line, ch.fwhm_hz, ch.three_tone));

  const double rin_rel =
      lockin.balanced_detection
          ? noise.laser_rin_rel_per_rthz *
                std::pow(10.0, -lockin.balanced_rin_suppression_db / 20.0)
          : noise.laser_rin_rel_per_rthz;
  const double rin_sigma = rin_rel * std::sqrt(0.5 * sample_rate_hz);
  const bool use_rin = rin_sigma > 0.0;
  const bool use_shot = noise.shot_noise_enabled;
  const random_stream rin(seed, stream_id::laser_rin);
  const random_stream shot(seed, stream_id::shot_noise);

  // The balanced detector's reference arm is matched to the no-dip level, so
  // its output is the signal current minus the flat baseline. Without that
  // subtraction the large DC mixes up to the reference frequencies in every
  // lock-in and swamps the inter-channel beat terms.
  double baseline_a = 0.0;
  for (const auto& ch : channels) baseline_a += ch.baseline_photocurrent_a;
  const double subtract_a = lockin.balanced_detection ? baseline_a : 0.0;

  const double dt = 1.0 / sample_rate_hz;
  std::vector<double> out(count);
  for_each_index(static_cast<std::int64_t>(count), mode, [&](std::int64_t k) {
    const std::uint64_t idx = first + static_cast<std::uint64_t>(k);
    const double t = static_cast<double>(idx) * dt;
    double signal = 0.0;
    for (std::size_t c = 0; c < n_ch; ++c) {
      const double f_probe = instantaneous_mw_frequency(drives[c], t);
      const double f_res = pc.zero_field_splitting_hz +
                           transition_sign(channels[c].mw_transition) *
                               pc.gamma_e_hz_per_t * total_field_t[c][idx];
      signal += channels[c].baseline_photocurrent_a *
                fluorescence_factor(combs[c], f_probe - f_res);
    }
    double current = signal;
    if (use_rin) current *= 1.0 + rin_sigma * rin.normal_at(idx);
    current -= subtract_a;
    if (use_shot)
      current += std::sqrt(pc.electron_charge_c * signal * sample_rate_hz) *
                 shot.normal_at(idx);
    out[static_cast<std::size_t>(k)] = current;
  });
  return out;
}

lockin_settings lockin_settings_for(const run_config& cfg, std::size_t channel) {
  const auto& ch = cfg.channels.at(channel);
  lockin_settings s;
  s.reference_frequency_hz = ch.mod_frequency_hz;
  s.reference_phase_rad = ch.mod_phase_rad;
  s.lpf_cutoff_hz = cfg.lockin.lpf_cutoff_hz;
  s.lpf_order = cfg.lockin.lpf_order;
  s.decimated_rate_hz = cfg.decimated_rate_hz;
  s.gain_v_per_a = cfg.lockin.transimpedance_v_per_a;
  return s;
}

demod_output lockin_demodulate(const time_series& photocurrent,
                               const lockin_settings& settings, double start_time_s,
                               exec_mode mode) {
  const double rate = photocurrent.sample_rate_hz;
  const std::size_t n = photocurrent.size();
  if (n == 0) throw invalid_argument_error("lockin_demodulate: empty trace");
  if (rate <= 0) throw invalid_argument_error("lockin_demodulate: bad sample rate");
  if (settings.reference_frequency_hz <= 0 ||
      settings.reference_frequency_hz >= 0.5 * rate)
    throw invalid_argument_error(
        "lockin_demodulate: reference frequency outside (0, Nyquist)");
  if (settings.decimated_rate_hz <= 0)
    throw invalid_argument_error("lockin_demodulate: bad decimated rate");
  const double ratio = rate / settings.decimated_rate_hz;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9)
    throw invalid_argument_error(
        "lockin_demodulate: decimated rate must divide the sample rate");
  if (settings.lpf_cutoff_hz <= 0 || settings.lpf_cutoff_hz >= 0.5 * rate)
    throw invalid_argument_error("lockin_demodulate: LPF cutoff outside (0, Nyquist)");

  // mix (parallel), filter (inherently sequential), decimate
  std::vector<double> xs(n), ys(n);
  const double w = two_pi * settings.reference_frequency_hz;
  const double g2 = 2.0 * settings.gain_v_per_a;
  const double dt = 1.0 / rate;
  const double* in = photocurrent.samples.data();
  for_each_index(static_cast<std::int64_t>(n), mode, [&](std::int64_t i) {
    const double arg = w * (start_time_s + static_cast<double>(i) * dt) +
                       settings.reference_phase_rad;
    const double v = g2 * in[i];
    xs[static_cast<std::size_t>(i)] = v * std::cos(arg);
    ys[static_cast<std::size_t>(i)] = -v * std::sin(arg);
  });

  biquad_cascade fx = design_butterworth_lowpass(settings.lpf_order, settings.lpf_cutoff_hz, rate);
  biquad_cascade fy = design_butterworth_lowpass(settings.lpf_order, settings.lpf_cutoff_hz, rate);
  fx.process(xs.data(), xs.data(), n);
  fy.process(ys.data(), ys.data(), n);

  const std::size_t n_dec = (n - 1) / m + 1;
  std::vector<double> xd(n_dec), yd(n_dec);
  for (std::size_t k = 0; k < n_dec; ++k) {
    xd[k] = xs[k * m];
    yd[k] = ys[k * m];
  }
  demod_output out;
  out.x = time_series(settings.decimated_rate_hz, std::move(xd), unit::volt);
  out.y = time_series(settings.decimated_rate_hz, std::move(yd), unit::volt);
  return out;
}

std::vector<std::vector<double>> crosstalk_matrix(const run_config& cfg, exec_mode mode) {
  const std::size_t n_ch = cfg.channel_count();
  if (n_ch == 0) throw invalid_argument_error("crosstalk_matrix: no channels");

  const double rate = cfg.sample_rate_hz;
  const double settle_s = 0.2;
  const double measure_s = 0.8;
  const auto n = static_cast<std::size_t>(std::llround((settle_s + measure_s) * rate));

  // every source parked half a linewidth above its own resonance, where the
  // in-phase response of the driven channel is near its extremum
  std::vector<mw_drive> drives;
  std::vector<std::vector<double>> fields(n_ch);
  for (std::size_t c = 0; c < n_ch; ++c) {
    const double b = channel_static_field(cfg, c);
    const double f_res = resonance_center(b, cfg.channels[c].mw_transition, cfg.constants);
    drives.push_back(drive_for(cfg.channels[c], f_res + 0.5 * cfg.channels[c].fwhm_hz));
    fields[c].assign(n, b);
  }

  noise_config quiet = cfg.noise;
  quiet.laser_rin_rel_per_rthz = 0.0;
  quiet.shot_noise_enabled = false;

  std::vector<std::vector<double>> matrix(n_ch, std::vector<double>(n_ch, 0.0));
  for (std::size_t j = 0; j < n_ch; ++j) {
    auto channels = cfg.channels;
    for (std::size_t i = 0; i < n_ch; ++i)
      if (i != j) channels[i].contrast_per_line = 0.0;

    time_series trace(rate,
                      synthesize_photocurrent(channels, drives, fields, 0, n, quiet,
                                              cfg.lockin, cfg.constants, rate, cfg.seed, mode),
                      unit::ampere);

    std::vector<double> rms(n_ch, 0.0);
    for (std::size_t i = 0; i < n_ch; ++i) {
      const demod_output out = lockin_demodulate(trace, lockin_settings_for(cfg, i), 0.0, mode);
      const auto skip =
          static_cast<std::size_t>(std::llround(settle_s * cfg.decimated_rate_hz));
      double acc = 0.0;
      std::size_t cnt = 0;
      for (std::size_t k = skip; k < out.x.size(); ++k, ++cnt)
        acc += out.x.samples[k] * out.x.samples[k] + out.y.samples[k] * out.y.samples[k];
      if (cnt == 0) throw invalid_argument_error("crosstalk_matrix: measurement window empty");
      rms[i] = std::sqrt(acc / static_cast<double>(cnt));
    }
    for (std::size_t i = 0; i < n_ch; ++i) {
      if (rms[j] <= 0.0)
        throw invalid_argument_error("crosstalk_matrix: driven channel shows no response");
      matrix[i][j] = rms[i] / rms[j];
    }
  }
  return matrix;
}

}  // namespace dqm
