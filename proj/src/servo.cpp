#include "dqm/servo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/field.hpp"
#include "dqm/filters.hpp"
#include "dqm/random.hpp"
#include "dqm/signal_chain.hpp"

namespace dqm {

double pid_step(servo_state& state, const pid_gains& gains, double error_v, double dt_s,
                double output_min_v, double output_max_v) {
  if (state.faulted) return state.output_v;
  if (!std::isfinite(error_v)) {
    state.faulted = true;
    return state.output_v;
  }
  if (!(dt_s > 0))
    throw invalid_argument_error("pid_step: update interval must be positive");
  if (!(output_min_v < output_max_v))
    throw invalid_argument_error("pid_step: output limits must be ordered");

  const double derivative = (error_v - state.previous_error_v) / dt_s;
  const double candidate_integral = state.integrator + error_v * dt_s;
  const double unclamped =
      gains.kp * error_v + gains.ki * candidate_integral + gains.kd * derivative;
  const double output = std::clamp(unclamped, output_min_v, output_max_v);

  // conditional integration: reject the accumulation only when it would push
  // further into a rail
  const bool windup_high = unclamped > output_max_v && error_v > 0;
  const bool windup_low = unclamped < output_min_v && error_v < 0;
  if (!windup_high && !windup_low) state.integrator = candidate_integral;

  state.previous_error_v = error_v;
  state.output_v = output;
  return output;
}

double acquire_lock_center(const resonance_set& set, double f_dev_hz,
                           double predicted_center_hz, double span_hz) {
  if (!(set.fwhm_hz > 0) || !(span_hz > 0) || !(f_dev_hz > 0))
    throw invalid_argument_error("acquire_lock_center: bad scan parameters");

  const double step = set.fwhm_hz / 20.0;
  const auto half_points = static_cast<std::size_t>(std::ceil(span_hz / step));
  const std::size_t count = 2 * half_points + 1;
  const double f_lo = predicted_center_hz - static_cast<double>(half_points) * step;

  std::vector<double> value(count);
  for (std::size_t i = 0; i < count; ++i)
    value[i] = lockin_first_harmonic(set, f_lo + static_cast<double>(i) * step, f_dev_hz);

  const double tol = set.fwhm_hz / 1000.0;
  double best_root = 0.0;
  double best_slope = -1.0;
  bool found = false;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    if (value[i] == 0.0 && value[i + 1] == 0.0) continue;  // dead stretch, no crossing
    if (value[i] * value[i + 1] > 0.0) continue;
    double lo = f_lo + static_cast<double>(i) * step;
    double hi = lo + step;
    double v_lo = value[i];
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const double v_mid = lockin_first_harmonic(set, mid, f_dev_hz);
      if (v_lo * v_mid <= 0.0) {
        hi = mid;
      } else {
        lo = mid;
        v_lo = v_mid;
      }
    }
    const double root = 0.5 * (lo + hi);
    const double h = set.fwhm_hz / 50.0;
    const double slope = std::abs(lockin_first_harmonic(set, root + h, f_dev_hz) -
                                  lockin_first_harmonic(set, root - h, f_dev_hz)) /
                         (2.0 * h);
    const bool better =
        slope > best_slope * (1.0 + 1e-9) ||
        (std::abs(slope - best_slope) <= best_slope * 1e-9 &&
         std::abs(root - predicted_center_hz) < std::abs(best_root - predicted_center_hz));
    if (!found || better) {
      best_root = root;
      best_slope = slope;
      found = true;
    }
  }
  if (!found)
    throw lock_loss_error(
        "lock acquisition: no discriminator zero crossing inside the scan window");
  return best_root;
}

discriminator_calibration calibrate_discriminator(const resonance_set& set,
                                                  double f_dev_hz, double f_center_hz,
                                                  double probe_offset_hz, double i0_a,
                                                  double gain_v_per_a,
                                                  double mod_phase_rad) {
  if (!(probe_offset_hz > 0))
    throw invalid_argument_error("calibrate_discriminator: probe offset must be positive");
  const double a1_hi = lockin_first_harmonic(set, f_center_hz + probe_offset_hz, f_dev_hz);
  const double a1_lo = lockin_first_harmonic(set, f_center_hz - probe_offset_hz, f_dev_hz);
  const double slope = gain_v_per_a * i0_a * (a1_hi - a1_lo) / (2.0 * probe_offset_hz);
  if (!std::isfinite(slope) || slope == 0.0)
    throw lock_loss_error("discriminator calibration: response slope vanished at the lock point");

  double phase = mod_phase_rad + (slope < 0 ? pi : 0.0);
  phase = std::remainder(phase, two_pi);
  return {phase, std::abs(slope)};
}

std::complex<double> open_loop_response(const loop_model& model, const pid_gains& gains,
                                        double f_hz) {
  using cd = std::complex<double>;
  const double dt = 1.0 / model.decimated_rate_hz;
  const cd z_inv = std::exp(cd(0.0, -two_pi * f_hz / model.decimated_rate_hz));

  cd controller(gains.kp, 0.0);
  const cd one_minus_zinv = 1.0 - z_inv;
  if (gains.ki != 0.0) controller += gains.ki * dt / one_minus_zinv;
  if (gains.kd != 0.0) controller += gains.kd * one_minus_zinv / dt;

  const biquad_cascade lpf =
      design_butterworth_lowpass(model.lpf_order, model.lpf_cutoff_hz, model.sample_rate_hz);
  const cd h_lpf = lpf.response(f_hz, model.sample_rate_hz);

  const double u = pi * f_hz / model.decimated_rate_hz;
  const double sinc = u == 0.0 ? 1.0 : std::sin(u) / u;
  const cd h_zoh = sinc * std::exp(cd(0.0, -u));

  return controller * model.dc_gain * h_lpf * h_zoh * z_inv;
}

namespace {

// grid used by both the stability probe and the corner search
std::vector<double> log_frequency_grid(double f_lo, double f_hi, std::size_t count) {
  std::vector<double> f(count);
  const double r = std::log(f_hi / f_lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) f[i] = f_lo * std::exp(r * static_cast<double>(i));
  return f;
}

}  // namespace

double predicted_closed_loop_f3db(const loop_model& model, const pid_gains& gains) {
  if (!(model.dc_gain > 0) || !(model.decimated_rate_hz > 0) ||
      !(model.sample_rate_hz > 0) || !(model.lpf_cutoff_hz > 0))
    throw invalid_argument_error("predicted_closed_loop_f3db: incomplete loop model");

  const double nyquist = 0.499 * model.decimated_rate_hz;
  const auto grid = log_frequency_grid(model.decimated_rate_hz * 1e-5, nyquist, 1200);

  // stability first: unwrap the open-loop phase and check the gain where it
  // crosses -180 degrees
  double prev_phase = 0.0;
  double unwrapped = 0.0;
  bool first = true;
  for (const double f : grid) {
    const auto l = open_loop_response(model, gains, f);
    const double ph = std::arg(l);
    if (first) {
      unwrapped = ph;
      first = false;
    } else {
      double d = ph - prev_phase;
      while (d > pi) d -= two_pi;
      while (d < -pi) d += two_pi;
      unwrapped += d;
    }
    prev_phase = ph;
    if (unwrapped <= -pi) {
      if (std::abs(l) >= 1.0) return -1.0;
      break;
    }
  }

  const auto closed_mag = [&](double f) {
    const auto l = open_loop_response(model, gains, f);
    return std::abs(l / (1.0 + l));
  };
  const double level = 1.0 / std::sqrt(2.0);

  // highest grid frequency still at or above the -3 dB level
  std::size_t last_above = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (closed_mag(grid[i]) >= level) last_above = i;
  if (last_above == grid.size()) return grid.front();
  if (last_above + 1 == grid.size()) return nyquist;

  double lo = grid[last_above];
  double hi = grid[last_above + 1];
  for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (closed_mag(mid) >= level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

pid_gains auto_tune_integrator(const loop_model& model, double target_bandwidth_hz) {
  if (!(target_bandwidth_hz > 0))
    throw invalid_argument_error("auto_tune_integrator: target bandwidth must be positive");
  const double placed = 1.5 * target_bandwidth_hz;
  if (placed >= 0.499 * model.decimated_rate_hz)
    throw invalid_argument_error(
        "auto_tune_integrator: requested bandwidth too close to the decimated Nyquist");

  const auto corner = [&](double ki) {
    const double f = predicted_closed_loop_f3db(model, pid_gains{0.0, ki, 0.0});
    return f < 0 ? std::numeric_limits<double>::infinity() : f;  // unstable: past target
  };

  // crossover estimate for a bare integrator loop: |L| ~ ki * g / (2 pi f)
  double ki_hi = two_pi * placed / model.dc_gain;
  double ki_lo = ki_hi / 64.0;
  while (corner(ki_lo) >= placed && ki_lo > 1e-12 * ki_hi) ki_lo /= 4.0;
  int grow = 0;
  while (corner(ki_hi) < placed) {
    ki_hi *= 2.0;
    if (++grow > 60)
      throw fit_error("auto_tune_integrator: corner target unreachable for this loop");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (ki_lo + ki_hi);
    (corner(mid) < placed ? ki_lo : ki_hi) = mid;
  }
  return pid_gains{0.0, 0.5 * (ki_lo + ki_hi), 0.0};
}

namespace {

struct channel_runtime {
  // physics
  double b_static = 0.0;
  double trans_sign = 1.0;
  double i0_a = 0.0;
  resonance_set comb0;  // centered at zero, evaluated at the instantaneous detuning
  // drive
  double omega = 0.0;
  double dev_hz = 0.0;
  double mod_phase = 0.0;
  double lock_center_hz = 0.0;
  // demodulation
  double ref_phase = 0.0;
  biquad_cascade fx, fy;
  double last_x = 0.0;
  double last_f_res = 0.0;
  // control
  servo_state st;
  pid_gains gains;
  double polarity = 1.0;
  double alpha = 0.0;
  double out_min = 0.0, out_max = 0.0;
  double held_v = 0.0;
  double slope = 0.0;
  double threshold_hz = 0.0;
  double capture_hz = 0.0;
  std::size_t settle_count = 1;
  std::size_t run_below = 0;
  channel_loop_report report;
};

}  // namespace

locked_run_result run_locked(const run_config& cfg,
                             const std::vector<std::vector<double>>& applied_field_t,
                             exec_mode mode) {
  const std::size_t n_ch = cfg.channel_count();
  if (n_ch == 0) throw invalid_argument_error("run_locked: no channels");
  const double rate = cfg.sample_rate_hz;
  const double dec = cfg.decimated_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * rate));
  if (n == 0) throw invalid_argument_error("run_locked: zero-length run");
  const double ratio = rate / dec;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9)
    throw invalid_argument_error("run_locked: decimated rate must divide the sample rate");
  if (!applied_field_t.empty()) {
    if (applied_field_t.size() != n_ch)
      throw invalid_argument_error(
          "run_locked: applied field traces must match the channel count");
    for (const auto& a : applied_field_t)
      if (a.size() < n)
        throw invalid_argument_error("run_locked: applied field trace shorter than the run");
  }

  const auto env =
      generate_environmental_noise(cfg.noise, n_ch, n, rate, cfg.seed, mode);

  // acquisition, calibration and tuning, channel by channel
  std::vector<channel_runtime> chs(n_ch);
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto& ec = cfg.channels[c];
    const auto& sv = cfg.servo_for(c);
    channel_runtime& cr = chs[c];

    cr.b_static = channel_static_field(cfg, c);
    cr.trans_sign = transition_sign(ec.mw_transition);
    cr.i0_a = ec.baseline_photocurrent_a;
    cr.comb0 = build_resonance_set(0.0, ec.hyperfine_splitting_hz, ec.contrast_per_line,
                                   ec.fwhm_hz, ec.three_tone);
    cr.omega = two_pi * ec.mod_frequency_hz;
    cr.dev_hz = ec.mod_deviation_hz;
    cr.mod_phase = ec.mod_phase_rad;
    cr.alpha = sv.alpha_hz_per_v;
    cr.out_min = sv.output_min_v;
    cr.out_max = sv.output_max_v;

    const double f_res = resonance_center(cr.b_static, ec.mw_transition, cfg.constants);
    const resonance_set comb_true = build_resonance_set(
        f_res, ec.hyperfine_splitting_hz, ec.contrast_per_line, ec.fwhm_hz, ec.three_tone);
    // the predicted center comes from the instrument's own bias setpoint
    cr.lock_center_hz = acquire_lock_center(comb_true, cr.dev_hz, f_res, 3.0 * ec.fwhm_hz);

    const auto cal = calibrate_discriminator(
        comb_true, cr.dev_hz, cr.lock_center_hz, ec.fwhm_hz / 20.0, cr.i0_a,
        cfg.lockin.transimpedance_v_per_a, cr.mod_phase);
    cr.ref_phase = cal.reference_phase_rad;
    cr.slope = cal.slope_v_per_hz;
    // phase calibration leaves a positive in-phase slope versus MW frequency,
    // so the loop sign depends only on how the output voltage moves the MW
    cr.polarity = (cr.trans_sign * cr.alpha) > 0 ? 1.0 : -1.0;

    loop_model lm;
    lm.dc_gain = std::abs(cr.alpha) * cr.slope;
    lm.lpf_cutoff_hz = cfg.lockin.lpf_cutoff_hz;
    lm.lpf_order = cfg.lockin.lpf_order;
    lm.sample_rate_hz = rate;
    lm.decimated_rate_hz = dec;
    const bool manual = sv.kp.has_value() && sv.ki.has_value() && sv.kd.has_value();
    cr.gains = manual ? pid_gains{*sv.kp, *sv.ki, *sv.kd}
                      : auto_tune_integrator(lm, sv.target_bandwidth_hz);
    cr.report.gains_auto_tuned = !manual;
    cr.report.predicted_f3db_hz = predicted_closed_loop_f3db(lm, cr.gains);

    cr.fx = design_butterworth_lowpass(cfg.lockin.lpf_order, cfg.lockin.lpf_cutoff_hz, rate);
    cr.fy = design_butterworth_lowpass(cfg.lockin.lpf_order, cfg.lockin.lpf_cutoff_hz, rate);
    cr.threshold_hz = sv.lock_threshold_fraction * ec.fwhm_hz;
    cr.capture_hz = ec.fwhm_hz;
    cr.settle_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(sv.lock_settle_s * dec)));

    cr.report.lock_center_hz = cr.lock_center_hz;
    cr.report.reference_phase_rad = cr.ref_phase;
    cr.report.discriminator_slope_v_per_hz = cr.slope;
    cr.report.loop_polarity = cr.polarity;
    cr.report.gains = cr.gains;
  }

  // detector noise, mirroring synthesize_photocurrent sample for sample
  const double rin_rel =
      cfg.lockin.balanced_detection
          ? cfg.noise.laser_rin_rel_per_rthz *
                std::pow(10.0, -cfg.lockin.balanced_rin_suppression_db / 20.0)
          : cfg.noise.laser_rin_rel_per_rthz;
  const double rin_sigma = rin_rel * std::sqrt(0.5 * rate);
  const bool use_rin = rin_sigma > 0.0;
  const bool use_shot = cfg.noise.shot_noise_enabled;
  const random_stream rin(cfg.seed, stream_id::laser_rin);
  const random_stream shot(cfg.seed, stream_id::shot_noise);
  double baseline_a = 0.0;
  for (const auto& ec : cfg.channels) baseline_a += ec.baseline_photocurrent_a;
  const double subtract_a = cfg.lockin.balanced_detection ? baseline_a : 0.0;

  const double gamma = cfg.constants.gamma_e_hz_per_t;
  const double dsplit = cfg.constants.zero_field_splitting_hz;
  const double gain2 = 2.0 * cfg.lockin.transimpedance_v_per_a;
  const double dt = 1.0 / rate;
  const double dt_dec = 1.0 / dec;

  const std::size_t n_dec = (n - 1) / m + 1;
  std::vector<std::vector<double>> delta_b(n_ch, std::vector<double>(n_dec));
  std::vector<std::vector<double>> feedback(n_ch, std::vector<double>(n_dec));
  std::vector<std::vector<std::uint8_t>> valid(n_ch, std::vector<std::uint8_t>(n_dec));
  double current_acc = 0.0;

  // The tracking loop itself is inherently sequential: each sample's MW
  // frequency depends on the servo output from the previous decimated block.
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;

    double signal = 0.0;
    for (std::size_t c = 0; c < n_ch; ++c) {
      channel_runtime& cr = chs[c];
      double b = cr.b_static + env[c][i];
      if (!applied_field_t.empty()) b += applied_field_t[c][i];
      const double f_res = dsplit + cr.trans_sign * gamma * b;
      const double f_probe = cr.lock_center_hz + cr.trans_sign * cr.alpha * cr.held_v +
                             cr.dev_hz * std::cos(cr.omega * t + cr.mod_phase);
      cr.last_f_res = f_res;
      signal += cr.i0_a * fluorescence_factor(cr.comb0, f_probe - f_res);
    }
    current_acc += signal;

    double current = signal;
    if (use_rin) current *= 1.0 + rin_sigma * rin.normal_at(i);
    current -= subtract_a;
    if (use_shot)
      current += std::sqrt(cfg.constants.electron_charge_c * signal * rate) * shot.normal_at(i);

    for (std::size_t c = 0; c < n_ch; ++c) {
      channel_runtime& cr = chs[c];
      const double arg = cr.omega * t + cr.ref_phase;
      const double v = gain2 * current;
      cr.last_x = cr.fx.step(v * std::cos(arg));
      cr.fy.step(-v * std::sin(arg));
    }

    if (i % m == 0) {
      const std::size_t k = i / m;
      for (std::size_t c = 0; c < n_ch; ++c) {
        channel_runtime& cr = chs[c];
        const double error = -cr.polarity * cr.last_x;
        const double out = pid_step(cr.st, cr.gains, error, dt_dec, cr.out_min, cr.out_max);
        cr.held_v = out;

        const double detune_est_hz = std::abs(cr.last_x) / cr.slope;
        // The discriminator's own estimate saturates well inside one linewidth
        // (the first harmonic peaks around 0.2 fwhm off center), so it cannot
        // tell a lock point from a dead-flat response far off resonance. The
        // validity monitor therefore checks the commanded MW center against
        // the resonance the simulation synthesized.
        const double f_center = cr.lock_center_hz + cr.trans_sign * cr.alpha * out;
        const bool in_capture = std::abs(f_center - cr.last_f_res) <= cr.capture_hz;
        valid[c][k] = in_capture ? 1 : 0;
        if (!in_capture) {
          ++cr.report.invalid_samples;
          if (cr.st.locked) {
            cr.report.lock_lost = true;
            cr.st.locked = false;
            cr.run_below = 0;
          }
        }
        if (detune_est_hz <= cr.threshold_hz) {
          ++cr.run_below;
          if (!cr.st.locked && cr.run_below >= cr.settle_count) {
            cr.st.locked = true;
            if (cr.report.time_to_lock_s < 0) cr.report.time_to_lock_s = t;
          }
        } else {
          cr.run_below = 0;
        }

        feedback[c][k] = out;
        delta_b[c][k] = field_readout_t(out, cr.alpha, cfg.constants);
      }
    }
  }

  locked_run_result result;
  result.decimated_rate_hz = dec;
  result.mean_photocurrent_a = current_acc / static_cast<double>(n);
  result.valid = std::move(valid);
  for (std::size_t c = 0; c < n_ch; ++c) {
    result.delta_b.emplace_back(dec, std::move(delta_b[c]), unit::tesla);
    result.feedback_v.emplace_back(dec, std::move(feedback[c]), unit::volt);
    chs[c].report.faulted = chs[c].st.faulted;
    result.channels.push_back(chs[c].report);
  }
  return result;
}

}  // namespace dqm
