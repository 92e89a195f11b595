#include "dqm/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/fft.hpp"
#include "dqm/random.hpp"

namespace dqm {

double loop_field_per_amp_turn(double radius_m, double axial_distance_m) noexcept {
  const double r2 = radius_m * radius_m;
  const double s = r2 + axial_distance_m * axial_distance_m;
  return mu0_t_m_per_a * r2 / (2.0 * s * std::sqrt(s));
}

double loop_field_gradient_per_amp_turn(double radius_m,
                                        double axial_distance_m) noexcept {
  const double r2 = radius_m * radius_m;
  const double s = r2 + axial_distance_m * axial_distance_m;
  return -1.5 * mu0_t_m_per_a * r2 * axial_distance_m / (s * s * std::sqrt(s));
}

double coil_field_per_amp_at(const bias_field_config& bias, double position_m) {
  double per_amp = 0.0;
  for (int j = 0; j < 2; ++j) {
    per_amp += bias.coil_polarity[j] * bias.coil_turns[j] *
               loop_field_per_amp_turn(bias.coil_radius_m,
                                       position_m - bias.coil_positions_m[j]);
  }
  return per_amp;
}

namespace {

double coil_gradient_per_amp_at(const bias_field_config& bias, double position_m) {
  double per_amp = 0.0;
  for (int j = 0; j < 2; ++j) {
    per_amp += bias.coil_polarity[j] * bias.coil_turns[j] *
               loop_field_gradient_per_amp_turn(
                   bias.coil_radius_m, position_m - bias.coil_positions_m[j]);
  }
  return per_amp;
}

}  // namespace

double bias_field_at(const bias_field_config& bias, double position_m,
                     double coil_current_a) {
  if (!(std::abs(position_m) <= 5e-3))
    throw invalid_argument_error(
        "bias_field_at: position outside the modeled +/-5 mm range");
  const double x = position_m;
  const double magnet = bias.magnet_center_t + bias.magnet_slope_t_per_m * x +
                        bias.magnet_curvature_t_per_m2 * x * x;
  return magnet + coil_current_a * coil_field_per_amp_at(bias, x);
}

double bias_field_at(const bias_field_config& bias, double position_m) {
  return bias_field_at(bias, position_m, bias.series_current_a);
}

namespace {

// Gaussian elimination with partial pivoting for the 4x4 Newton systems.
// Throws fit_error on a (numerically) singular matrix.
std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> a,
                             std::array<double, 4> b) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-300) {
      throw fit_error("bias geometry solve: singular Jacobian");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 4; ++r) {
      const double m = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  std::array<double, 4> x{};
  for (int r = 3; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 4; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

}  // namespace

bias_field_config default_bias_config(double sensor_separation_m,
                                      double target_field_separation_t) {
  if (sensor_separation_m <= 0.0) {
    throw invalid_argument_error("sensor separation must be positive");
  }
  bias_field_config bias;  // nominal radius, current, calibration constants
  const double x1 = -0.5 * sensor_separation_m;
  const double x2 = +0.5 * sensor_separation_m;
  const double k1 = bias.calibration_t_per_a[0];
  const double k2 = bias.calibration_t_per_a[1];
  const double current = bias.series_current_a;

  // The magnet slope is fixed analytically by the separation requirement.
  // With the coil contribution I*(k2 - k1) already pushing the channel fields
  // apart, the slope supplies the remainder; the sign convention puts the
  // lower field (higher resonance) on the +x channel.
  const double field_delta = -target_field_separation_t;
  bias.magnet_slope_t_per_m =
      (field_delta - current * (k2 - k1)) / (x2 - x1);

  // Remaining unknowns: coil center offset (coils sit at -xc and +xc), the
  // two turn counts, and the magnet curvature. Four residuals: the per-amp
  // coil field at each sensor must equal its calibration constant, and the
  // total spatial derivative must vanish at each sensor position.
  double xc = 1.0e-3;
  double n1 = 4.0;
  double n2 = 4.0;
  double b2 = 0.0;

  const double k_scale = std::abs(k1);
  const double g_scale = std::max(std::abs(bias.magnet_slope_t_per_m), 1e-6);

  auto residuals = [&](double vxc, double vn1, double vn2,
                       double vb2) -> std::array<double, 4> {
    bias_field_config trial = bias;
    trial.coil_positions_m = {-vxc, +vxc};
    trial.coil_turns = {vn1, vn2};
    trial.magnet_curvature_t_per_m2 = vb2;
    const double slope = trial.magnet_slope_t_per_m;
    const double grad1 =
        slope + 2.0 * vb2 * x1 + current * coil_gradient_per_amp_at(trial, x1);
    const double grad2 =
        slope + 2.0 * vb2 * x2 + current * coil_gradient_per_amp_at(trial, x2);
    return {(coil_field_per_amp_at(trial, x1) - k1) / k_scale,
            (coil_field_per_amp_at(trial, x2) - k2) / k_scale,
            grad1 / g_scale, grad2 / g_scale};
  };

  std::array<double, 4> v{xc, n1, n2, b2};
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    const auto r = residuals(v[0], v[1], v[2], v[3]);
    double worst = 0.0;
    for (double ri : r) worst = std::max(worst, std::abs(ri));
    if (worst < 1e-12) {
      converged = true;
      break;
    }
    // central-difference Jacobian; the system is small and smooth
    std::array<std::array<double, 4>, 4> jac{};
    for (int c = 0; c < 4; ++c) {
      auto vp = v;
      auto vm = v;
      const double h = std::max(1e-9, 1e-7 * std::abs(v[c]));
      vp[c] += h;
      vm[c] -= h;
      const auto rp = residuals(vp[0], vp[1], vp[2], vp[3]);
      const auto rm = residuals(vm[0], vm[1], vm[2], vm[3]);
      for (int rrow = 0; rrow < 4; ++rrow) {
        jac[rrow][c] = (rp[rrow] - rm[rrow]) / (2.0 * h);
      }
    }
    std::array<double, 4> neg_r{-r[0], -r[1], -r[2], -r[3]};
    const auto step = solve4(jac, neg_r);
    for (int c = 0; c < 4; ++c) v[c] += step[c];
  }
  if (!converged) {
    throw fit_error("bias geometry solve did not converge");
  }

  bias.coil_positions_m = {-v[0], +v[0]};
  bias.coil_turns = {v[1], v[2]};
  bias.magnet_curvature_t_per_m2 = v[3];
  return bias;
}

double channel_static_field(const run_config& cfg, std::size_t channel) {
  return channel_field_at_current(cfg, channel, cfg.bias.series_current_a);
}

double channel_field_at_current(const run_config& cfg, std::size_t channel,
                                double coil_current_a) {
  if (channel >= cfg.channels.size() || channel >= 2) {
    throw invalid_argument_error("channel index out of range");
  }
  const double x = cfg.channels[channel].position_mm * 1e-3;
  const double magnet = cfg.bias.magnet_center_t +
                        cfg.bias.magnet_slope_t_per_m * x +
                        cfg.bias.magnet_curvature_t_per_m2 * x * x;
  return magnet + cfg.bias.calibration_t_per_a[channel] * coil_current_a;
}

double calibrate_coil_from_zeeman(const std::vector<double>& currents_a,
                                  const std::vector<double>& splittings_hz,
                                  const physical_constants& pc) {
  if (currents_a.size() != splittings_hz.size()) {
    throw invalid_argument_error("current and splitting lists differ in length");
  }
  if (currents_a.size() < 2) {
    throw invalid_argument_error("coil calibration needs at least two points");
  }
  const auto [imin, imax] =
      std::minmax_element(currents_a.begin(), currents_a.end());
  if (*imax - *imin <= 0.0) {
    throw fit_error("coil calibration currents all coincide; slope undefined");
  }
  // least-squares line through (I, splitting); slope = 2 * gamma_e * k
  const auto n = static_cast<double>(currents_a.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < currents_a.size(); ++i) {
    sx += currents_a[i];
    sy += splittings_hz[i];
    sxx += currents_a[i] * currents_a[i];
    sxy += currents_a[i] * splittings_hz[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return slope / (2.0 * pc.gamma_e_hz_per_t);
}

namespace {

double pink_psd(const noise_config& nc, double f) {
  const double a = nc.env_pink_amplitude_t_per_rthz;
  const double ratio = f / nc.env_pink_corner_hz;
  const double r2 = ratio * ratio;
  return a * a / std::pow(f, nc.env_pink_beta) / (1.0 + r2 * r2);
}

void add_white(std::vector<double>& out, double asd_t_per_rthz, double rate,
               std::uint64_t seed, std::uint64_t stream, exec_mode mode) {
  if (asd_t_per_rthz <= 0.0) return;
  const double sigma = asd_t_per_rthz * std::sqrt(0.5 * rate);
  const random_stream rs(seed, stream);
  for_each_index(static_cast<std::int64_t>(out.size()), mode,
                 [&](std::int64_t i) {
                   out[static_cast<std::size_t>(i)] +=
                       sigma * rs.normal_at(static_cast<std::uint64_t>(i));
                 });
}

// Pink component via frequency-domain shaping: independent Gaussian bins with
// |X_k|^2 scaled so the inverse transform has one-sided PSD pink_psd(f_k).
// With the 1/n inverse convention the bin scale works out to
// sqrt(S_k * rate * n) / 2 per real/imag part.
void add_pink(std::vector<double>& out, const noise_config& nc, double rate,
              std::uint64_t seed, std::uint64_t stream, exec_mode mode) {
  if (nc.env_pink_amplitude_t_per_rthz <= 0.0) return;
  const std::size_t n = out.size();
  const std::size_t half = n / 2;
  std::vector<std::complex<double>> bins(half + 1, {0.0, 0.0});
  const random_stream rs(seed, stream);
  const double df = rate / static_cast<double>(n);
  for_each_index(static_cast<std::int64_t>(half) - 1, mode, [&](std::int64_t j) {
    const auto k = static_cast<std::size_t>(j) + 1;  // skip DC; Nyquist stays 0
    const double scale =
        0.5 * std::sqrt(pink_psd(nc, df * static_cast<double>(k)) * rate *
                        static_cast<double>(n));
    bins[k] = {scale * rs.normal_at(2 * k), scale * rs.normal_at(2 * k + 1)};
  });
  const std::vector<double> trace = fft::real_inverse(bins, n);
  for_each_index(static_cast<std::int64_t>(n), mode, [&](std::int64_t i) {
    out[static_cast<std::size_t>(i)] += trace[static_cast<std::size_t>(i)];
  });
}

// Line peak: sinusoid whose phase diffuses as a random walk. Step variance
// 2*pi*width*dt gives a Lorentzian line of FWHM `width` around f0; rms
// amplitude is preserved exactly. The prefix sum over steps runs serially in
// both modes so the trace is mode-independent; the draws and the cosine
// evaluation are the parallel part.
void add_peak(std::vector<double>& out, const line_peak_config& peak,
              double rate, std::uint64_t seed, std::uint64_t stream,
              std::vector<double>& phase_scratch, exec_mode mode) {
  if (peak.amplitude_t_rms <= 0.0) return;
  if (peak.frequency_hz >= 0.5 * rate) {
    throw invalid_argument_error("line peak frequency above Nyquist");
  }
  const std::size_t n = out.size();
  const random_stream rs(seed, stream);
  const double phase0 = two_pi * rs.uniform_at(0);
  const double amp = peak.amplitude_t_rms * std::sqrt(2.0);
  const double omega = two_pi * peak.frequency_hz / rate;

  if (peak.width_hz > 0.0) {
    const double step_sigma = std::sqrt(two_pi * peak.width_hz / rate);
    phase_scratch.resize(n);
    for_each_index(static_cast<std::int64_t>(n), mode, [&](std::int64_t i) {
      phase_scratch[static_cast<std::size_t>(i)] =
          step_sigma * rs.normal_at(static_cast<std::uint64_t>(i) + 1);
    });
    double acc = phase0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += phase_scratch[i];
      phase_scratch[i] = acc;
    }
    for_each_index(static_cast<std::int64_t>(n), mode, [&](std::int64_t i) {
      const auto u = static_cast<std::size_t>(i);
      out[u] += amp * std::cos(omega * static_cast<double>(i) + phase_scratch[u]);
    });
  } else {
    for_each_index(static_cast<std::int64_t>(n), mode, [&](std::int64_t i) {
      out[static_cast<std::size_t>(i)] +=
          amp * std::cos(omega * static_cast<double>(i) + phase0);
    });
  }
}

void fill_component(std::vector<double>& out, const noise_config& nc,
                    double rate, std::uint64_t seed, std::uint64_t white_stream,
                    std::uint64_t pink_stream, std::uint64_t peak_stream_base,
                    std::vector<double>& scratch, exec_mode mode) {
  std::fill(out.begin(), out.end(), 0.0);
  add_white(out, nc.env_white_floor_t_per_rthz, rate, seed, white_stream, mode);
  add_pink(out, nc, rate, seed, pink_stream, mode);
  for (std::size_t p = 0; p < nc.line_peaks.size(); ++p) {
    add_peak(out, nc.line_peaks[p], rate, seed, peak_stream_base + p, scratch,
             mode);
  }
}

}  // namespace

std::vector<std::vector<double>> generate_environmental_noise(
    const noise_config& noise, std::size_t n_channels, std::size_t n_samples,
    double sample_rate_hz, std::uint64_t seed, exec_mode mode) {
  if (n_samples == 0) {
    throw invalid_argument_error("noise trace length must be positive");
  }
  if (sample_rate_hz <= 0.0) {
    throw invalid_argument_error("sample rate must be positive");
  }
  const double cmf = noise.common_mode_fraction;
  if (cmf < 0.0 || cmf > 1.0) {
    throw invalid_argument_error("common_mode_fraction outside [0, 1]");
  }
  // linear blend: one shared realization scaled by cmf plus a per-channel
  // realization scaled by (1 - cmf); the endpoints are pure common / pure
  // independent and intermediate settings trade amplitude between them
  const double w_common = cmf;
  const double w_indep = 1.0 - cmf;

  std::vector<std::vector<double>> traces(n_channels);
  std::vector<double> scratch;

  std::vector<double> common;
  if (w_common > 0.0) {
    common.assign(n_samples, 0.0);
    fill_component(common, noise, sample_rate_hz, seed, stream_id::env_common,
                   stream_id::env_common_pink, stream_id::line_peak_base,
                   scratch, mode);
  }

  for (std::size_t ch = 0; ch < n_channels; ++ch) {
    auto& trace = traces[ch];
    trace.assign(n_samples, 0.0);
    if (w_indep > 0.0) {
      fill_component(trace, noise, sample_rate_hz, seed,
                     stream_id::env_independent_base + 2 * ch,
                     stream_id::env_independent_base + 2 * ch + 1,
                     stream_id::line_peak_indep_base + 16 * ch, scratch, mode);
    }
    for_each_index(static_cast<std::int64_t>(n_samples), mode,
                   [&](std::int64_t i) {
                     const auto u = static_cast<std::size_t>(i);
                     double v = w_indep > 0.0 ? w_indep * trace[u] : 0.0;
                     if (w_common > 0.0) v += w_common * common[u];
                     trace[u] = v;
                   });
  }
  return traces;
}

}  // namespace dqm
