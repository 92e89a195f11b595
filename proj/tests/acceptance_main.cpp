// End-to-end acceptance checks for the multiplexed magnetometer bench.
//
// Each criterion runs independently, prints exactly one PASS/FAIL line with
// the measured numbers, and a thrown exception fails only its own criterion.
// The process exits nonzero when any criterion fails.

#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqm/config.hpp"
#include "dqm/constants.hpp"
#include "dqm/dsp.hpp"
#include "dqm/fft.hpp"
#include "dqm/fitting.hpp"
#include "dqm/random.hpp"
#include "dqm/scenario.hpp"
#include "dqm/servo.hpp"
#include "dqm/signal_chain.hpp"
#include "dqm/types.hpp"

using namespace dqm;
namespace fs = std::filesystem;

namespace {

struct outcome {
  bool pass = false;
  std::string detail;
};

fs::path work_root() {
  static const fs::path root =
      fs::temp_directory_path() / ("dqm_acceptance_" + std::to_string(::getpid()));
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = work_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json summary_of(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "summary.json")).at("summary");
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return std::string(buf);
}

// complex single-bin projection of a decimated trace, absolute time base
std::complex<double> tone_amplitude(const std::vector<double>& s, std::size_t first,
                                    std::size_t count, double rate, double f_hz) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(first + i) / rate;
    acc += s[first + i] * std::exp(std::complex<double>(0.0, -two_pi * f_hz * t));
  }
  return acc * (2.0 / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// shared model evaluator for the fit round-trip criterion, written against the
// documented basis rather than the fitter's internals

double comb_model(double f, const std::vector<double>& centers,
                  const std::vector<std::vector<double>>& amps, double fwhm,
                  double hyperfine) {
  const double g = fwhm / 2.0;
  double y = 0.0;
  for (std::size_t s = 0; s < centers.size(); ++s) {
    const std::size_t n_k = amps[s].size();
    for (std::size_t k = 0; k < n_k; ++k) {
      const double off =
          (static_cast<double>(k) - 0.5 * static_cast<double>(n_k - 1)) * hyperfine;
      const double u = f - centers[s] - off;
      const double den = u * u + g * g;
      y += amps[s][k] * (-2.0 * g * g * u) / (den * den);
    }
  }
  return y;
}

// trim the servo transient and produce per-channel plus gradiometer
// sensitivities the same way the noise scenario reports them
struct measured_run {
  std::array<time_series, 2> trimmed;
  std::array<sensitivity_report, 2> per_channel;
  sensitivity_report grad;
  double decimated_rate_hz = 0.0;
  std::size_t skip = 0;
};

measured_run measure_locked_run(const run_config& cfg,
                                const std::vector<std::vector<double>>& applied) {
  const auto res = run_locked(cfg, applied);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& rep = res.channels[c];
    if (rep.time_to_lock_s < 0.0 || rep.lock_lost || rep.faulted)
      throw std::runtime_error("channel " + std::to_string(c + 1) +
                               " did not hold lock");
  }
  measured_run out;
  out.decimated_rate_hz = res.decimated_rate_hz;
  out.skip = static_cast<std::size_t>(
      std::llround(cfg.analysis.transient_discard_s * res.decimated_rate_hz));
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& s = res.delta_b[c].samples;
    if (out.skip >= s.size()) throw std::runtime_error("run shorter than the transient");
    out.trimmed[c] = time_series(
        res.decimated_rate_hz, std::vector<double>(s.begin() + out.skip, s.end()),
        unit::tesla);
  }
  const time_series grad = gradiometer(out.trimmed[0], out.trimmed[1]);
  const auto chain = analysis_filter_chain(cfg.analysis);
  const double neb = noise_equivalent_bandwidth(chain, res.decimated_rate_hz);
  const auto in_band = [&](const time_series& tr) {
    time_series f = apply_filter(tr, chain);
    f.samples.erase(f.samples.begin(), f.samples.begin() + static_cast<std::ptrdiff_t>(out.skip));
    return sensitivity(f, neb);
  };
  for (std::size_t c = 0; c < 2; ++c) out.per_channel[c] = in_band(out.trimmed[c]);
  out.grad = in_band(grad);
  return out;
}

// ---------------------------------------------------------------------------
// criteria

outcome check_resonance_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fresh_dir("sweep");
  run_config cfg = default_run_config();
  scenario_options opt;
  opt.output_dir = dir.string();
  scenario_sweep(cfg, opt);
  const double elapsed = seconds_since(t0);

  const auto s = summary_of(dir);
  if (s.at("sweep_fit_ok").get<double>() != 1.0)
    return {false, "sweep fit did not converge"};
  const double sep = s.at("separation_hz").get<double>();
  const double target = 42e-6 * physical_constants{}.gamma_e_hz_per_t;
  const bool ok = std::abs(sep - target) <= 10e3 && elapsed < 10.0;
  return {ok, fmt("separation %.6g Hz vs %.6g Hz (tol 10 kHz), %.1f s (limit 10 s)",
                  sep, target, elapsed)};
}

outcome check_fit_round_trip() {
  const random_stream rs(20260814, stream_id::test_base + 9);
  std::uint64_t k = 0;
  const auto draw = [&] { return rs.uniform_at(k++); };

  int failures = 0;
  double worst_center = 0.0, worst_fwhm = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double sep = 0.9e6 + 0.6e6 * draw();
    const double mid = 2.8420e9 + (draw() - 0.5) * 2e6;
    const std::vector<double> centers{mid - sep / 2, mid + sep / 2};
    const double fwhm = 120e3 + 280e3 * draw();
    std::vector<std::vector<double>> amps(2, std::vector<double>(5));
    for (auto& set : amps)
      for (auto& a : set) a = 0.3 + 1.4 * draw();

    const std::size_t n = 801;
    std::vector<double> f(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = mid - 6e6 + 12e6 * static_cast<double>(i) / static_cast<double>(n - 1);
      y[i] = comb_model(f[i], centers, amps, fwhm, 2.16e6);
    }
    // quarter-linewidth initial offsets: the deployed fits start from bias
    // predictions good to a few kHz, and the two-comb cost surface grows
    // competing local minima once guesses stray past about half a linewidth
    const std::vector<double> init{centers[0] + (draw() - 0.5) * 100e3,
                                   centers[1] + (draw() - 0.5) * 100e3};
    const double init_fwhm = fwhm * (0.7 + 0.6 * draw());
    try {
      const auto fit = fit_derivative_lorentzian_sum(
          spectrum(f, y, spectrum_kind::demodulated), 2, 2.16e6, init, init_fwhm);
      for (std::size_t s = 0; s < 2; ++s) {
        const double dc = std::abs(fit.sets[s].center_hz - centers[s]);
        const double dw = std::abs(fit.sets[s].fwhm_hz - fwhm) / fwhm;
        worst_center = std::max(worst_center, dc);
        worst_fwhm = std::max(worst_fwhm, dw);
        if (dc >= 1e3 || dw >= 0.01) ++failures;
      }
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return {failures == 0,
          fmt("50 draws, worst center error %.3g Hz (tol 1 kHz), worst width error "
              "%.3g%% (tol 1%%), %d failures",
              worst_center, worst_fwhm * 100.0, failures)};
}

outcome check_calibration_slopes() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fresh_dir("calibrate");
  run_config cfg = default_run_config();
  scenario_options opt;
  opt.output_dir = dir.string();
  scenario_calibrate(cfg, opt);
  const double elapsed = seconds_since(t0);

  const auto s = summary_of(dir);
  const double s1 = s.at("slope_ch1").get<double>();
  const double s2 = s.at("slope_ch2").get<double>();
  const bool ok = std::abs(s1 - 1.0) <= 0.02 && std::abs(s2 - 1.0) <= 0.02 &&
                  elapsed < 60.0;
  return {ok, fmt("slopes %.4f / %.4f (tol 1.00 +/- 0.02), %.1f s (limit 60 s)", s1,
                  s2, elapsed)};
}

outcome check_closed_loop_bandwidth() {
  std::array<std::array<double, 2>, 2> f3{};
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = fresh_dir("bandwidth_" + std::to_string(pass));
    run_config cfg = default_run_config();
    cfg.seed = 1 + static_cast<std::uint64_t>(pass) * 1000;
    scenario_options opt;
    opt.output_dir = dir.string();
    scenario_bandwidth(cfg, opt);
    const auto s = summary_of(dir);
    f3[pass][0] = s.at("f3db_ch1_hz").get<double>();
    f3[pass][1] = s.at("f3db_ch2_hz").get<double>();
  }
  bool ok = true;
  for (int c = 0; c < 2; ++c) {
    if (f3[0][c] < 200.0 || f3[0][c] > 400.0) ok = false;
    if (std::abs(f3[0][c] - f3[1][c]) / f3[0][c] > 0.05) ok = false;
  }
  return {ok, fmt("f3db %.0f / %.0f Hz in [200, 400], reseeded %.0f / %.0f Hz "
                  "(tol 5%%)",
                  f3[0][0], f3[0][1], f3[1][0], f3[1][1])};
}

outcome check_sensitivity_pipeline() {
  // ideal rectangular band first: white noise of known density in, the
  // quoted figure must come back as density / sqrt(2)
  const double rate = 5e3;
  const std::size_t n = 1 << 17;
  const double density = 15e-12;
  const random_stream rs(99, stream_id::test_base + 10);
  std::vector<double> samples(n);
  const double sigma = density * std::sqrt(rate / 2.0);
  for (std::size_t i = 0; i < n; ++i) samples[i] = sigma * rs.normal_at(i);
  auto bins = fft::real_forward(samples);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(n);
    if (f < 25.0 || f > 300.0) bins[k] = 0.0;
  }
  const time_series banded(rate, fft::real_inverse(bins, n), unit::tesla);
  const auto ideal = sensitivity(banded, brickwall_noise_equivalent_bandwidth(25.0, 300.0));
  const double expected = density / std::sqrt(2.0);
  const double ideal_err = std::abs(ideal.sensitivity_t_per_rthz - expected) / expected;

  // then the full bench preset for 100 simulated seconds
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fresh_dir("noise");
  run_config cfg = default_run_config();
  cfg.duration_s = 100.0;
  scenario_options opt;
  opt.output_dir = dir.string();
  scenario_noise(cfg, opt);
  const double elapsed = seconds_since(t0);
  const auto s = summary_of(dir);
  const double s1 = s.at("sensitivity_ch1_t_per_rthz").get<double>();
  const double s2 = s.at("sensitivity_ch2_t_per_rthz").get<double>();

  const bool ok = ideal_err <= 0.05 && s1 >= 18e-12 && s1 <= 26e-12 && s2 >= 18e-12 &&
                  s2 <= 26e-12 && elapsed < 120.0;
  return {ok, fmt("ideal band %.3g vs %.3g T/rtHz (err %.1f%%, tol 5%%); bench "
                  "%.1f / %.1f pT/rtHz in [18, 26], %.0f s (limit 120 s)",
                  ideal.sensitivity_t_per_rthz, expected, ideal_err * 100.0,
                  s1 * 1e12, s2 * 1e12, elapsed)};
}

outcome check_gradiometer() {
  // fully common environment plus a deliberately injected common tone
  run_config cfg = default_run_config();
  cfg.duration_s = 22.0;
  cfg.noise.common_mode_fraction = 1.0;
  const double tone_hz = 80.0, tone_t = 1e-6;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
  std::vector<double> tone(n);
  for (std::size_t i = 0; i < n; ++i)
    tone[i] = tone_t * std::sin(two_pi * tone_hz * static_cast<double>(i) / cfg.sample_rate_hz);
  const auto common = measure_locked_run(cfg, {tone, tone});

  const double win_s = std::floor((cfg.duration_s - cfg.analysis.transient_discard_s) *
                                  tone_hz) /
                       tone_hz;
  const auto project = [&](const time_series& tr) {
    const auto count = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(win_s * common.decimated_rate_hz)),
        tr.samples.size());
    return std::abs(tone_amplitude(tr.samples, 0, count, common.decimated_rate_hz, tone_hz));
  };
  const double c1 = project(common.trimmed[0]);
  const double c2 = project(common.trimmed[1]);
  const double g = project(gradiometer(common.trimmed[0], common.trimmed[1]));
  const double suppression_db = 20.0 * std::log10(g / std::min(c1, c2));

  const bool common_ok =
      common.grad.sensitivity_t_per_rthz < common.per_channel[0].sensitivity_t_per_rthz &&
      common.grad.sensitivity_t_per_rthz < common.per_channel[1].sensitivity_t_per_rthz &&
      suppression_db <= -40.0;

  // independent environments: the difference must grow by sqrt(2)
  run_config indep = cfg;
  indep.noise.common_mode_fraction = 0.0;
  const auto split = measure_locked_run(indep, {});
  bool quad_ok = true;
  double worst_ratio = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double r = split.grad.sensitivity_t_per_rthz /
                     split.per_channel[c].sensitivity_t_per_rthz;
    worst_ratio = std::max(worst_ratio, std::abs(r / std::sqrt(2.0) - 1.0));
    if (std::abs(r / std::sqrt(2.0) - 1.0) > 0.10) quad_ok = false;
  }

  return {common_ok && quad_ok,
          fmt("common: grad %.1f vs channels %.1f / %.1f pT/rtHz, tone rejection "
              "%.0f dB (need -40); independent: grad/single off sqrt(2) by %.1f%% "
              "(tol 10%%)",
              common.grad.sensitivity_t_per_rthz * 1e12,
              common.per_channel[0].sensitivity_t_per_rthz * 1e12,
              common.per_channel[1].sensitivity_t_per_rthz * 1e12, suppression_db,
              worst_ratio * 100.0)};
}

outcome check_channel_isolation() {
  run_config cfg = default_run_config();
  const auto m4 = crosstalk_matrix(cfg);
  run_config first_order = cfg;
  first_order.lockin.lpf_order = 1;
  const auto m1 = crosstalk_matrix(first_order);
  const bool ok = m4[0][1] < 0.03 && m4[1][0] < 0.03 && m1[0][1] > m4[0][1] &&
                  m1[1][0] > m4[1][0];
  return {ok, fmt("off-diagonals %.4f / %.4f (tol 0.03); first-order filter gives "
                  "%.3f / %.3f (must be worse)",
                  m4[0][1], m4[1][0], m1[0][1], m1[1][0])};
}

outcome check_shot_noise_consistency() {
  const fs::path dir = fresh_dir("shot_only");
  run_config cfg = default_run_config();
  cfg.duration_s = 42.0;
  cfg.noise.env_white_floor_t_per_rthz = 0.0;
  cfg.noise.env_pink_amplitude_t_per_rthz = 0.0;
  cfg.noise.line_peaks.clear();
  cfg.noise.laser_rin_rel_per_rthz = 0.0;
  cfg.noise.shot_noise_enabled = true;
  // the flat-floor prediction only holds where the closed loop neither rolls
  // off nor peaks, so read the floor in the flat region below the ~225 Hz
  // loop corner instead of the full 25-300 Hz band
  cfg.analysis.bandpass_high_hz = 100.0;
  scenario_options opt;
  opt.output_dir = dir.string();
  scenario_noise(cfg, opt);

  const auto s = summary_of(dir);
  bool ok = true;
  double worst = 0.0;
  std::array<double, 2> sens{}, limit{};
  for (int c = 0; c < 2; ++c) {
    const std::string suffix = "_ch" + std::to_string(c + 1);
    sens[c] = s.at("sensitivity" + suffix + "_t_per_rthz").get<double>();
    limit[c] = s.at("shot_noise_limit" + suffix + "_t_per_rthz").get<double>();
    const double err = std::abs(sens[c] - limit[c]) / limit[c];
    worst = std::max(worst, err);
    if (err > 0.15) ok = false;
  }
  return {ok, fmt("measured %.2f / %.2f vs predicted %.2f / %.2f pT/rtHz, worst "
                  "mismatch %.1f%% (tol 15%%)",
                  sens[0] * 1e12, sens[1] * 1e12, limit[0] * 1e12, limit[1] * 1e12,
                  worst * 100.0)};
}

outcome check_deterministic_reruns() {
  const fs::path a = fresh_dir("rerun_a");
  const fs::path b = fresh_dir("rerun_b");
  run_config cfg = default_run_config();
  scenario_options opt;
  opt.output_dir = a.string();
  scenario_sweep(cfg, opt);
  opt.output_dir = b.string();
  scenario_sweep(cfg, opt);
  const bool csv_same = slurp(a / "sweep.csv") == slurp(b / "sweep.csv");
  const bool summary_same = slurp(a / "summary.json") == slurp(b / "summary.json");
  return {csv_same && summary_same,
          fmt("sweep rerun: csv %s, summary %s", csv_same ? "identical" : "differs",
              summary_same ? "identical" : "differs")};
}

outcome check_power_conservation() {
  const double rate = 5e3;
  const std::size_t n = 50000;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const random_stream rs(seed, stream_id::test_base + 11);
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = rs.normal_at(i);
    const time_series trace(rate, samples, unit::tesla);
    const auto psd = welch_psd(trace, default_welch_segment(trace, 10.0));
    const double df = psd.frequencies_hz[1] - psd.frequencies_hz[0];
    double integral = 0.0;
    for (const double v : psd.values) integral += v * df;
    worst = std::max(worst, std::abs(integral - trace.variance()) / trace.variance());
  }
  return {worst <= 0.03, fmt("20 traces, worst power mismatch %.2f%% (tol 3%%)",
                             worst * 100.0)};
}

}  // namespace

int main() {
  struct criterion {
    const char* name;
    outcome (*run)();
  };
  const std::vector<criterion> criteria{
      {"resonance separation from swept fit", check_resonance_separation},
      {"lineshape fit round trip", check_fit_round_trip},
      {"field calibration slopes", check_calibration_slopes},
      {"closed-loop bandwidth", check_closed_loop_bandwidth},
      {"sensitivity pipeline", check_sensitivity_pipeline},
      {"gradiometer common-mode rejection", check_gradiometer},
      {"channel isolation", check_channel_isolation},
      {"shot-noise floor consistency", check_shot_noise_consistency},
      {"deterministic reruns", check_deterministic_reruns},
      {"spectral power conservation", check_power_conservation},
  };

  fs::remove_all(work_root());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    outcome r;
    try {
      r = criteria[i].run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failures;
    std::printf("[%s] %2zu  %-38s %s\n", r.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, r.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_root());
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
