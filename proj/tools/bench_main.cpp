// Timing comparison of the serial reference kernels against the OpenMP path,
// with a bitwise-equality check on every output. Run it from a build with
// OpenMP enabled; without it the two modes share a code path and the speedup
// column just reads 1.0.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "dqm/config.hpp"
#include "dqm/dsp.hpp"
#include "dqm/field.hpp"
#include "dqm/parallel.hpp"
#include "dqm/signal_chain.hpp"
#include "dqm/types.hpp"

namespace {

double seconds_of(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

int report(const char* name, double t_serial, double t_parallel, bool equal) {
  std::printf("%-28s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   bitwise %s\n",
              name, t_serial, t_parallel, t_serial / t_parallel,
              equal ? "equal" : "DIFFER");
  return equal ? 0 : 1;
}

}  // namespace

int main() {
  using namespace dqm;
  const run_config cfg = default_run_config();
  const double rate = cfg.sample_rate_hz;
  const auto n = static_cast<std::size_t>(rate * 20.0);
  int failures = 0;

  std::vector<std::vector<double>> env_serial, env_parallel;
  const double t_env_s = seconds_of([&] {
    env_serial = generate_environmental_noise(cfg.noise, 2, n, rate, cfg.seed,
                                              exec_mode::serial);
  });
  const double t_env_p = seconds_of([&] {
    env_parallel = generate_environmental_noise(cfg.noise, 2, n, rate, cfg.seed,
                                                exec_mode::parallel);
  });
  failures += report("environmental_noise", t_env_s, t_env_p,
                     bitwise_equal(env_serial[0], env_parallel[0]) &&
                         bitwise_equal(env_serial[1], env_parallel[1]));

  std::vector<std::vector<double>> field = env_serial;
  for (std::size_t c = 0; c < 2; ++c) {
    const double b0 = channel_static_field(cfg, c);
    for (auto& b : field[c]) b += b0;
  }
  std::vector<mw_drive> drives;
  for (std::size_t c = 0; c < 2; ++c) {
    const double f_res = resonance_center(channel_static_field(cfg, c),
                                          cfg.channels[c].mw_transition, cfg.constants);
    drives.push_back(drive_for(cfg.channels[c], f_res));
  }
  std::vector<double> cur_serial, cur_parallel;
  const double t_cur_s = seconds_of([&] {
    cur_serial = synthesize_photocurrent(cfg.channels, drives, field, 0, n, cfg.noise,
                                         cfg.lockin, cfg.constants, rate, cfg.seed,
                                         exec_mode::serial);
  });
  const double t_cur_p = seconds_of([&] {
    cur_parallel = synthesize_photocurrent(cfg.channels, drives, field, 0, n, cfg.noise,
                                           cfg.lockin, cfg.constants, rate, cfg.seed,
                                           exec_mode::parallel);
  });
  failures += report("synthesize_photocurrent", t_cur_s, t_cur_p,
                     bitwise_equal(cur_serial, cur_parallel));

  const time_series trace(rate, cur_serial, unit::ampere);
  const std::size_t segment = default_welch_segment(trace, 2.0);
  spectrum psd_serial, psd_parallel;
  const double t_psd_s =
      seconds_of([&] { psd_serial = welch_psd(trace, segment, exec_mode::serial); });
  const double t_psd_p =
      seconds_of([&] { psd_parallel = welch_psd(trace, segment, exec_mode::parallel); });
  failures += report("welch_psd", t_psd_s, t_psd_p,
                     bitwise_equal(psd_serial.values, psd_parallel.values));

  return failures == 0 ? 0 : 1;
}
