#include "dqm/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "dqm/errors.hpp"

namespace dqm::fft {
namespace {
// FFTW plan creation/destruction is not thread safe; execution is.
std::mutex plan_mutex;
}  // namespace

std::vector<std::complex<double>> real_forward(const std::vector<double>& in) {
  if (in.empty()) throw invalid_argument_error("fft: empty input");
  const std::size_t n = in.size();
  std::vector<double> work(in);
  std::vector<std::complex<double>> out(n / 2 + 1);

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), work.data(),
                                reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> real_inverse(std::vector<std::complex<double>> bins, std::size_t n) {
  if (n == 0 || bins.size() != n / 2 + 1)
    throw invalid_argument_error("fft: bin count must be n/2 + 1");
  std::vector<double> out(n);

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                reinterpret_cast<fftw_complex*>(bins.data()),
                                out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);  // note: c2r destroys its input, which is fine (we own a copy)
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace dqm::fft
