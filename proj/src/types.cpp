#include "dqm/types.hpp"

#include <cmath>

namespace dqm {

std::string unit_name(unit u) {
  switch (u) {
    case unit::dimensionless: return "dimensionless";
    case unit::ampere: return "a";
    case unit::volt: return "v";
    case unit::tesla: return "t";
    case unit::hertz: return "hz";
  }
  return "unknown";
}

time_series::time_series(double rate_hz, std::vector<double> data, unit u)
    : sample_rate_hz(rate_hz), samples(std::move(data)), value_unit(u) {
  if (!(sample_rate_hz > 0.0))
    throw invalid_argument_error("time_series: sample rate must be positive");
  if (samples.empty())
    throw invalid_argument_error("time_series: at least one sample required");
}

double time_series::mean() const {
  double acc = 0.0;
  for (double v : samples) acc += v;
  return acc / static_cast<double>(samples.size());
}

double time_series::variance() const {
  const double mu = mean();
  double acc = 0.0;
  for (double v : samples) {
    const double d = v - mu;
    acc += d * d;
  }
  return acc / static_cast<double>(samples.size());
}

double time_series::rms() const {
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

spectrum::spectrum(std::vector<double> f, std::vector<double> v, spectrum_kind k)
    : frequencies_hz(std::move(f)), values(std::move(v)), kind(k) {
  if (frequencies_hz.size() != values.size())
    throw invalid_argument_error("spectrum: frequency/value length mismatch");
  for (std::size_t i = 1; i < frequencies_hz.size(); ++i)
    if (!(frequencies_hz[i] > frequencies_hz[i - 1]))
      throw invalid_argument_error("spectrum: frequencies must be strictly increasing");
}

}  // namespace dqm
