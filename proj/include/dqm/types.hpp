#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dqm/errors.hpp"

namespace dqm {

enum class unit { dimensionless, ampere, volt, tesla, hertz };

std::string unit_name(unit u);

// Uniformly sampled real-valued trace. Samples are owned; the rate is fixed at
// construction and must be positive.
struct time_series {
  double sample_rate_hz = 0.0;
  std::vector<double> samples;
  unit value_unit = unit::dimensionless;

  time_series() = default;
  time_series(double rate_hz, std::vector<double> data, unit u);

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }

  double mean() const;
  // population variance, two-pass mean-of-squared-deviations
  double variance() const;
  double rms() const;
};

enum class spectrum_kind { psd, asd, transfer, demodulated };

// Sampled one-sided spectrum or frequency-domain table; `frequencies_hz` is
// strictly increasing and the two arrays always have equal length.
struct spectrum {
  std::vector<double> frequencies_hz;
  std::vector<double> values;
  spectrum_kind kind = spectrum_kind::psd;

  spectrum() = default;
  spectrum(std::vector<double> f, std::vector<double> v, spectrum_kind k);

  std::size_t size() const noexcept { return frequencies_hz.size(); }
};

}  // namespace dqm
