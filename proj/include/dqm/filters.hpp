#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "dqm/types.hpp"

namespace dqm {

// One normalized biquad section (a0 == 1), direct form II transposed.
struct biquad_coeffs {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

// Cascade of biquad sections with owned filter state. Applied causally
// (forward only); use reset() to reuse across traces.
class biquad_cascade {
 public:
  biquad_cascade() = default;
  explicit biquad_cascade(std::vector<biquad_coeffs> sections);

  void reset();
  double step(double x) noexcept;
  void process(const double* in, double* out, std::size_t n) noexcept;

  // H(e^{j 2 pi f / rate}) of the whole cascade
  std::complex<double> response(double f_hz, double rate_hz) const;
  double gain_db(double f_hz, double rate_hz) const;

  const std::vector<biquad_coeffs>& sections() const noexcept { return sections_; }
  bool empty() const noexcept { return sections_.empty(); }

  // append all sections of another cascade (states reset)
  void append(const biquad_cascade& other);

 private:
  std::vector<biquad_coeffs> sections_;
  struct state {
    double s1 = 0.0, s2 = 0.0;
  };
  std::vector<state> states_;
};

// Butterworth designs via prewarped bilinear transform of the analog
// prototype, realized as RBJ-style sections with the Butterworth Q ladder.
biquad_cascade design_butterworth_lowpass(int order, double cutoff_hz, double rate_hz);
biquad_cascade design_butterworth_highpass(int order, double cutoff_hz, double rate_hz);
// notch with exact null at f0 (RBJ cookbook), bandwidth f0/q
biquad_cascade design_notch(double f0_hz, double q, double rate_hz);

// Descriptor form used by the analysis chain and the config file.
struct filter_spec {
  enum class kind { lowpass, highpass, bandpass, notch };
  kind type = kind::lowpass;
  double f_low_hz = 0.0;   // lowpass/highpass: cutoff; bandpass: lower edge; notch: f0
  double f_high_hz = 0.0;  // bandpass: upper edge
  int order = 4;           // per-edge pole count for bandpass
  double q = 30.0;         // notch only
};

biquad_cascade design_filter(const filter_spec& spec, double rate_hz);
biquad_cascade design_chain(const std::vector<filter_spec>& chain, double rate_hz);

// forward (causal) application; output has the same rate and length
time_series apply_filter(const time_series& trace, const std::vector<filter_spec>& chain);

}  // namespace dqm
