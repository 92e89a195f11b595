#include "dqm/filters.hpp"

#include <cmath>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"

namespace dqm {
namespace {

void check_frequency(double f_hz, double rate_hz, const char* what) {
  if (!(rate_hz > 0.0)) throw invalid_argument_error("filter design: rate must be positive");
  if (!(f_hz > 0.0 && f_hz < 0.5 * rate_hz))
    throw invalid_argument_error(std::string("filter design: ") + what +
                                 " must lie inside (0, Nyquist)");
}

void check_order(int order) {
  if (order < 1 || order > 16)
    throw invalid_argument_error("filter design: order must be in [1, 16]");
}

// RBJ cookbook second-order lowpass/highpass with quality q
biquad_coeffs rbj_lowpass(double f_hz, double q, double rate_hz) {
  const double w0 = two_pi * f_hz / rate_hz;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  biquad_coeffs c;
  c.b0 = (1.0 - cw) / 2.0 / a0;
  c.b1 = (1.0 - cw) / a0;
  c.b2 = c.b0;
  c.a1 = -2.0 * cw / a0;
  c.a2 = (1.0 - alpha) / a0;
  return c;
}

biquad_coeffs rbj_highpass(double f_hz, double q, double rate_hz) {
  const double w0 = two_pi * f_hz / rate_hz;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  biquad_coeffs c;
  c.b0 = (1.0 + cw) / 2.0 / a0;
  c.b1 = -(1.0 + cw) / a0;
  c.b2 = c.b0;
  c.a1 = -2.0 * cw / a0;
  c.a2 = (1.0 - alpha) / a0;
  return c;
}

// bilinear transform of the first-order prototype (1 real pole at the cutoff)
biquad_coeffs first_order(double f_hz, double rate_hz, bool highpass) {
  const double k = std::tan(pi * f_hz / rate_hz);
  const double norm = 1.0 / (k + 1.0);
  biquad_coeffs c;
  if (highpass) {
    c.b0 = norm;
    c.b1 = -norm;
  } else {
    c.b0 = k * norm;
    c.b1 = k * norm;
  }
  c.b2 = 0.0;
  c.a1 = (k - 1.0) * norm;
  c.a2 = 0.0;
  return c;
}

// Butterworth pole-pair qualities: q_k = 1 / (2 sin(pi (2k+1) / 2n))
std::vector<double> butterworth_q(int order) {
  std::vector<double> qs;
  for (int k = 0; k < order / 2; ++k)
    qs.push_back(1.0 / (2.0 * std::sin(pi * (2 * k + 1) / (2.0 * order))));
  return qs;
}

biquad_cascade design_butterworth(int order, double cutoff_hz, double rate_hz,
                                  bool highpass) {
  check_order(order);
  check_frequency(cutoff_hz, rate_hz, "cutoff");
  std::vector<biquad_coeffs> sections;
  for (double q : butterworth_q(order))
    sections.push_back(highpass ? rbj_highpass(cutoff_hz, q, rate_hz)
                                : rbj_lowpass(cutoff_hz, q, rate_hz));
  if (order % 2 == 1) sections.push_back(first_order(cutoff_hz, rate_hz, highpass));
  return biquad_cascade(std::move(sections));
}

}  // namespace

biquad_cascade::biquad_cascade(std::vector<biquad_coeffs> sections)
    : sections_(std::move(sections)), states_(sections_.size()) {}

void biquad_cascade::reset() {
  for (auto& s : states_) s = state{};
}

double biquad_cascade::step(double x) noexcept {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const auto& c = sections_[i];
    auto& st = states_[i];
    const double y = c.b0 * x + st.s1;
    st.s1 = c.b1 * x - c.a1 * y + st.s2;
    st.s2 = c.b2 * x - c.a2 * y;
    x = y;
  }
  return x;
}

void biquad_cascade::process(const double* in, double* out, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = step(in[i]);
}

std::complex<double> biquad_cascade::response(double f_hz, double rate_hz) const {
  const std::complex<double> z_inv = std::exp(std::complex<double>(0.0, -two_pi * f_hz / rate_hz));
  std::complex<double> h = 1.0;
  for (const auto& c : sections_) {
    h *= (c.b0 + c.b1 * z_inv + c.b2 * z_inv * z_inv) /
         (1.0 + c.a1 * z_inv + c.a2 * z_inv * z_inv);
  }
  return h;
}

double biquad_cascade::gain_db(double f_hz, double rate_hz) const {
  return 20.0 * std::log10(std::abs(response(f_hz, rate_hz)));
}

void biquad_cascade::append(const biquad_cascade& other) {
  sections_.insert(sections_.end(), other.sections_.begin(), other.sections_.end());
  states_.assign(sections_.size(), state{});
}

biquad_cascade design_butterworth_lowpass(int order, double cutoff_hz, double rate_hz) {
  return design_butterworth(order, cutoff_hz, rate_hz, /*highpass=*/false);
}

biquad_cascade design_butterworth_highpass(int order, double cutoff_hz, double rate_hz) {
  return design_butterworth(order, cutoff_hz, rate_hz, /*highpass=*/true);
}

biquad_cascade design_notch(double f0_hz, double q, double rate_hz) {
  check_frequency(f0_hz, rate_hz, "notch frequency");
  if (!(q > 0.0)) throw invalid_argument_error("filter design: notch q must be positive");
  const double w0 = two_pi * f0_hz / rate_hz;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  biquad_coeffs c;
  c.b0 = 1.0 / a0;
  c.b1 = -2.0 * cw / a0;
  c.b2 = 1.0 / a0;
  c.a1 = -2.0 * cw / a0;
  c.a2 = (1.0 - alpha) / a0;
  return biquad_cascade({c});
}

biquad_cascade design_filter(const filter_spec& spec, double rate_hz) {
  switch (spec.type) {
    case filter_spec::kind::lowpass:
      return design_butterworth_lowpass(spec.order, spec.f_low_hz, rate_hz);
    case filter_spec::kind::highpass:
      return design_butterworth_highpass(spec.order, spec.f_low_hz, rate_hz);
    case filter_spec::kind::bandpass: {
      if (!(spec.f_low_hz < spec.f_high_hz))
        throw invalid_argument_error("filter design: bandpass edges must satisfy low < high");
      // per-edge Butterworth pair: highpass at the lower edge, lowpass at the upper
      biquad_cascade c = design_butterworth_highpass(spec.order, spec.f_low_hz, rate_hz);
      c.append(design_butterworth_lowpass(spec.order, spec.f_high_hz, rate_hz));
      return c;
    }
    case filter_spec::kind::notch:
      return design_notch(spec.f_low_hz, spec.q, rate_hz);
  }
  throw invalid_argument_error("filter design: unknown filter kind");
}

biquad_cascade design_chain(const std::vector<filter_spec>& chain, double rate_hz) {
  biquad_cascade out;
  for (const auto& spec : chain) out.append(design_filter(spec, rate_hz));
  return out;
}

time_series apply_filter(const time_series& trace, const std::vector<filter_spec>& chain) {
  biquad_cascade cascade = design_chain(chain, trace.sample_rate_hz);
  time_series out = trace;
  cascade.process(trace.samples.data(), out.samples.data(), trace.samples.size());
  return out;
}

}  // namespace dqm
