#include "dqm/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "dqm/constants.hpp"
#include "dqm/errors.hpp"
#include "dqm/fft.hpp"

namespace dqm {

spectrum welch_psd(const time_series& trace, std::size_t segment_length, exec_mode mode) {
  const std::size_t n = trace.size();
  const double rate = trace.sample_rate_hz;
  if (rate <= 0) throw invalid_argument_error("welch_psd: bad sample rate");
  if (segment_length < 8) throw invalid_argument_error("welch_psd: segment too short");
  if (segment_length % 2 != 0)
    throw invalid_argument_error("welch_psd: segment length must be even");
  if (n < segment_length)
    throw invalid_argument_error("welch_psd: trace shorter than one segment");

  const std::size_t hop = segment_length / 2;
  const std::size_t n_seg = (n - segment_length) / hop + 1;
  const std::size_t n_bins = segment_length / 2 + 1;

  // periodic Hann window and its power normalization
  std::vector<double> window(segment_length);
  double window_power = 0.0;
  for (std::size_t i = 0; i < segment_length; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) /
                                      static_cast<double>(segment_length)));
    window_power += window[i] * window[i];
  }

  // each segment's periodogram lands in its own row; the ordered sum below
  // keeps serial and parallel output identical
  std::vector<std::vector<double>> rows(n_seg);
  for_each_index(static_cast<std::int64_t>(n_seg), mode, [&](std::int64_t s) {
    const std::size_t off = static_cast<std::size_t>(s) * hop;
    std::vector<double> seg(segment_length);
    double mean = 0.0;
    for (std::size_t i = 0; i < segment_length; ++i) mean += trace.samples[off + i];
    mean /= static_cast<double>(segment_length);
    for (std::size_t i = 0; i < segment_length; ++i)
      seg[i] = (trace.samples[off + i] - mean) * window[i];
    const auto bins = fft::real_forward(seg);
    auto& row = rows[static_cast<std::size_t>(s)];
    row.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) row[k] = std::norm(bins[k]);
  });

  std::vector<double> psd(n_bins, 0.0);
  for (std::size_t s = 0; s < n_seg; ++s)
    for (std::size_t k = 0; k < n_bins; ++k) psd[k] += rows[s][k];

  const double scale = 1.0 / (rate * window_power * static_cast<double>(n_seg));
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool interior = k != 0 && k != n_bins - 1;
    psd[k] *= scale * (interior ? 2.0 : 1.0);  // one-sided folding
  }

  std::vector<double> freqs(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k)
    freqs[k] = static_cast<double>(k) * rate / static_cast<double>(segment_length);
  return spectrum(std::move(freqs), std::move(psd), spectrum_kind::psd);
}

std::size_t default_welch_segment(const time_series& trace, double preferred_duration_s) {
  if (trace.size() < 32) throw invalid_argument_error("default_welch_segment: trace too short");
  auto wanted = static_cast<std::size_t>(preferred_duration_s * trace.sample_rate_hz);
  wanted = std::min(wanted, trace.size() / 4);
  wanted = std::max<std::size_t>(wanted, 8);
  return wanted - wanted % 2;
}

spectrum psd_to_asd(const spectrum& psd) {
  if (psd.kind != spectrum_kind::psd)
    throw invalid_argument_error("psd_to_asd: input is not a power density");
  std::vector<double> asd(psd.values.size());
  for (std::size_t i = 0; i < asd.size(); ++i) asd[i] = std::sqrt(psd.values[i]);
  return spectrum(psd.frequencies_hz, std::move(asd), spectrum_kind::asd);
}

double noise_equivalent_bandwidth(const std::vector<filter_spec>& chain, double rate_hz) {
  if (rate_hz <= 0) throw invalid_argument_error("noise_equivalent_bandwidth: bad rate");
  const biquad_cascade cascade = design_chain(chain, rate_hz);
  const double nyquist = 0.5 * rate_hz;

  const auto power = [&](double f) {
    const auto h = cascade.response(f, rate_hz);
    return std::norm(h);
  };

  // composite Simpson with interval doubling; notches are a couple of hertz
  // wide, so the grid refines well past them before the tolerance is met
  double previous = -1.0;
  double integral = 0.0;
  double peak = 0.0;
  for (std::size_t n = 1 << 12; n <= (std::size_t{1} << 22); n *= 2) {
    const double h = nyquist / static_cast<double>(n);
    double acc = power(0.0) + power(nyquist);
    double p = std::max(power(0.0), power(nyquist));
    for (std::size_t i = 1; i < n; ++i) {
      const double v = power(static_cast<double>(i) * h);
      acc += v * (i % 2 == 1 ? 4.0 : 2.0);
      p = std::max(p, v);
    }
    integral = acc * h / 3.0;
    peak = p;
    if (previous > 0 && std::abs(integral - previous) <= 1e-4 * integral) break;
    previous = integral;
  }
  if (peak <= 0)
    throw invalid_argument_error("noise_equivalent_bandwidth: chain has no passband");
  return integral / peak;
}

std::vector<filter_spec> analysis_filter_chain(const analysis_config& analysis) {
  std::vector<filter_spec> chain;
  for (const double f0 : analysis.notch_hz) {
    filter_spec s;
    s.type = filter_spec::kind::notch;
    s.f_low_hz = f0;
    s.q = analysis.notch_q;
    chain.push_back(s);
  }
  filter_spec bp;
  bp.type = filter_spec::kind::bandpass;
  bp.f_low_hz = analysis.bandpass_low_hz;
  bp.f_high_hz = analysis.bandpass_high_hz;
  bp.order = analysis.bandpass_order;
  chain.push_back(bp);
  return chain;
}

sensitivity_report sensitivity(const time_series& filtered_trace, double nep_bandwidth_hz) {
  if (filtered_trace.size() < 2)
    throw invalid_argument_error("sensitivity: trace too short");
  if (!(nep_bandwidth_hz > 0))
    throw invalid_argument_error("sensitivity: bandwidth must be positive");
  sensitivity_report rep;
  rep.rms_t = std::sqrt(filtered_trace.variance());
  rep.noise_equivalent_bandwidth_hz = nep_bandwidth_hz;
  rep.sensitivity_t_per_rthz = rep.rms_t / std::sqrt(2.0 * nep_bandwidth_hz);
  return rep;
}

double shot_noise_limit_t_per_rthz(double photocurrent_a, double slope_a_per_hz,
                                   const physical_constants& pc) {
  if (!(photocurrent_a > 0))
    throw invalid_argument_error("shot_noise_limit: photocurrent must be positive");
  if (slope_a_per_hz == 0.0)
    throw invalid_argument_error("shot_noise_limit: discriminator slope must be nonzero");
  return std::sqrt(2.0 * pc.electron_charge_c * photocurrent_a) /
         (pc.gamma_e_hz_per_t * std::abs(slope_a_per_hz));
}

time_series gradiometer(const time_series& a, const time_series& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw invalid_argument_error("gradiometer: traces must be equally long and non-empty");
  if (a.sample_rate_hz != b.sample_rate_hz)
    throw invalid_argument_error("gradiometer: traces must share a sample rate");
  if (a.value_unit != b.value_unit)
    throw invalid_argument_error("gradiometer: traces must share a unit");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.samples[i] - b.samples[i];
  return time_series(a.sample_rate_hz, std::move(diff), a.value_unit);
}

bandwidth_result measure_bandwidth(const std::function<double(double)>& response_ratio_at,
                                   const std::vector<double>& frequencies_hz) {
  if (frequencies_hz.size() < 2)
    throw invalid_argument_error("measure_bandwidth: need at least two frequencies");
  for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
    if (!(frequencies_hz[i] > 0))
      throw invalid_argument_error("measure_bandwidth: frequencies must be positive");
    if (i > 0 && frequencies_hz[i] <= frequencies_hz[i - 1])
      throw invalid_argument_error("measure_bandwidth: frequencies must be increasing");
  }

  std::vector<double> ratio(frequencies_hz.size());
  for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
    ratio[i] = response_ratio_at(frequencies_hz[i]);
    if (!(ratio[i] > 0))
      throw invalid_argument_error("measure_bandwidth: non-positive response ratio");
  }

  const double level = 1.0 / std::sqrt(2.0);
  std::size_t last_above = frequencies_hz.size();
  for (std::size_t i = 0; i < ratio.size(); ++i)
    if (ratio[i] >= level) last_above = i;
  if (last_above == frequencies_hz.size())
    throw invalid_argument_error(
        "measure_bandwidth: response below -3 dB across the whole grid");
  if (last_above + 1 == frequencies_hz.size())
    throw invalid_argument_error(
        "measure_bandwidth: response never fell below -3 dB inside the grid");

  const double lf0 = std::log(frequencies_hz[last_above]);
  const double lf1 = std::log(frequencies_hz[last_above + 1]);
  const double lr0 = std::log(ratio[last_above]);
  const double lr1 = std::log(ratio[last_above + 1]);
  const double t = (std::log(level) - lr0) / (lr1 - lr0);

  bandwidth_result out;
  out.transfer = spectrum(frequencies_hz, std::move(ratio), spectrum_kind::transfer);
  out.f3db_hz = std::exp(lf0 + t * (lf1 - lf0));
  return out;
}

}  // namespace dqm
