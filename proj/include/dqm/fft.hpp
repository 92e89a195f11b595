#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dqm::fft {

// Real-to-complex forward FFT (unnormalized, FFTW convention); returns
// n/2 + 1 bins.
std::vector<std::complex<double>> real_forward(const std::vector<double>& in);

// Complex-to-real inverse of real_forward, scaled by 1/n so the round trip is
// the identity. `n` is the time-domain length the bins came from.
std::vector<double> real_inverse(std::vector<std::complex<double>> bins, std::size_t n);

}  // namespace dqm::fft
