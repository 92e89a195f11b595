#include "dqm/random.hpp"

#include <cmath>

#include "dqm/constants.hpp"

namespace dqm {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer: full-avalanche 64-bit mix
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

random_stream::random_stream(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(mix64(mix64(seed + kGamma) ^ mix64(stream * kGamma + 0x61C8864680B583EBULL))) {}

std::uint64_t random_stream::raw_at(std::uint64_t index) const noexcept {
  return mix64(key_ + (index + 1) * kGamma);
}

double random_stream::uniform_at(std::uint64_t index) const noexcept {
  // top 53 bits to double in [0, 1)
  return static_cast<double>(raw_at(index) >> 11) * 0x1.0p-53;
}

double random_stream::normal_at(std::uint64_t index) const noexcept {
  // map u1 into (0, 1] so the log never sees zero
  const double u1 = 1.0 - uniform_at(2 * index);
  const double u2 = uniform_at(2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace dqm
