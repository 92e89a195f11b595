#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dqm {

// Execution policy for the hot per-sample kernels. Every kernel that accepts a
// mode has a plain serial loop as its reference path; the parallel path must
// produce bitwise-identical output (kernels are pure functions of the sample
// index, randomness included, and reductions are ordered deterministically).
enum class exec_mode { serial, parallel };

inline exec_mode default_exec_mode() noexcept { return exec_mode::parallel; }

// Apply f(i) for i in [0, n). The loop body must not carry state between
// iterations when mode == parallel.
template <typename F>
void for_each_index(std::int64_t n, exec_mode mode, F&& f) {
#ifdef _OPENMP
  if (mode == exec_mode::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#else
  (void)mode;
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace dqm
