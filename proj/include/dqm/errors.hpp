#pragma once

#include <stdexcept>
#include <string>

namespace dqm {

// Configuration file problems: unknown keys, bad types, out-of-range values.
// `path` is the dotted location of the offending key, e.g. "channels[1].fwhm_hz".
class config_error : public std::runtime_error {
 public:
  config_error(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Violated operation precondition (bad argument combinations, empty inputs, ...).
class invalid_argument_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Nonlinear fit could not produce a usable answer (divergence, singular system).
class fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fit is structurally underdetermined, e.g. two resonance sets with coincident centers.
class fit_degeneracy_error : public fit_error {
 public:
  using fit_error::fit_error;
};

// A closed-loop measurement lost lock partway through; the message names the
// run (test frequency, scenario step) so the caller can report it.
class lock_loss_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dqm
