#pragma once

namespace dqm {

// Physical constants used by the resonance and noise arithmetic.
// Values are overridable through the config so recalibrated setups stay representable.
struct physical_constants {
  double gamma_e_hz_per_t = 28.024e9;       // NV electron gyromagnetic ratio
  double zero_field_splitting_hz = 2.870e9; // ground-state D
  double electron_charge_c = 1.602176634e-19;
};

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

// vacuum permeability, used only by the illustrative coil geometry
inline constexpr double mu0_t_m_per_a = 1.25663706212e-6;

}  // namespace dqm
