#pragma once

// Unit conventions used throughout the library:
//   time               microseconds (us)
//   angular frequency  rad/us  (detunings, Rabi rates, noise amplitudes)
//   ordinary frequency MHz     (reporting only; 1 MHz = 1/us)

namespace spinopt {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// ordinary frequency in MHz -> angular frequency in rad/us
constexpr double angular_from_mhz(double mhz) { return kTwoPi * mhz; }

// angular frequency in rad/us -> ordinary frequency in MHz
constexpr double mhz_from_angular(double w) { return w / kTwoPi; }

}  // namespace spinopt
