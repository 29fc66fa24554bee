#pragma once

// Internal unit convention: energies in eV, times in s, lengths in um,
// number densities in cm^-3. Everything else is converted at the boundary
// through the helpers below.

#include <numbers>

namespace narrowline::units {

inline constexpr double hbar_ev_s = 6.582119569e-16;        // CODATA 2018
inline constexpr double joule_per_ev = 1.602176634e-19;     // exact
inline constexpr double nuclear_magneton_j_per_t = 5.0507837e-27;
inline constexpr double mu0_over_4pi = 1.0e-7;              // T m / A
inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double kev_to_ev(double kev) { return kev * 1.0e3; }
constexpr double ev_to_kev(double ev) { return ev * 1.0e-3; }
constexpr double ms_to_s(double ms) { return ms * 1.0e-3; }
constexpr double s_to_ms(double s) { return s * 1.0e3; }
constexpr double um_to_cm(double um) { return um * 1.0e-4; }
constexpr double angstrom_to_m(double a) { return a * 1.0e-10; }
constexpr double mhz_to_hz(double mhz) { return mhz * 1.0e6; }
constexpr double hz_to_mhz(double hz) { return hz * 1.0e-6; }
constexpr double mj_to_j(double mj) { return mj * 1.0e-3; }
constexpr double joule_to_ev(double j) { return j / joule_per_ev; }
constexpr double ev_to_joule(double ev) { return ev * joule_per_ev; }

/// Frequency (Hz) equivalent of an energy E/h.
constexpr double ev_to_hz(double ev) { return ev / (two_pi * hbar_ev_s); }
constexpr double hz_to_ev(double hz) { return hz * two_pi * hbar_ev_s; }

/// Rates quoted "per 10,000 s" throughout the experiment's bookkeeping.
inline constexpr double rate_unit_s = 1.0e4;

} // namespace narrowline::units
