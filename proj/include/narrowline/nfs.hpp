#pragma once

// Time-dependent coherent nuclear forward scattering (NFS) after pulsed
// excitation.
//
// Three routes to the delayed intensity R(t) are provided and cross-checked
// in the tests:
//
//   thin_target_rate  first-order kinematic formula, valid for t << tau0/xi
//   exact_rate        closed-form single-line dynamical response
//                     (xi/T) J1^2(2 sqrt(xi T)) with T = t/tau0
//   propagate_pulse   numerical transform of the frequency-domain
//                     transmission; handles arbitrary line sets
//
// Energies inside a LineSet are in units of the natural width Gamma0 and
// times are converted to units of tau0 = hbar/Gamma0 internally. Rates are
// photons per second for an incident density of n_gamma0 photons per Gamma0
// per pulse. With a periodic excitation and n_gamma0 in ph/Gamma0/s, window
// integrals become photons per second of operation.

#include "narrowline/core_data.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace narrowline {

struct ResonanceLine
{
    double detuning = 0.0; // Gamma0 units
    double weight = 1.0;
};

struct LineSet
{
    std::vector<ResonanceLine> lines;
    double gamma_total = 1.0; // Gamma0 + dGamma, in Gamma0 units
    double xi = 0.0;          // optical thickness parameter
    double le_ratio = 0.0;    // L / L_e

    /// One unsplit line at zero detuning with inhomogeneous excess dgamma.
    static LineSet single(double xi, double dgamma, double le_ratio);

    bool is_single_unshifted() const;
    void validate() const;
};

struct TimeSpectrum
{
    std::vector<double> t;    // s, strictly increasing
    std::vector<double> rate; // photons / s
    double xi = 0.0;
    double gamma_total = 1.0;
    std::string method;
};

/// Thin-target rate, first-order in the response. Single unshifted line only.
double thin_target_rate(double t, const LineSet& ls, const IsomerSpec& isomer, double n_gamma0);

/// Closed-form single-line dynamical response, exact at all delays.
double exact_rate(double t, const LineSet& ls, const IsomerSpec& isomer, double n_gamma0);

/// Complex transmission t(omega) of the target for detuning omega (Gamma0).
std::complex<double> transmission_amplitude(double omega, const LineSet& ls);

struct PulseGrid
{
    double t_max = 0.2;              // s, output extent
    std::size_t samples = 1u << 18;  // output intervals over [0, t_max], power of two
};

/// Delayed response via a discrete Fourier transform of t(omega) - t(inf).
///
/// The returned spectrum has samples+1 points on [0, t_max]. Internally the
/// transform period is 4 t_max and the frequency axis is shifted into the
/// upper half plane so that periodic wrap-around is suppressed by e^-30; the
/// leading first-order term is subtracted and added back analytically so the
/// t = 0 discontinuity does not ring.
TimeSpectrum propagate_pulse(const LineSet& ls, const PulseGrid& grid,
                             const IsomerSpec& isomer, double n_gamma0);

/// exact_rate sampled on n+1 uniform points of [t0, t1].
TimeSpectrum sample_exact(const LineSet& ls, const IsomerSpec& isomer, double n_gamma0,
                          double t0, double t1, std::size_t n);

/// Trapezoidal integral of the (linearly interpolated) rate over [t1, t2].
double integrate_window(const TimeSpectrum& ts, double t1, double t2);

/// Integrated delayed signal over [t1, t2], using the closed form for a
/// single unshifted line and the transform otherwise.
double window_signal(const LineSet& ls, const IsomerSpec& isomer, double n_gamma0,
                     double t1, double t2);

/// window_signal evaluated for each dgamma (replacing ls.gamma_total),
/// optionally across `jobs` threads. Output order follows the input.
std::vector<double> window_signal_sweep(const LineSet& ls, const IsomerSpec& isomer,
                                        double n_gamma0, double t1, double t2,
                                        std::span<const double> dgammas, unsigned jobs = 1);

struct DetectionLimit
{
    double bound = 0.0;              // dGamma in Gamma0 units
    double snr_at_bound = 0.0;
    double background_in_window = 0.0; // counts / 10,000 s
    std::size_t evaluations = 0;
};

/// Smallest inhomogeneous broadening at which the gated NFS signal drops
/// below `snr_threshold` times the background in the matching energy window.
///
/// The template's gamma_total is ignored. The crossing is bracketed by
/// bisection over the grid indices and then refined by bisection in dGamma.
DetectionLimit detection_limit_scan(const LineSet& tmpl, double flux_ph_per_gamma0_s,
                                    const DetectorModel& det, double snr_threshold,
                                    std::span<const double> dgamma_grid,
                                    const IsomerSpec& isomer, double energy_window_kev = 1.0);

struct OptimalThickness
{
    double thickness_um = 0.0;
    double xi = 0.0;
};

/// NFS-optimal thickness L = 2 L_e and the optical thickness there.
OptimalThickness optimal_thickness(const TargetSpec& target);

} // namespace narrowline
