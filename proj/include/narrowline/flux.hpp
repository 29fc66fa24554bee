#pragma once

// Spectral flux bookkeeping along the beamline: pulse spectral density,
// its conversion to photons per natural linewidth, and transmission losses.

#include "narrowline/core_data.hpp"

#include <span>
#include <string>
#include <vector>

namespace narrowline {

/// Photons per natural width per second at a named point of the beamline.
struct SpectralFlux
{
    double value = 0.0;
    std::string at_point;
};

/// Net pulse energy per unit bandwidth, mJ/eV.
double spectral_density(double pulse_energy_mj, double background_energy_mj,
                        double bandwidth_ev);

/// mJ/eV -> photons within one natural width Gamma0.
double density_to_ph_per_gamma0(double mj_per_ev, const IsomerSpec& isomer);

/// Inverse of density_to_ph_per_gamma0.
double ph_per_gamma0_to_density(double ph_per_gamma0, const IsomerSpec& isomer);

/// Product of transmission factors; each must lie in (0, 1].
double chain_transmission(std::span<const double> factors);

/// rep_rate * (photons per Gamma0 per pulse train) * chain transmission.
/// The train is treated as one macropulse of np pulses.
SpectralFlux flux_at(const BeamlineSpec& beam, const IsomerSpec& isomer,
                     std::span<const double> chain, std::string at_point = {});

/// One row of the beamline flux table.
struct FluxRow
{
    std::string point;   // empty for intermediate elements
    std::string element; // "undulator exit" for the first row
    double transmission = 1.0;
    double cumulative = 1.0;
    double flux = 0.0;   // ph / Gamma0 / s
};

/// Flux after each element of the beamline, starting at the undulator exit.
std::vector<FluxRow> flux_chain(const BeamlineSpec& beam, const IsomerSpec& isomer);

} // namespace narrowline
