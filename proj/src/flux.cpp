#include "narrowline/flux.hpp"

#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

namespace narrowline {

double spectral_density(double pulse_energy_mj, double background_energy_mj, double bandwidth_ev)
{
    if (!(bandwidth_ev > 0))
        throw DomainError("spectral_density: bandwidth must be positive");
    if (!(pulse_energy_mj >= background_energy_mj))
        throw DomainError("spectral_density: pulse energy below SASE background");
    return (pulse_energy_mj - background_energy_mj) / bandwidth_ev;
}

double density_to_ph_per_gamma0(double mj_per_ev, const IsomerSpec& isomer)
{
    if (!(mj_per_ev >= 0))
        throw DomainError("density_to_ph_per_gamma0: negative spectral density");
    const double photon_energy_j = units::ev_to_joule(isomer.energy_ev);
    return units::mj_to_j(mj_per_ev) / photon_energy_j * isomer.width_ev;
}

double ph_per_gamma0_to_density(double ph_per_gamma0, const IsomerSpec& isomer)
{
    if (!(ph_per_gamma0 >= 0))
        throw DomainError("ph_per_gamma0_to_density: negative photon density");
    const double photon_energy_j = units::ev_to_joule(isomer.energy_ev);
    return ph_per_gamma0 / isomer.width_ev * photon_energy_j * 1.0e3;
}

double chain_transmission(std::span<const double> factors)
{
    double total = 1.0;
    for (double f : factors) {
        if (!(f > 0 && f <= 1))
            throw DomainError("chain_transmission: factor outside (0, 1]");
        total *= f;
    }
    return total;
}

SpectralFlux flux_at(const BeamlineSpec& beam, const IsomerSpec& isomer,
                     std::span<const double> chain, std::string at_point)
{
    validate(beam);
    const double density = spectral_density(beam.pulse_energy_mj, beam.background_energy_mj,
                                            beam.bandwidth_ev);
    const double per_pulse = density_to_ph_per_gamma0(density, isomer);
    const double value = beam.rep_rate_hz * per_pulse * beam.pulses_per_train
                         * chain_transmission(chain);
    return {value, std::move(at_point)};
}

std::vector<FluxRow> flux_chain(const BeamlineSpec& beam, const IsomerSpec& isomer)
{
    std::vector<FluxRow> rows;
    std::vector<double> chain;
    rows.push_back({"undulator exit", "undulator exit", 1.0, 1.0,
                    flux_at(beam, isomer, chain).value});
    for (const auto& e : beam.elements) {
        chain.push_back(e.transmission);
        FluxRow row;
        row.point = e.point;
        row.element = e.name;
        row.transmission = e.transmission;
        row.cumulative = chain_transmission(chain);
        row.flux = flux_at(beam, isomer, chain).value;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace narrowline
