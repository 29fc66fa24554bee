#pragma once

// Broadening and splitting estimates for the 45Sc resonance: magnetic
// dipole-dipole shifts, electric quadrupole splitting and Zeeman splitting.
// All magnitudes are returned in units of the natural width Gamma0.

#include "narrowline/core_data.hpp"

#include <string>
#include <utility>
#include <vector>

namespace narrowline {

/// Eigenvalues of the quadrupole Hamiltonian, ascending, in MHz.
struct HyperfineLevels
{
    Spin spin;
    std::vector<double> energies;
    std::vector<int> twice_abs_m; // dominant |m| (times two) of each level

    double span() const;
};

/// Diagonalizes H_Q = C / (4I(2I-1)) [3Iz^2 - I(I+1) + eta (Ix^2 - Iy^2)].
/// `coupling` is eQV_zz/h in MHz.
HyperfineLevels quadrupole_levels(Spin spin, double coupling_mhz, double eta);

enum class Mechanism
{
    dipole_dipole,
    quadrupole,
    zeeman
};

std::string_view to_string(Mechanism m);

struct BroadeningEstimate
{
    Mechanism mechanism = Mechanism::quadrupole;
    double magnitude = 0.0; // Gamma0 units
    std::vector<std::pair<std::string, double>> inputs;
};

/// Ground plus excited quadrupole span of the transition, Gamma0 units.
/// The excited coupling is the ground coupling times Q_e/Q_g.
BroadeningEstimate transition_span_gamma0(const IsomerSpec& isomer, const TargetSpec& target,
                                          Endpoint endpoint = Endpoint::upper);

/// U = 2 (mu0/4pi) mu_g mu_e mu_N^2 / r^3 in Gamma0 units.
BroadeningEstimate dipole_broadening(double mu_g, double mu_e, double r_angstrom,
                                     const IsomerSpec& isomer);

/// Full ground-multiplet Zeeman span 2 mu mu_N B in Gamma0 units.
BroadeningEstimate zeeman_splitting(double mu, Spin spin, double b_tesla,
                                    const IsomerSpec& isomer);

/// Gamma0-unit magnitude expressed in MHz.
double gamma0_to_mhz(double gamma0_units, const IsomerSpec& isomer);

} // namespace narrowline
