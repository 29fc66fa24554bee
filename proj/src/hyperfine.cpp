#include "narrowline/hyperfine.hpp"

#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace narrowline {

double HyperfineLevels::span() const
{
    return energies.empty() ? 0.0 : energies.back() - energies.front();
}

HyperfineLevels quadrupole_levels(Spin spin, double coupling_mhz, double eta)
{
    if (spin.twice() < 2)
        throw DomainError("quadrupole_levels: spin " + spin.str() + " has no quadrupole moment");
    if (!(eta >= 0.0 && eta <= 1.0))
        throw DomainError("quadrupole_levels: eta must lie in [0, 1]");
    if (!std::isfinite(coupling_mhz))
        throw DomainError("quadrupole_levels: coupling must be finite");

    const double I = spin.value();
    const int dim = spin.multiplicity();
    const double pref = coupling_mhz / (4.0 * I * (2.0 * I - 1.0));

    // basis index k <-> m = I - k
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        const double m = I - k;
        h(k, k) = pref * (3.0 * m * m - I * (I + 1.0));
    }
    // eta (Ix^2 - Iy^2) = (eta/2)(I+^2 + I-^2); <m+2|I+^2|m>
    for (int k = 2; k < dim; ++k) {
        const double m = I - k;
        const double a = std::sqrt((I - m) * (I + m + 1.0) * (I - m - 1.0) * (I + m + 2.0));
        h(k - 2, k) = h(k, k - 2) = pref * 0.5 * eta * a;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("quadrupole_levels: eigen decomposition failed");

    HyperfineLevels out;
    out.spin = spin;
    out.energies.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + dim);
    out.twice_abs_m.resize(static_cast<std::size_t>(dim));
    const auto& vecs = solver.eigenvectors();
    for (int j = 0; j < dim; ++j) {
        // weight per |m|; +m and -m pooled so Kramers mixing does not flip labels
        std::vector<double> weight(static_cast<std::size_t>(spin.twice() / 2 + 1), 0.0);
        for (int k = 0; k < dim; ++k) {
            const int twice_m = spin.twice() - 2 * k;
            weight[static_cast<std::size_t>(std::abs(twice_m) / 2)] += vecs(k, j) * vecs(k, j);
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < weight.size(); ++i)
            if (weight[i] > weight[best])
                best = i;
        // index i stores |2m| / 2 rounded down; restore parity of 2I
        out.twice_abs_m[static_cast<std::size_t>(j)] = static_cast<int>(2 * best) + (spin.twice() % 2);
    }
    return out;
}

std::string_view to_string(Mechanism m)
{
    switch (m) {
    case Mechanism::dipole_dipole:
        return "dipole_dipole";
    case Mechanism::quadrupole:
        return "quadrupole";
    case Mechanism::zeeman:
        return "zeeman";
    }
    return "unknown";
}

double gamma0_to_mhz(double gamma0_units, const IsomerSpec& isomer)
{
    return units::hz_to_mhz(gamma0_units * isomer.width_hz);
}

BroadeningEstimate transition_span_gamma0(const IsomerSpec& isomer, const TargetSpec& target,
                                          Endpoint endpoint)
{
    if (!target.quadrupole)
        throw MissingDataError("transition_span_gamma0: target " + target.name
                               + " has no quadrupole coupling data");
    if (!isomer.quadrupole_ratio)
        throw MissingDataError("transition_span_gamma0: isomer " + isomer.name
                               + " has no Q_e/Q_g ratio");
    const double c_g = target.quadrupole->coupling(endpoint);
    const double eta = target.quadrupole->eta(endpoint);
    const double c_e = c_g * std::abs(*isomer.quadrupole_ratio);

    auto span_of = [&](Spin s, double c) {
        return s.twice() < 2 ? 0.0 : quadrupole_levels(s, c, eta).span();
    };
    const double span_mhz = span_of(isomer.ground_spin, c_g) + span_of(isomer.excited_spin, c_e);

    BroadeningEstimate est;
    est.mechanism = Mechanism::quadrupole;
    est.magnitude = units::mhz_to_hz(span_mhz) / isomer.width_hz;
    est.inputs = {{"coupling_mhz", c_g}, {"eta", eta}, {"q_ratio", *isomer.quadrupole_ratio}};
    return est;
}

BroadeningEstimate dipole_broadening(double mu_g, double mu_e, double r_angstrom,
                                     const IsomerSpec& isomer)
{
    if (!(r_angstrom > 0))
        throw DomainError("dipole_broadening: distance must be positive");
    const double r = units::angstrom_to_m(r_angstrom);
    const double mu_n = units::nuclear_magneton_j_per_t;
    const double u_joule = 2.0 * units::mu0_over_4pi * mu_g * mu_e * mu_n * mu_n / (r * r * r);

    BroadeningEstimate est;
    est.mechanism = Mechanism::dipole_dipole;
    est.magnitude = std::abs(units::joule_to_ev(u_joule)) / isomer.width_ev;
    est.inputs = {{"mu_g", mu_g}, {"mu_e", mu_e}, {"r_angstrom", r_angstrom}};
    return est;
}

BroadeningEstimate zeeman_splitting(double mu, Spin spin, double b_tesla,
                                    const IsomerSpec& isomer)
{
    if (spin.twice() <= 0)
        throw DomainError("zeeman_splitting: spin must be positive");
    if (!(b_tesla >= 0))
        throw DomainError("zeeman_splitting: field must be non-negative");
    const double e_joule = 2.0 * std::abs(mu) * units::nuclear_magneton_j_per_t * b_tesla;

    BroadeningEstimate est;
    est.mechanism = Mechanism::zeeman;
    est.magnitude = units::joule_to_ev(e_joule) / isomer.width_ev;
    est.inputs = {{"mu", mu}, {"spin", spin.value()}, {"b_tesla", b_tesla}};
    return est;
}

} // namespace narrowline
