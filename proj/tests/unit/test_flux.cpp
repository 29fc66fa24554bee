#include "narrowline/errors.hpp"
#include "narrowline/flux.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace narrowline;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const IsomerSpec& sc() { return default_catalog().isomer("45Sc"); }

// photons per Gamma0 from mJ/eV, evaluated independently of the library
double oracle_ph_per_gamma0(double mj_per_ev)
{
    const double photon_j = 12389.0 * 1.602176634e-19;
    const double gamma0_ev = 6.582119569e-16 / 0.47;
    return mj_per_ev * 1e-3 / photon_j * gamma0_ev;
}

} // namespace

TEST_SUITE("flux")
{
    TEST_CASE("spectral density")
    {
        CHECK(spectral_density(0.55, 0.08, 0.6) == doctest::Approx(0.7833333).epsilon(1e-6));
        CHECK(rel(spectral_density(0.55, 0.08, 0.6), 0.78) < 0.01);
        CHECK(rel(spectral_density(0.35, 0.0, 1.3), 0.27) < 0.01);
        CHECK(spectral_density(0.3, 0.3, 2.0) == 0.0);
        CHECK_THROWS_AS(spectral_density(0.55, 0.08, 0.0), DomainError);
        CHECK_THROWS_AS(spectral_density(0.05, 0.08, 0.6), DomainError);
    }

    TEST_CASE("photons per natural width")
    {
        CHECK(rel(density_to_ph_per_gamma0(0.78, sc()), oracle_ph_per_gamma0(0.78)) < 1e-9);
        CHECK(rel(density_to_ph_per_gamma0(0.78, sc()), 5.5e-4) < 0.02);
        CHECK(rel(density_to_ph_per_gamma0(0.27, sc()), 1.9e-4) < 0.02);
        CHECK(density_to_ph_per_gamma0(0.0, sc()) == 0.0);
        for (double x : {1e-6, 0.3, 5.5e-4, 17.0})
            CHECK(rel(density_to_ph_per_gamma0(ph_per_gamma0_to_density(x, sc()), sc()), x) < 1e-12);
    }

    TEST_CASE("chain transmission")
    {
        const std::vector<double> nfs{0.66, 0.7, 0.75, 0.87};
        CHECK(chain_transmission(nfs) == doctest::Approx(0.301455).epsilon(1e-6));
        CHECK(chain_transmission(std::vector<double>{}) == 1.0);
        CHECK(chain_transmission(std::vector<double>{0.44}) == 0.44);
        CHECK_THROWS_AS(chain_transmission(std::vector<double>{0.5, 1.2}), DomainError);
        CHECK_THROWS_AS(chain_transmission(std::vector<double>{0.0}), DomainError);
    }

    TEST_CASE("flux at named points")
    {
        const auto& beam = default_catalog().beamline;
        const double f0 = flux_at(beam, sc(), std::vector<double>{}).value;
        CHECK(rel(f0, 10.0 * 400.0 * oracle_ph_per_gamma0(0.47 / 0.6)) < 1e-9);
        CHECK(rel(f0, 2.2) < 0.03);
        CHECK(rel(flux_at(beam, sc(), std::vector<double>{0.44}).value, 1.0) < 0.05);
        const double f_nfs = flux_at(beam, sc(), beam.transmissions()).value;
        CHECK(rel(f_nfs, 0.3) < 0.03);

        const auto rows = flux_chain(beam, sc());
        REQUIRE(rows.size() == beam.elements.size() + 1);
        CHECK(rows.front().element == "undulator exit");
        CHECK(rel(rows.back().flux, f_nfs) < 1e-12);
        CHECK(rows[1].point == "resonance-detection unit");
        CHECK(rows.back().point == "NFS target");
    }

    TEST_CASE("linearity and monotonicity")
    {
        BeamlineSpec beam = default_catalog().beamline;
        const std::vector<double> chain{0.44, 0.66};
        const double base = flux_at(beam, sc(), chain).value;
        beam.pulses_per_train *= 3;
        CHECK(rel(flux_at(beam, sc(), chain).value, 3.0 * base) < 1e-12);
        beam.pulses_per_train /= 3;
        CHECK(rel(flux_at(beam, sc(), std::vector<double>{0.22, 0.66}).value, 0.5 * base) < 1e-12);
        CHECK(flux_at(beam, sc(), std::vector<double>{0.44, 0.66, 0.999}).value < base);
    }
}
