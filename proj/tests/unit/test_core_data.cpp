#include "narrowline/core_data.hpp"
#include "narrowline/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

using namespace narrowline;

namespace {

constexpr double kHbar = 6.582119569e-16; // eV s
constexpr double kPi = 3.14159265358979323846;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string replaced(std::string text, const std::string& from, const std::string& to)
{
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

} // namespace

TEST_SUITE("core_data")
{
    TEST_CASE("spin parsing")
    {
        CHECK(Spin::parse("7/2").twice() == 7);
        CHECK(Spin::parse("3/2").multiplicity() == 4);
        CHECK(Spin::parse("2").twice() == 4);
        CHECK(Spin::parse("7/2").str() == "7/2");
        CHECK_THROWS_AS(Spin::parse("7/3"), ParseError);
        CHECK_THROWS_AS(Spin::parse("x"), ParseError);
    }

    TEST_CASE("default catalog isomer rows")
    {
        const auto& sc = default_catalog().isomer("45Sc");
        CHECK(sc.energy_kev() == doctest::Approx(12.389).epsilon(1e-12));
        CHECK(sc.lifetime_s == 0.47);
        CHECK(sc.width_ev == doctest::Approx(1.4e-15).epsilon(0.01));
        CHECK(sc.ground_spin == Spin(7));
        CHECK(sc.excited_spin == Spin(3));
        REQUIRE(sc.alpha_k);
        CHECK(*sc.alpha_k == 390);
        CHECK(*sc.omega_k == 0.19);
        CHECK(*sc.quadrupole_ratio == -1.45);

        for (const auto& iso : default_catalog().isomers) {
            CAPTURE(iso.name);
            const double g = kHbar / iso.lifetime_s;
            CHECK(rel(iso.width_ev, g) < 1e-6);
            CHECK(rel(iso.quality_factor, iso.energy_ev / g) < 1e-6);
            CHECK(rel(iso.width_hz, g / (2 * kPi * kHbar)) < 1e-6);
        }
        const auto& fe = default_catalog().isomer("57Fe");
        CHECK(fe.energy_kev() == doctest::Approx(14.4));
        CHECK(fe.lifetime_s == 1.4e-7);
    }

    TEST_CASE("default catalog target rows")
    {
        const auto& scn = default_catalog().target("ScN");
        CHECK(scn.number_density_cm3 == 4.37e22);
        CHECK(*scn.thickness_um == 110);
        CHECK(*scn.xi == 2.3);
        CHECK(scn.quadrupole->coupling_high_mhz == 0.0);

        const auto& scf3 = default_catalog().target("ScF3");
        CHECK_FALSE(scf3.thickness_um.has_value());
        CHECK_FALSE(scf3.xi.has_value());
        CHECK(*scf3.xi_optimized == 2.14);

        const auto& o3 = default_catalog().target("Sc2O3");
        CHECK(o3.quadrupole->coupling(Endpoint::lower) == 15.5);
        CHECK(o3.quadrupole->coupling(Endpoint::upper) == 24.4);
        CHECK(o3.quadrupole->eta(Endpoint::lower) == 0.69);

        CHECK_FALSE(default_catalog().target("ScAlMgO4").quadrupole.has_value());
        CHECK(default_catalog().target("Sc").magnetism == Magnetism::paramagnetic);
        CHECK_THROWS_AS(default_catalog().target("Nope"), DomainError);
    }

    TEST_CASE("beamline and detectors")
    {
        const auto& b = default_catalog().beamline;
        CHECK(b.pulse_energy_mj == 0.55);
        CHECK(b.pulses_per_train == 400);
        CHECK(b.elements.size() == 5);
        const auto& d = default_catalog().detector("Dnfs");
        CHECK(d.gate_open_s == 0.002);
        CHECK(d.background_rate == 0.9);
        // 300 eV FWHM
        CHECK(2.0 * std::sqrt(2.0 * std::log(2.0)) * d.energy_sigma_ev == doctest::Approx(300).epsilon(1e-3));
    }

    TEST_CASE("sigma_resonant")
    {
        const auto& sc = default_catalog().target("Sc");
        const double oracle = 4.0 * 2.3 / (3.98e22 * 120e-4);
        CHECK(rel(sigma_resonant(sc), oracle) < 1e-12);
        CHECK(rel(sigma_resonant(sc), 1.93e-20) < 0.01);
        const double opt = sigma_resonant_optimized(sc);
        CHECK(rel(opt, 2.0 * 2.27 / (3.98e22 * 60e-4)) < 1e-12);
        CHECK(rel(opt, 1.90e-20) < 0.01);
        CHECK(rel(opt, sigma_resonant(sc)) < 0.02);

        TargetSpec zero = sc;
        zero.xi = 0.0;
        CHECK(sigma_resonant(zero) == 0.0);

        CHECK_THROWS_AS(sigma_resonant(default_catalog().target("ScF3")), MissingDataError);
    }

    TEST_CASE("cross-section rows agree for every tabulated target")
    {
        for (const auto& t : default_catalog().targets) {
            if (!t.xi || !t.thickness_um)
                continue;
            CAPTURE(t.name);
            CHECK(rel(sigma_resonant(t), sigma_resonant_optimized(t)) < 0.05);
        }
    }

    TEST_CASE("invariant violations name the field")
    {
        const std::string text(default_catalog_text());
        const auto bad = replaced(text, "transmission: 0.44", "transmission: 1.2");
        try {
            parse_catalog(bad, "bad.yaml");
            FAIL("expected InvariantError");
        } catch (const InvariantError& e) {
            CHECK(std::string(e.what()).find("beamline_optics") != std::string::npos);
            CHECK(std::string(e.what()).find("transmission") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_catalog(replaced(text, "eta: [0.69, 0]", "eta: [1.5, 0]")), InvariantError);
        CHECK_THROWS_AS(parse_catalog(replaced(text, "Le_um: 60", "Le_um: -60")), InvariantError);
        CHECK_THROWS_AS(parse_catalog(replaced(text, "xi: 2.1", "xi: 3.1")), InvariantError);
        CHECK_THROWS_AS(parse_catalog(replaced(text, "Ebg_mJ: 0.08", "Ebg_mJ: 0.8")), InvariantError);
        CHECK_THROWS_AS(parse_catalog(replaced(text, "np: 400", "np: 0")), InvariantError);
        CHECK_THROWS_AS(parse_catalog(replaced(text, "gate_open_s: 0.002", "gate_open_s: 0.2")),
                        InvariantError);
    }

    TEST_CASE("derived isomer keys are cross-checked")
    {
        const std::string text(default_catalog_text());
        const auto good = replaced(text, "tau0_s: 0.47\n", "tau0_s: 0.47\n    Gamma0_eV: 1.40045097e-15\n");
        CHECK_NOTHROW(parse_catalog(good));
        const auto bad = replaced(text, "tau0_s: 0.47\n", "tau0_s: 0.47\n    Gamma0_eV: 1.5e-15\n");
        CHECK_THROWS_AS(parse_catalog(bad), InvariantError);
    }

    TEST_CASE("parse errors carry line and key context")
    {
        const std::string text(default_catalog_text());
        try {
            parse_catalog(replaced(text, "tau0_s: 0.47", "tau0_s: fast"), "cat.yaml");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("cat.yaml:") != std::string::npos);
            CHECK(msg.find("tau0_s") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_catalog("isomers: [", "x.yaml"), ParseError);
        CHECK_THROWS_AS(load_catalog("/nonexistent/catalog.yaml"), Error);
    }

    TEST_CASE("serialize and reload is exact")
    {
        const Catalog& a = default_catalog();
        const Catalog b = parse_catalog(serialize_catalog(a));
        REQUIRE(a.isomers.size() == b.isomers.size());
        for (std::size_t i = 0; i < a.isomers.size(); ++i) {
            CHECK(a.isomers[i].energy_ev == b.isomers[i].energy_ev);
            CHECK(a.isomers[i].lifetime_s == b.isomers[i].lifetime_s);
            CHECK(a.isomers[i].width_ev == b.isomers[i].width_ev);
            CHECK(a.isomers[i].alpha_k == b.isomers[i].alpha_k);
            CHECK(a.isomers[i].mu_excited == b.isomers[i].mu_excited);
        }
        REQUIRE(a.targets.size() == b.targets.size());
        for (std::size_t i = 0; i < a.targets.size(); ++i) {
            CHECK(a.targets[i].number_density_cm3 == b.targets[i].number_density_cm3);
            CHECK(a.targets[i].thickness_um == b.targets[i].thickness_um);
            CHECK(a.targets[i].xi == b.targets[i].xi);
            CHECK(a.targets[i].xi_optimized == b.targets[i].xi_optimized);
            CHECK(a.targets[i].quadrupole.has_value() == b.targets[i].quadrupole.has_value());
            CHECK(a.targets[i].dipole_distance_angstrom == b.targets[i].dipole_distance_angstrom);
        }
        CHECK(a.beamline.transmissions() == b.beamline.transmissions());
        CHECK(a.detectors.size() == b.detectors.size());
        CHECK(serialize_catalog(b) == serialize_catalog(a));
    }

    TEST_CASE("load_catalog reads a file")
    {
        const std::string path = "core_data_catalog_test.yaml";
        {
            std::ofstream os(path);
            os << default_catalog_text();
        }
        const Catalog c = load_catalog(path);
        CHECK(c.isomer("45Sc").lifetime_s == 0.47);
        std::remove(path.c_str());
    }
}
