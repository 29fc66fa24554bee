#include "narrowline/errors.hpp"
#include "narrowline/hyperfine.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace narrowline;

namespace {

const IsomerSpec& sc() { return default_catalog().isomer("45Sc"); }

double gamma0_hz() { return 6.582119569e-16 / 0.47 / (2.0 * 3.141592653589793 * 6.582119569e-16); }

} // namespace

TEST_SUITE("hyperfine")
{
    TEST_CASE("I = 3/2 closed form")
    {
        for (double eta : {0.0, 0.3, 0.69, 1.0})
            for (double c : {1.0, 2.01, -24.4}) {
                const auto lv = quadrupole_levels(Spin(3), c, eta);
                REQUIRE(lv.energies.size() == 4);
                const double e = std::abs(c) / 4.0 * std::sqrt(1.0 + eta * eta / 3.0);
                const double expect[4] = {-e, -e, e, e};
                for (int i = 0; i < 4; ++i)
                    CHECK(std::abs(lv.energies[i] - expect[i]) <= 1e-10 * std::abs(c));
                CHECK(lv.span() == doctest::Approx(std::abs(c) / 2.0 * std::sqrt(1.0 + eta * eta / 3.0)));
            }
    }

    TEST_CASE("eta = 0 diagonal case for any spin")
    {
        for (int twice : {2, 3, 4, 5, 7, 9}) {
            const double c = 3.7;
            const double I = twice / 2.0;
            const auto lv = quadrupole_levels(Spin(twice), c, 0.0);
            std::vector<double> expect;
            for (int k = 0; k <= twice; ++k) {
                const double m = I - k;
                expect.push_back(c * (3 * m * m - I * (I + 1)) / (4 * I * (2 * I - 1)));
            }
            std::sort(expect.begin(), expect.end());
            for (std::size_t i = 0; i < expect.size(); ++i)
                CHECK(std::abs(lv.energies[i] - expect[i]) <= 1e-10 * c);
        }
        const auto lv = quadrupole_levels(Spin(7), 2.0, 0.0);
        CHECK(lv.energies.front() == doctest::Approx(2.0 * (3 * 0.25 - 63.0 / 4) / 84));
        CHECK(lv.span() == doctest::Approx(3.0 / 7.0 * 2.0));
        // degenerate +-m pairs
        for (std::size_t i = 0; i < lv.energies.size(); i += 2)
            CHECK(std::abs(lv.energies[i] - lv.energies[i + 1]) < 1e-12);
    }

    TEST_CASE("traceless for every spin and asymmetry")
    {
        for (int twice : {2, 3, 5, 7})
            for (double eta = 0.0; eta <= 1.0 + 1e-12; eta += 0.25) {
                const auto lv = quadrupole_levels(Spin(twice), 5.0, eta);
                const double sum = std::accumulate(lv.energies.begin(), lv.energies.end(), 0.0);
                CHECK(std::abs(sum) <= 1e-9 * lv.span());
            }
    }

    TEST_CASE("eta sweep keeps labels and varies smoothly")
    {
        std::vector<double> prev;
        for (int i = 0; i <= 100; ++i) {
            const double eta = i / 100.0;
            const auto lv = quadrupole_levels(Spin(7), 1.0, eta);
            const std::vector<int> want{1, 1, 3, 3, 5, 5, 7, 7};
            CAPTURE(eta);
            CHECK(lv.twice_abs_m == want);
            if (!prev.empty())
                for (std::size_t k = 0; k < prev.size(); ++k)
                    CHECK(std::abs(lv.energies[k] - prev[k]) < 0.01);
            prev = lv.energies;
        }
    }

    TEST_CASE("trivial and invalid inputs")
    {
        for (double e : quadrupole_levels(Spin(7), 0.0, 0.5).energies)
            CHECK(e == 0.0);
        CHECK_THROWS_AS(quadrupole_levels(Spin(1), 1.0, 0.0), DomainError);
        CHECK_THROWS_AS(quadrupole_levels(Spin(0), 1.0, 0.0), DomainError);
        CHECK_THROWS_AS(quadrupole_levels(Spin(7), 1.0, 1.2), DomainError);
        CHECK_THROWS_AS(quadrupole_levels(Spin(7), 1.0, -0.1), DomainError);
    }

    TEST_CASE("transition span per target")
    {
        const auto& cat = default_catalog();
        // ground span 3C/7 for I = 7/2, excited span |Qe/Qg| C/2 for I = 3/2
        auto oracle = [&](double c) { return (3.0 / 7.0 * c + 1.45 * c / 2.0) * 1e6 / gamma0_hz(); };
        const double sc_span = transition_span_gamma0(sc(), cat.target("Sc")).magnitude;
        CHECK(sc_span == doctest::Approx(oracle(2.01)).epsilon(1e-9));
        CHECK(sc_span == doctest::Approx(6.8e6).epsilon(0.02));
        const double o3 = transition_span_gamma0(sc(), cat.target("Sc2O3")).magnitude;
        CHECK(o3 == doctest::Approx(oracle(24.4)).epsilon(1e-9));
        CHECK(o3 > 3e7);
        CHECK(o3 < 3e8);
        CHECK(transition_span_gamma0(sc(), cat.target("ScN")).magnitude == 0.0);
        CHECK_THROWS_AS(transition_span_gamma0(sc(), cat.target("ScAlMgO4")), MissingDataError);

        // lower endpoint carries eta = 0.69
        const double lower = transition_span_gamma0(sc(), cat.target("Sc2O3"), Endpoint::lower).magnitude;
        const double excited = 1.45 * 15.5 / 2.0 * std::sqrt(1.0 + 0.69 * 0.69 / 3.0);
        CHECK(lower > excited * 1e6 / gamma0_hz());
    }

    TEST_CASE("dipole-dipole shift")
    {
        // SI evaluation: U = 2 (mu0/4pi) mu_g mu_e mu_N^2 / r^3
        const double mu_n = 5.0507837e-27;
        const double r = 3.2e-10;
        const double u_ev = 2e-7 * 4.76 * 0.35 * mu_n * mu_n / (r * r * r) / 1.602176634e-19;
        const double want = u_ev / (6.582119569e-16 / 0.47);
        const double got = dipole_broadening(4.76, 0.35, 3.2, sc()).magnitude;
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
        CHECK(got > 1e3 / 3);
        CHECK(got < 3e3);
        CHECK(dipole_broadening(0.0, 0.35, 3.2, sc()).magnitude == 0.0);
        CHECK(dipole_broadening(4.76, 0.35, 6.4, sc()).magnitude == doctest::Approx(got / 8));
        CHECK(dipole_broadening(2 * 4.76, 0.35, 3.2, sc()).magnitude == doctest::Approx(2 * got));
        CHECK_THROWS_AS(dipole_broadening(4.76, 0.35, 0.0, sc()), DomainError);
    }

    TEST_CASE("Zeeman splitting")
    {
        const double earth = zeeman_splitting(4.76, Spin(7), 50e-6, sc()).magnitude;
        const double want = 2 * 4.76 * 5.0507837e-27 * 50e-6 / 1.602176634e-19 / (6.582119569e-16 / 0.47);
        CHECK(earth == doctest::Approx(want).epsilon(1e-9));
        CHECK(earth >= 1e3);
        CHECK(earth <= 1e5);
        const double shielded = zeeman_splitting(4.76, Spin(7), 30e-9, sc()).magnitude;
        CHECK(shielded < 10.0);
        CHECK(shielded == doctest::Approx(earth * 30e-9 / 50e-6));
        CHECK(zeeman_splitting(4.76, Spin(7), 0.0, sc()).magnitude == 0.0);
        CHECK_THROWS_AS(zeeman_splitting(4.76, Spin(0), 1e-6, sc()), DomainError);
    }

    TEST_CASE("quadrupole span is linear in the coupling")
    {
        for (double eta : {0.0, 0.5, 1.0}) {
            const double a = quadrupole_levels(Spin(7), 1.0, eta).span();
            CHECK(quadrupole_levels(Spin(7), 3.5, eta).span() == doctest::Approx(3.5 * a));
        }
    }
}
