#include "narrowline/errors.hpp"
#include "narrowline/nfs.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

using namespace narrowline;
using cplx = std::complex<double>;

namespace {

constexpr double kTwoPi = 6.283185307179586;

const IsomerSpec& sc() { return default_catalog().isomer("45Sc"); }

// J1 by its power series; adequate for the arguments used here (x < 10)
double j1_series(double x)
{
    double term = x / 2.0, sum = term;
    for (int k = 1; k < 60; ++k) {
        term *= -(x * x / 4.0) / (k * (k + 1.0));
        sum += term;
    }
    return sum;
}

// single-line amplitude in tau0 units; -xi at T = 0
cplx line_amplitude(double T, double xi, double detuning, double gamma)
{
    const double x = 2.0 * std::sqrt(xi * T);
    const double k = T > 0 ? -std::sqrt(xi / T) * j1_series(x) : -xi;
    return k * std::exp(cplx(-0.5 * gamma * T, -detuning * T));
}

double oracle_rate(double t, double xi, double gamma, double le, double n)
{
    const double T = t / 0.47;
    return kTwoPi * n / 0.47 * std::exp(-le) * std::norm(line_amplitude(T, xi, 0.0, gamma));
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST_SUITE("nfs")
{
    TEST_CASE("line set validation")
    {
        CHECK_NOTHROW(LineSet::single(2.25, 0.0, 0.0).validate());
        LineSet ls = LineSet::single(2.25, 0.0, 0.0);
        ls.lines = {{0.0, 0.5}, {10.0, 0.4}};
        CHECK_THROWS_AS(ls.validate(), DomainError);
        ls.gamma_total = 0.5;
        ls.lines = {{0.0, 1.0}};
        CHECK_THROWS_AS(ls.validate(), DomainError);
        CHECK_FALSE(LineSet{{{5.0, 1.0}}, 1.0, 1.0, 0.0}.is_single_unshifted());
    }

    TEST_CASE("thin-target rate")
    {
        const auto ls = LineSet::single(2.25, 0.0, 0.0);
        CHECK(thin_target_rate(0.0, ls, sc(), 1.0) == doctest::Approx(kTwoPi / 0.47 * 2.25 * 2.25).epsilon(1e-12));
        CHECK(thin_target_rate(0.0, ls, sc(), 1.0) == doctest::Approx(67.7).epsilon(1e-3));
        CHECK(thin_target_rate(0.05, LineSet::single(0.0, 0.0, 0.0), sc(), 1.0) == 0.0);

        const auto broad = LineSet::single(2.25, 500.0, 0.0);
        const double ratio = thin_target_rate(0.002, broad, sc(), 1.0) / thin_target_rate(0.0, broad, sc(), 1.0);
        CHECK(rel(ratio, std::exp(-(501.0 + 2.25) * 0.002 / 0.47)) < 1e-12);

        LineSet two = LineSet::single(1.0, 0.0, 0.0);
        two.lines = {{-5.0, 0.5}, {5.0, 0.5}};
        CHECK_THROWS_AS(thin_target_rate(0.0, two, sc(), 1.0), DomainError);
    }

    TEST_CASE("exact rate against the Bessel oracle")
    {
        for (double xi : {0.3, 1.1, 2.25, 3.0})
            for (double dg : {0.0, 10.0})
                for (double t : {0.0, 1e-9, 1e-4, 0.003, 0.02, 0.07, 0.1}) {
                    CAPTURE(xi);
                    CAPTURE(t);
                    const auto ls = LineSet::single(xi, dg, 0.7);
                    const double want = oracle_rate(t, xi, 1.0 + dg, 0.7, 1.3);
                    CHECK(std::abs(exact_rate(t, ls, sc(), 1.3) - want) <= 1e-9 * want + 1e-300);
                }
    }

    TEST_CASE("exact rate limits")
    {
        const auto ls = LineSet::single(2.25, 0.0, 0.0);
        CHECK(exact_rate(0.0, ls, sc(), 1.0) == thin_target_rate(0.0, ls, sc(), 1.0));
        const double t = 0.01 * 0.47 / 2.25;
        CHECK(rel(exact_rate(t, ls, sc(), 1.0), thin_target_rate(t, ls, sc(), 1.0)) < 0.01);
        // first zero of J1
        const double tz = std::pow(3.8317059702 / 2.0, 2) / 2.25 * 0.47;
        CHECK(exact_rate(tz, ls, sc(), 1.0) < 1e-12 * exact_rate(0.0, ls, sc(), 1.0));
        CHECK(exact_rate(-1.0, ls, sc(), 1.0) == 0.0);
    }

    TEST_CASE("thin-limit equivalence")
    {
        for (double xi : {0.5, 1.0, 2.0, 3.0})
            for (double dg : {0.0, 10.0, 100.0, 500.0}) {
                const auto ls = LineSet::single(xi, dg, 0.0);
                const double t_max = 0.02 * 0.47 / xi;
                for (int k = 0; k <= 10; ++k) {
                    const double t = t_max * k / 10.0;
                    CHECK(rel(exact_rate(t, ls, sc(), 1.0), thin_target_rate(t, ls, sc(), 1.0)) < 0.01);
                }
            }
    }

    TEST_CASE("quadratic scaling in xi")
    {
        const double t = 0.01;
        const double r1 = exact_rate(t, LineSet::single(1e-3, 0.0, 0.0), sc(), 1.0);
        const double r2 = exact_rate(t, LineSet::single(1e-2, 0.0, 0.0), sc(), 1.0);
        const double slope = std::log(r2 / r1) / std::log(10.0);
        CHECK(std::abs(slope - 2.0) < 0.02);
    }

    TEST_CASE("broadening speeds up the initial decay")
    {
        for (double dg : {0.0, 10.0, 100.0, 500.0}) {
            const auto ls = LineSet::single(2.25, dg, 0.0);
            const double dt = 1e-3 * 0.47 / (1.0 + dg + 2.25);
            const double slope = std::log(exact_rate(dt, ls, sc(), 1.0) / exact_rate(0.0, ls, sc(), 1.0)) / dt;
            const double want = -(1.0 + dg + 2.25) / 0.47;
            CHECK(rel(slope, want) < 0.02);
        }
    }

    TEST_CASE("transmission amplitude")
    {
        const auto none = LineSet::single(0.0, 0.0, 2.0);
        for (double w : {-100.0, 0.0, 0.3, 50.0})
            CHECK(std::abs(transmission_amplitude(w, none)) == doctest::Approx(std::exp(-1.0)));
        const auto ls = LineSet::single(2.25, 10.0, 2.0);
        CHECK(std::abs(transmission_amplitude(1e9, ls) - std::exp(-1.0)) < 1e-8);
        // on resonance: exp(-i xi / (i Gamma/2)) = exp(-2 xi / Gamma)
        CHECK(std::abs(transmission_amplitude(0.0, ls)) == doctest::Approx(std::exp(-1.0 - 2.0 * 2.25 / 11.0)));
    }

    TEST_CASE("pulse propagation reproduces the closed form")
    {
        for (double dg : {0.0, 100.0}) {
            const auto ls = LineSet::single(2.25, dg, 2.0);
            const auto ts = propagate_pulse(ls, PulseGrid{0.1, 1u << 16}, sc(), 0.3);
            REQUIRE(ts.t.size() == (1u << 16) + 1);
            CHECK(ts.t.back() == doctest::Approx(0.1));
            const double peak = exact_rate(0.0, ls, sc(), 0.3);
            for (std::size_t k = 0; k < ts.t.size(); k += 97) {
                const double want = exact_rate(ts.t[k], ls, sc(), 0.3);
                CAPTURE(ts.t[k]);
                CHECK(std::abs(ts.rate[k] - want) <= 0.005 * std::max(want, 1e-9 * peak));
                CHECK(ts.rate[k] >= 0.0);
            }
        }
    }

    TEST_CASE("doublet response equals the convolution of two single lines")
    {
        const double xi = 1.0, omega = 50.0, gamma = 1.0;
        LineSet ls = LineSet::single(xi, 0.0, 0.0);
        ls.lines = {{-omega, 0.5}, {omega, 0.5}};
        const auto ts = propagate_pulse(ls, PulseGrid{0.1, 1u << 16}, sc(), 1.0);

        auto oracle = [&](double T) {
            auto f1 = [&](double s) { return line_amplitude(s, 0.5 * xi, -omega, gamma); };
            auto f2 = [&](double s) { return line_amplitude(s, 0.5 * xi, omega, gamma); };
            const int n = 20000; // Simpson
            const double h = T / n;
            cplx conv = 0.0;
            for (int i = 0; i <= n; ++i) {
                const double s = i * h;
                const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                conv += w * f1(s) * f2(T - s);
            }
            conv *= h / 3.0;
            return kTwoPi / 0.47 * std::norm(f1(T) + f2(T) + conv);
        };
        const double r0 = oracle(0.0);
        for (double T : {0.0, 0.013, 0.04, 0.077, 0.12, 0.2}) {
            const double t = T * 0.47;
            const auto k = static_cast<std::size_t>(std::llround(t / 0.1 * (1u << 16)));
            const double tk = ts.t[k];
            const double want = oracle(tk / 0.47);
            CAPTURE(T);
            CHECK(std::abs(ts.rate[k] - want) <= 0.005 * want + 1e-4 * r0);
        }
    }

    TEST_CASE("two-line beat period")
    {
        const double omega = 100.0;
        LineSet ls = LineSet::single(1e-3, 0.0, 0.0);
        ls.lines = {{-omega, 0.5}, {omega, 0.5}};
        const auto ts = propagate_pulse(ls, PulseGrid{0.1, 1u << 16}, sc(), 1.0);
        std::vector<double> minima;
        for (std::size_t k = 1; k + 1 < ts.t.size(); ++k)
            if (ts.rate[k] < ts.rate[k - 1] && ts.rate[k] <= ts.rate[k + 1])
                minima.push_back(ts.t[k]);
        REQUIRE(minima.size() >= 3);
        const double spacing = (minima.back() - minima.front()) / static_cast<double>(minima.size() - 1);
        const double want = 3.141592653589793 * 0.47 / omega;
        CHECK(rel(spacing, want) < 0.002);
    }

    TEST_CASE("only the products w_j xi enter the response")
    {
        LineSet a = LineSet::single(2.0, 5.0, 0.0);
        a.lines = {{-30.0, 0.5}, {30.0, 0.5}};
        LineSet b = a;
        b.lines = {{-30.0, 0.2}, {30.0, 0.5}, {-30.0, 0.3}};
        const auto ta = propagate_pulse(a, PulseGrid{0.1, 1u << 12}, sc(), 1.0);
        const auto tb = propagate_pulse(b, PulseGrid{0.1, 1u << 12}, sc(), 1.0);
        for (std::size_t k = 0; k < ta.t.size(); k += 7)
            CHECK(tb.rate[k] == doctest::Approx(ta.rate[k]).epsilon(1e-9));
    }

    TEST_CASE("propagation preconditions")
    {
        const auto ls = LineSet::single(2.25, 0.0, 0.0);
        CHECK_THROWS_AS(propagate_pulse(ls, PulseGrid{0.1, 3000}, sc(), 1.0), DomainError);
        CHECK_THROWS_AS(propagate_pulse(ls, PulseGrid{0.1, 1024}, sc(), 1.0), DomainError);
        CHECK_THROWS_AS(propagate_pulse(ls, PulseGrid{0.05, 1u << 12}, sc(), 1.0), DomainError);
        LineSet wide = ls;
        wide.lines = {{-1e4, 0.5}, {1e4, 0.5}};
        CHECK_THROWS_AS(propagate_pulse(wide, PulseGrid{0.1, 1u << 12}, sc(), 1.0), ResolutionError);
    }

    TEST_CASE("window integrals")
    {
        const auto ls = LineSet::single(2.25, 10.0, 2.0);
        const auto ts = sample_exact(ls, sc(), 0.3, 0.0, 0.1, 20000);
        CHECK(integrate_window(ts, 0.05, 0.05) == 0.0);
        const double whole = integrate_window(ts, 0.002, 0.1);
        const double parts = integrate_window(ts, 0.002, 0.0301234) + integrate_window(ts, 0.0301234, 0.1);
        CHECK(parts == doctest::Approx(whole).epsilon(1e-12));
        CHECK_THROWS_AS(integrate_window(ts, 0.05, 0.2), DomainError);
        CHECK_THROWS_AS(integrate_window(ts, 0.06, 0.05), DomainError);

        TimeSpectrum lin;
        lin.t = {0.0, 1.0, 3.0};
        lin.rate = {0.0, 2.0, 6.0};
        CHECK(integrate_window(lin, 0.5, 2.5) == doctest::Approx(6.0));
    }

    TEST_CASE("window signal versus broadening")
    {
        std::vector<double> dgs{0.0, 10.0, 100.0, 500.0};
        const auto sig = window_signal_sweep(LineSet::single(2.25, 0.0, 2.0), sc(), 0.3, 0.002, 0.1, dgs, 2);
        for (std::size_t i = 1; i < sig.size(); ++i)
            CHECK(sig[i] < sig[i - 1]);
        const double per_1e4 = sig.back() * 1e4;
        CHECK(per_1e4 == doctest::Approx(3.0).epsilon(0.3));

        // independent quadrature of the Bessel oracle at 500 Gamma0
        const int n = 200000;
        double q = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = 0.002 + 0.098 * i / n;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            q += w * oracle_rate(t, 2.25, 501.0, 2.0, 0.3);
        }
        q *= 0.098 / n / 3.0;
        CHECK(rel(sig.back(), q) < 1e-3);

        // the transform route agrees when the line is split into two identical halves
        LineSet halves = LineSet::single(2.25, 500.0, 2.0);
        halves.lines = {{0.0, 0.5}, {0.0, 0.5}};
        CHECK(rel(window_signal(halves, sc(), 0.3, 0.002, 0.1), sig.back()) < 0.005);
    }

    TEST_CASE("detection limit")
    {
        const auto& det = default_catalog().detector("Dnfs");
        std::vector<double> grid;
        for (int i = 0; i <= 500; ++i)
            grid.push_back(10.0 * i);
        const auto tmpl = LineSet::single(2.25, 0.0, 2.0);
        const auto lim = detection_limit_scan(tmpl, 0.3, det, 3.0, grid, sc());
        CHECK(lim.bound > 500.0 / 1.5);
        CHECK(lim.bound < 500.0 * 1.5);
        CHECK(lim.snr_at_bound < 3.0);
        CHECK(lim.snr_at_bound == doctest::Approx(3.0).epsilon(0.01));
        CHECK(lim.background_in_window == doctest::Approx(0.9));

        CHECK_THROWS_AS(detection_limit_scan(tmpl, 1e12, det, 3.0, grid, sc()), UnboundedError);
        CHECK_THROWS_AS(detection_limit_scan(tmpl, 0.3, det, 0.0, grid, sc()), UnboundedError);
        std::vector<double> bad{0.0, 10.0, 5.0};
        CHECK_THROWS_AS(detection_limit_scan(tmpl, 0.3, det, 3.0, bad, sc()), DomainError);
        // already below threshold at the first grid point
        std::vector<double> high{2000.0, 3000.0};
        CHECK(detection_limit_scan(tmpl, 0.3, det, 3.0, high, sc()).bound == 2000.0);
    }

    TEST_CASE("optimal thickness")
    {
        const auto sc_t = optimal_thickness(default_catalog().target("Sc"));
        CHECK(sc_t.thickness_um == 120.0);
        CHECK(rel(sc_t.xi, 2.27) < 0.02);
        const auto scn = optimal_thickness(default_catalog().target("ScN"));
        CHECK(scn.thickness_um == 109.0);
        CHECK(rel(scn.xi, 2.26) < 0.02);
        TargetSpec zero = default_catalog().target("Sc");
        zero.absorption_length_um = 0.0;
        CHECK(optimal_thickness(zero).thickness_um == 0.0);
    }
}
