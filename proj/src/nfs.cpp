#include "narrowline/nfs.hpp"

#include "narrowline/analysis.hpp"
#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

namespace narrowline {

using cplx = std::complex<double>;

//---------------------------------------------------------------------------//
// LineSet
//---------------------------------------------------------------------------//

LineSet LineSet::single(double xi, double dgamma, double le_ratio)
{
    LineSet ls;
    ls.lines = {{0.0, 1.0}};
    ls.gamma_total = 1.0 + dgamma;
    ls.xi = xi;
    ls.le_ratio = le_ratio;
    return ls;
}

bool LineSet::is_single_unshifted() const
{
    return lines.size() == 1 && lines.front().detuning == 0.0;
}

void LineSet::validate() const
{
    if (lines.empty())
        throw DomainError("line set is empty");
    double total = 0.0;
    for (const auto& l : lines) {
        if (!(l.weight > 0))
            throw DomainError("line weights must be positive");
        if (!std::isfinite(l.detuning))
            throw DomainError("line detuning must be finite");
        total += l.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DomainError("line weights must sum to 1");
    if (!(gamma_total >= 1.0))
        throw DomainError("total line width must be at least Gamma0");
    if (!(xi >= 0))
        throw DomainError("optical thickness must be non-negative");
    if (!(le_ratio >= 0))
        throw DomainError("L/L_e must be non-negative");
}

namespace {

void require_single(const LineSet& ls, const char* op)
{
    ls.validate();
    if (!ls.is_single_unshifted())
        throw DomainError(std::string(op) + " requires a single line at zero detuning");
}

double rate_prefactor(const LineSet& ls, const IsomerSpec& isomer, double n_gamma0)
{
    return units::two_pi * n_gamma0 / isomer.lifetime_s * std::exp(-ls.le_ratio);
}

} // namespace

//---------------------------------------------------------------------------//
// Closed forms
//---------------------------------------------------------------------------//

double thin_target_rate(double t, const LineSet& ls, const IsomerSpec& isomer, double n_gamma0)
{
    require_single(ls, "thin_target_rate");
    const double T = t / isomer.lifetime_s;
    return rate_prefactor(ls, isomer, n_gamma0) * ls.xi * ls.xi
           * std::exp(-(ls.gamma_total + ls.xi) * T);
}

double exact_rate(double t, const LineSet& ls, const IsomerSpec& isomer, double n_gamma0)
{
    require_single(ls, "exact_rate");
    if (t < 0)
        return 0.0;
    const double T = t / isomer.lifetime_s;
    const double x = 2.0 * std::sqrt(ls.xi * T);
    double kernel;
    if (x < 1e-4) {
        // (xi/T) J1(x)^2 = xi^2 (2 J1(x)/x)^2, three-term series for J1
        const double x2 = x * x;
        const double s = 1.0 - x2 / 8.0 + x2 * x2 / 192.0;
        kernel = ls.xi * ls.xi * s * s;
    } else {
        const double j1 = std::cyl_bessel_j(1.0, x);
        kernel = ls.xi / T * j1 * j1;
    }
    return rate_prefactor(ls, isomer, n_gamma0) * std::exp(-ls.gamma_total * T) * kernel;
}

namespace {

/// Resonant phase sum S(z) = sum_j w_j xi / (z - Omega_j + i Gamma/2).
cplx resonant_sum(cplx z, const LineSet& ls)
{
    const cplx half_width(0.0, 0.5 * ls.gamma_total);
    cplx s = 0.0;
    for (const auto& l : ls.lines)
        s += l.weight * ls.xi / (z - l.detuning + half_width);
    return s;
}

/// exp(-iS) - 1 + iS, i.e. the response beyond first order.
cplx higher_order(cplx s)
{
    const cplx z = cplx(0.0, -1.0) * s;
    if (std::abs(z) < 1e-2) {
        const cplx z2 = z * z;
        return z2 * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
    }
    return std::exp(z) - 1.0 - z;
}

} // namespace

cplx transmission_amplitude(double omega, const LineSet& ls)
{
    ls.validate();
    const cplx s = resonant_sum(cplx(omega, 0.0), ls);
    return std::exp(-0.5 * ls.le_ratio) * std::exp(cplx(0.0, -1.0) * s);
}

//---------------------------------------------------------------------------//
// Transform route
//---------------------------------------------------------------------------//

namespace {

// The FFTW planner is not re-entrant; execution on distinct plans is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwFree
{
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

class InPlaceForwardFft
{
  public:
    explicit InPlaceForwardFft(std::size_t n)
        : n_(n), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)))
    {
        if (!data_)
            throw std::bad_alloc();
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), data_.get(), data_.get(), FFTW_FORWARD,
                                 FFTW_ESTIMATE);
    }
    ~InPlaceForwardFft()
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    InPlaceForwardFft(const InPlaceForwardFft&) = delete;
    InPlaceForwardFft& operator=(const InPlaceForwardFft&) = delete;

    cplx* data() { return reinterpret_cast<cplx*>(data_.get()); }
    std::size_t size() const { return n_; }
    void execute() { fftw_execute(plan_); }

  private:
    std::size_t n_;
    std::unique_ptr<fftw_complex[], FftwFree> data_;
    fftw_plan plan_ = nullptr;
};

constexpr double kDampingExponent = 30.0; // e^-30 suppression of wrap-around
constexpr std::size_t kPeriodFactor = 4;  // transform period / t_max
constexpr double kCausalityTolerance = 1e-6;

} // namespace

TimeSpectrum propagate_pulse(const LineSet& ls, const PulseGrid& grid,
                             const IsomerSpec& isomer, double n_gamma0)
{
    ls.validate();
    if (grid.samples < (1u << 12) || !std::has_single_bit(grid.samples))
        throw DomainError("propagate_pulse: samples must be a power of two >= 4096");
    if (!(grid.t_max >= 0.1))
        throw DomainError("propagate_pulse: t_max must be at least 100 ms");

    const double tau0 = isomer.lifetime_s;
    const std::size_t n_out = grid.samples;
    const std::size_t n_fft = kPeriodFactor * n_out;
    const double period = kPeriodFactor * grid.t_max / tau0; // tau0 units
    const double dT = period / static_cast<double>(n_fft);
    const double window = units::two_pi / dT;                // Gamma0 units

    double extent = 0.0;
    double lo = ls.lines.front().detuning, hi = lo;
    for (const auto& l : ls.lines) {
        extent = std::max(extent, std::abs(l.detuning) + ls.gamma_total);
        lo = std::min(lo, l.detuning);
        hi = std::max(hi, l.detuning);
    }
    if (window < 50.0 * extent)
        throw ResolutionError("propagate_pulse: frequency window " + std::to_string(window)
                              + " Gamma0 is below 50x the line extent "
                              + std::to_string(extent) + " Gamma0; increase samples");
    if (hi > lo && units::two_pi / (hi - lo) < 8.0 * dT)
        throw ResolutionError("propagate_pulse: time step cannot resolve the beat period");

    const double damping = kDampingExponent / period;
    const double d_omega = units::two_pi / period;

    InPlaceForwardFft fft(n_fft);
    cplx* buf = fft.data();
    const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);
    for (std::size_t m = 0; m < n_fft; ++m) {
        const auto ms = static_cast<std::ptrdiff_t>(m) < half
                            ? static_cast<std::ptrdiff_t>(m)
                            : static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(n_fft);
        const cplx z(static_cast<double>(ms) * d_omega, damping);
        buf[m] = higher_order(resonant_sum(z, ls));
    }
    fft.execute();

    const double scale = d_omega / units::two_pi;
    double tail = 0.0;
    for (std::size_t k = n_fft / 2; k < n_fft; ++k)
        tail = std::max(tail, std::abs(buf[k]) * scale);
    const double peak_amplitude = std::max(ls.xi, 1e-300);
    if (tail > kCausalityTolerance * peak_amplitude)
        throw Error("propagate_pulse: response is not causal (negative-time amplitude "
                    + std::to_string(tail / peak_amplitude) + " of peak)");

    TimeSpectrum ts;
    ts.xi = ls.xi;
    ts.gamma_total = ls.gamma_total;
    ts.method = "fft";
    ts.t.resize(n_out + 1);
    ts.rate.resize(n_out + 1);
    const double prefactor = rate_prefactor(ls, isomer, n_gamma0);
    for (std::size_t k = 0; k <= n_out; ++k) {
        const double T = static_cast<double>(k) * dT;
        cplx f = buf[k] * (scale * std::exp(damping * T));
        const double envelope = std::exp(-0.5 * ls.gamma_total * T);
        for (const auto& l : ls.lines)
            f -= l.weight * ls.xi * envelope * std::exp(cplx(0.0, -l.detuning * T));
        ts.t[k] = T * tau0;
        ts.rate[k] = prefactor * std::norm(f);
    }
    return ts;
}

TimeSpectrum sample_exact(const LineSet& ls, const IsomerSpec& isomer, double n_gamma0,
                          double t0, double t1, std::size_t n)
{
    require_single(ls, "sample_exact");
    if (!(t1 > t0) || n < 1)
        throw DomainError("sample_exact: empty sampling interval");
    TimeSpectrum ts;
    ts.xi = ls.xi;
    ts.gamma_total = ls.gamma_total;
    ts.method = "exact";
    ts.t.resize(n + 1);
    ts.rate.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = k == n ? t1 : t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n);
        ts.t[k] = t;
        ts.rate[k] = exact_rate(t, ls, isomer, n_gamma0);
    }
    return ts;
}

//---------------------------------------------------------------------------//
// Window integrals
//---------------------------------------------------------------------------//

double integrate_window(const TimeSpectrum& ts, double t1, double t2)
{
    if (ts.t.size() < 2 || ts.t.size() != ts.rate.size())
        throw DomainError("integrate_window: spectrum has fewer than two samples");
    if (t1 == t2)
        return 0.0;
    if (!(t1 < t2) || t1 < ts.t.front() || t2 > ts.t.back())
        throw DomainError("integrate_window: window lies outside the sampled grid");

    auto interp = [&](std::size_t i, double t) {
        const double f = (t - ts.t[i]) / (ts.t[i + 1] - ts.t[i]);
        return ts.rate[i] + f * (ts.rate[i + 1] - ts.rate[i]);
    };
    // index of the interval containing t (last interval for t == back)
    auto interval = [&](double t) {
        auto it = std::upper_bound(ts.t.begin(), ts.t.end(), t);
        auto i = static_cast<std::size_t>(std::distance(ts.t.begin(), it));
        return std::min(i == 0 ? 0 : i - 1, ts.t.size() - 2);
    };

    const std::size_t i1 = interval(t1);
    const std::size_t i2 = interval(t2);
    const double r1 = interp(i1, t1);
    const double r2 = interp(i2, t2);
    if (i1 == i2)
        return 0.5 * (r1 + r2) * (t2 - t1);

    double sum = 0.5 * (r1 + ts.rate[i1 + 1]) * (ts.t[i1 + 1] - t1);
    for (std::size_t i = i1 + 1; i < i2; ++i)
        sum += 0.5 * (ts.rate[i] + ts.rate[i + 1]) * (ts.t[i + 1] - ts.t[i]);
    sum += 0.5 * (ts.rate[i2] + r2) * (t2 - ts.t[i2]);
    return sum;
}

double window_signal(const LineSet& ls, const IsomerSpec& isomer, double n_gamma0,
                     double t1, double t2)
{
    ls.validate();
    if (t1 == t2)
        return 0.0;
    if (!(t1 < t2) || t1 < 0)
        throw DomainError("window_signal: invalid time window");
    if (ls.is_single_unshifted()) {
        // keep (decay rate x sample spacing) <= 0.05; trapezoid error ~2e-4
        const double decay = (ls.gamma_total + ls.xi) / isomer.lifetime_s;
        const double wanted = std::ceil(20.0 * decay * (t2 - t1));
        const auto n = static_cast<std::size_t>(std::clamp(wanted, 4096.0, 4194304.0));
        return integrate_window(sample_exact(ls, isomer, n_gamma0, t1, t2, n), t1, t2);
    }
    PulseGrid grid;
    grid.t_max = std::max(0.1, t2);
    return integrate_window(propagate_pulse(ls, grid, isomer, n_gamma0), t1, t2);
}

std::vector<double> window_signal_sweep(const LineSet& ls, const IsomerSpec& isomer,
                                        double n_gamma0, double t1, double t2,
                                        std::span<const double> dgammas, unsigned jobs)
{
    std::vector<double> out(dgammas.size());
    auto work = [&](std::size_t i) {
        LineSet l = ls;
        l.gamma_total = 1.0 + dgammas[i];
        out[i] = window_signal(l, isomer, n_gamma0, t1, t2);
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(dgammas.size())));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < dgammas.size(); ++i)
            work(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j)
        pool.emplace_back([&, j] {
            try {
                for (std::size_t i = j; i < dgammas.size(); i += jobs)
                    work(i);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

//---------------------------------------------------------------------------//
// Detection limit
//---------------------------------------------------------------------------//

DetectionLimit detection_limit_scan(const LineSet& tmpl, double flux_ph_per_gamma0_s,
                                    const DetectorModel& det, double snr_threshold,
                                    std::span<const double> dgamma_grid,
                                    const IsomerSpec& isomer, double energy_window_kev)
{
    if (!(snr_threshold > 0))
        throw UnboundedError("detection_limit_scan: SNR never falls below a threshold <= 0");
    if (dgamma_grid.empty())
        throw DomainError("detection_limit_scan: empty broadening grid");
    for (std::size_t i = 1; i < dgamma_grid.size(); ++i)
        if (!(dgamma_grid[i] > dgamma_grid[i - 1]))
            throw DomainError("detection_limit_scan: grid must be strictly increasing");
    if (!(energy_window_kev > 0))
        throw DomainError("detection_limit_scan: energy window must be positive");

    DetectionLimit result;
    result.background_in_window = det.background_rate * energy_window_kev;

    auto snr_at = [&](double dgamma) {
        LineSet ls = tmpl;
        ls.gamma_total = 1.0 + dgamma;
        ++result.evaluations;
        const double per_s = window_signal(ls, isomer, flux_ph_per_gamma0_s, det.gate_open_s,
                                           det.gate_close_s);
        return snr(per_s * units::rate_unit_s, result.background_in_window);
    };
    auto above = [&](double value) { return !(value < snr_threshold); };

    const double snr_last = snr_at(dgamma_grid.back());
    if (above(snr_last))
        throw UnboundedError("detection_limit_scan: SNR stays above the threshold up to dGamma = "
                             + std::to_string(dgamma_grid.back()) + " Gamma0");
    const double snr_first = snr_at(dgamma_grid.front());
    if (!above(snr_first)) {
        result.bound = dgamma_grid.front();
        result.snr_at_bound = snr_first;
        return result;
    }

    std::size_t lo = 0, hi = dgamma_grid.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (above(snr_at(dgamma_grid[mid])) ? lo : hi) = mid;
    }
    double a = dgamma_grid[lo], b = dgamma_grid[hi];
    double snr_b = snr_last;
    for (int it = 0; it < 60 && (b - a) > 1e-4 * std::max(1.0, b); ++it) {
        const double mid = 0.5 * (a + b);
        const double s = snr_at(mid);
        if (above(s)) {
            a = mid;
        } else {
            b = mid;
            snr_b = s;
        }
    }
    result.bound = b;
    result.snr_at_bound = snr_b;
    return result;
}

OptimalThickness optimal_thickness(const TargetSpec& target)
{
    const double sigma = (target.xi && target.thickness_um) ? sigma_resonant(target)
                                                            : sigma_resonant_optimized(target);
    OptimalThickness out;
    out.thickness_um = 2.0 * target.absorption_length_um;
    out.xi = sigma * target.number_density_cm3 * units::um_to_cm(out.thickness_um) / 4.0;
    return out;
}

} // namespace narrowline
