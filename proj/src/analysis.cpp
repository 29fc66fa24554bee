#include "narrowline/analysis.hpp"

#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace narrowline {

//---------------------------------------------------------------------------//
// Rates
//---------------------------------------------------------------------------//

namespace {

double normalization(Range band_kev, Range window_s, double live_time_s)
{
    if (!(band_kev.width() > 0))
        throw DomainError("band_rate: empty energy band");
    if (!(window_s.width() > 0))
        throw DomainError("band_rate: empty time window");
    if (!(live_time_s > 0))
        throw DomainError("band_rate: live time must be positive");
    return band_kev.width() * live_time_s / units::rate_unit_s;
}

} // namespace

BandRate band_rate_from_counts(double counts, Range band_kev, Range window_s, double live_time_s)
{
    const double norm = normalization(band_kev, window_s, live_time_s);
    if (!(counts >= 0))
        throw DomainError("band_rate: counts must be non-negative");
    BandRate r;
    r.rate = counts / norm;
    r.sigma = std::sqrt(counts) / norm;
    r.band_kev = band_kev;
    r.window_s = window_s;
    r.live_time_s = live_time_s;
    r.counts = static_cast<std::size_t>(std::llround(counts));
    return r;
}

BandRate band_rate(std::span<const EventRecord> events, Range band_kev, Range window_s,
                   double live_time_s, std::span<const std::uint32_t> detectors)
{
    normalization(band_kev, window_s, live_time_s);
    std::size_t n = 0;
    for (const auto& e : events) {
        if (!detectors.empty()
            && std::find(detectors.begin(), detectors.end(), e.detector) == detectors.end())
            continue;
        if (e.e_kev >= band_kev.lo && e.e_kev < band_kev.hi && e.t_s >= window_s.lo
            && e.t_s < window_s.hi)
            ++n;
    }
    return band_rate_from_counts(static_cast<double>(n), band_kev, window_s, live_time_s);
}

double snr(double signal_rate, double background_rate)
{
    if (!(background_rate > 0))
        throw DomainError("snr: background rate must be positive");
    return signal_rate / background_rate;
}

double snr(const BandRate& signal, double background_rate)
{
    return snr(signal.rate, background_rate);
}

//---------------------------------------------------------------------------//
// Conversion coefficient
//---------------------------------------------------------------------------//

namespace {

/// (1 - e^-x) / x, continuous through x = 0.
double escape_factor(double x)
{
    if (std::abs(x) < 1e-8)
        return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

} // namespace

double yield_correction(double le_um, double l12_um, double l_um)
{
    if (!(le_um > 0) || !(l12_um > 0) || !(l_um > 0))
        throw DomainError("yield_correction: lengths must be positive");
    // (L_i / 2L)(1 - e^{-L/L_i}) = escape_factor(L / L_i) / 2
    const double x1 = l_um * (1.0 / l12_um + 1.0 / le_um);
    const double x2 = l_um * (1.0 / l12_um - 1.0 / le_um);
    if (x2 > -1.0)
        return 0.5 * escape_factor(x1) + 0.5 * escape_factor(x2) * std::exp(-l_um / le_um);
    // same term without the overflowing e^{-x2}
    return 0.5 * escape_factor(x1)
           + 0.5 * (std::exp(-l_um / l12_um) - std::exp(-l_um / le_um)) / -x2;
}

ConversionCoefficient conversion_coefficient(const BandRate& r4, const BandRate& r12, double rb,
                                             double omega_k, double y4, double y12)
{
    if (!(omega_k > 0) || !(y4 > 0) || !(y12 > 0))
        throw DomainError("conversion_coefficient: omega_K and yields must be positive");
    if (!(rb >= 0))
        throw DomainError("conversion_coefficient: background must be non-negative");
    const double num = r4.rate - 2.0 * rb;
    const double den = r12.rate - 2.0 * rb;
    if (!(den > std::max(0.0, 3.0 * r12.sigma)))
        throw DomainError("conversion_coefficient: elastic signal R12 - 2RB = " + std::to_string(den)
                          + " is not above 3 sigma of R12");
    ConversionCoefficient out;
    out.alpha_k = num / den / omega_k * (y12 / y4);
    const double rel4 = num != 0.0 ? r4.sigma / num : 0.0;
    const double rel12 = r12.sigma / den;
    out.sigma = std::abs(out.alpha_k) * std::hypot(rel4, rel12);
    if (num == 0.0)
        out.sigma = r4.sigma / den / omega_k * (y12 / y4);
    return out;
}

//---------------------------------------------------------------------------//
// Exponential fit
//---------------------------------------------------------------------------//

namespace {

struct ExpModel
{
    std::span<const double> s; // centered times
    std::span<const double> n;
    bool bg;

    // p = (a, gamma[, b]); mu = exp(a - gamma s) [+ b]
    double log_likelihood(const Eigen::VectorXd& p) const
    {
        double ll = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double mu = std::exp(p[0] - p[1] * s[i]) + (bg ? p[2] : 0.0);
            if (!(mu > 0) || !std::isfinite(mu)) {
                if (n[i] > 0 || !std::isfinite(mu))
                    return -std::numeric_limits<double>::infinity();
                continue;
            }
            ll += n[i] * std::log(mu) - mu;
        }
        return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    }

    /// Score and Fisher information. Without a background term the log
    /// link is canonical and this is also the observed information.
    void derivatives(const Eigen::VectorXd& p, Eigen::VectorXd& grad, Eigen::MatrixXd& info) const
    {
        const auto k = p.size();
        grad = Eigen::VectorXd::Zero(k);
        info = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd d(k);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double e = std::exp(p[0] - p[1] * s[i]);
            const double mu = e + (bg ? p[2] : 0.0);
            d[0] = e;
            d[1] = -s[i] * e;
            if (bg)
                d[2] = 1.0;
            const double mu_safe = std::max(mu, 1e-300);
            grad += (n[i] / mu_safe - 1.0) * d;
            info += d * d.transpose() / mu_safe;
        }
    }
};

} // namespace

ExpFit fit_exponential(std::span<const double> t, std::span<const double> counts,
                       const ExpFitOptions& opts)
{
    if (t.size() != counts.size())
        throw DomainError("fit_exponential: times and counts differ in length");
    if (t.size() < 3)
        throw DomainError("fit_exponential: need at least 3 bins");
    double total = 0.0;
    for (double c : counts) {
        if (!(c >= 0) || !std::isfinite(c))
            throw DomainError("fit_exponential: counts must be finite and non-negative");
        total += c;
    }
    if (total == 0.0)
        throw DomainError("fit_exponential: all counts are zero");

    const double t_mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    std::vector<double> s(t.size());
    double s_span = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        s[i] = t[i] - t_mean;
        s_span = std::max(s_span, std::abs(s[i]));
    }
    if (!(s_span > 0))
        throw DomainError("fit_exponential: bin times must not all coincide");

    ExpModel model{s, counts, opts.float_background};
    const double mean = total / static_cast<double>(t.size());
    Eigen::VectorXd p(opts.float_background ? 3 : 2);
    if (opts.float_background) {
        const double min_count = *std::min_element(counts.begin(), counts.end());
        p << std::log(std::max(mean - 0.5 * min_count, 0.5 * mean)), 0.0, 0.5 * min_count;
    } else {
        p << std::log(mean), 0.0;
    }

    double ll = model.log_likelihood(p);
    Eigen::VectorXd grad;
    Eigen::MatrixXd info;
    bool converged = false;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        model.derivatives(p, grad, info);
        Eigen::VectorXd step = info.ldlt().solve(grad);
        if (!step.allFinite())
            throw ConvergenceError("fit_exponential: singular information matrix");

        double scale = 1.0;
        Eigen::VectorXd trial;
        double ll_trial = -std::numeric_limits<double>::infinity();
        for (int h = 0; h < 60; ++h, scale *= 0.5) {
            trial = p + scale * step;
            if (opts.float_background && trial[2] < 0)
                trial[2] = 0.0;
            ll_trial = model.log_likelihood(trial);
            if (ll_trial >= ll - 1e-12 * std::abs(ll))
                break;
        }
        if (!std::isfinite(ll_trial))
            throw ConvergenceError("fit_exponential: line search failed");
        const Eigen::VectorXd delta = trial - p;
        p = trial;
        ll = ll_trial;

        double size = std::max(std::abs(delta[0]), std::abs(delta[1]) * s_span);
        if (opts.float_background)
            size = std::max(size, std::abs(delta[2]) / std::max(1.0, mean));
        if (size < 1e-11) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("fit_exponential: no convergence after "
                               + std::to_string(opts.max_iterations) + " iterations");

    model.derivatives(p, grad, info);
    if (opts.float_background && p[2] == 0.0) {
        // background at its bound: errors of the remaining parameters only
        info.conservativeResize(2, 2);
    }
    const Eigen::MatrixXd cov = info.inverse();

    ExpFit out;
    out.gamma = p[1];
    out.gamma_sigma = std::sqrt(std::max(0.0, cov(1, 1)));
    const double log_a0 = p[0] + p[1] * t_mean;
    out.amplitude = std::exp(log_a0);
    const double var_log_a0 = cov(0, 0) + t_mean * t_mean * cov(1, 1) + 2.0 * t_mean * cov(0, 1);
    out.amplitude_sigma = out.amplitude * std::sqrt(std::max(0.0, var_log_a0));
    if (opts.float_background) {
        out.background = p[2];
        out.background_sigma = cov.rows() > 2 ? std::sqrt(std::max(0.0, cov(2, 2))) : 0.0;
    }
    out.log_likelihood = ll;
    out.iterations = it + 1;
    if (!std::isfinite(out.gamma) || !std::isfinite(out.gamma_sigma))
        throw ConvergenceError("fit_exponential: non-finite estimate");
    return out;
}

//---------------------------------------------------------------------------//
// Histogram and Gaussian fit
//---------------------------------------------------------------------------//

double Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

Histogram make_histogram(std::span<const double> values, std::size_t bins)
{
    if (values.empty())
        throw DomainError("make_histogram: no values");
    if (bins < 1)
        throw DomainError("make_histogram: need at least one bin");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0)
                        / static_cast<double>(values.size());
    Histogram h;
    h.counts.assign(bins, 0.0);
    const double floor_width = std::max(1e-9 * std::abs(mean), 1e-12);
    if (*mx - *mn < floor_width) {
        h.bin_width = floor_width;
        h.lo = mean - 0.5 * floor_width * static_cast<double>(bins);
    } else {
        h.bin_width = (*mx - *mn) / static_cast<double>(bins);
        h.lo = *mn;
    }
    for (double v : values) {
        auto i = static_cast<std::ptrdiff_t>(std::floor((v - h.lo) / h.bin_width));
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        h.counts[static_cast<std::size_t>(i)] += 1.0;
    }
    return h;
}

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(units::two_pi); }
double big_phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Moments
{
    double total = 0, mean = 0, std = 0;
};

Moments moments(const Histogram& h)
{
    Moments m;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        m.total += h.counts[i];
        m.mean += h.counts[i] * h.center(i);
    }
    m.mean /= m.total;
    double var = 0.0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        var += h.counts[i] * std::pow(h.center(i) - m.mean, 2);
    m.std = std::sqrt(var / m.total);
    return m;
}

} // namespace

GaussianFit gaussian_fit(const Histogram& h)
{
    if (h.counts.empty() || !(h.total() > 0))
        throw DomainError("gaussian_fit: histogram is empty");
    const auto occupied = std::count_if(h.counts.begin(), h.counts.end(), [](double c) { return c > 0; });
    const Moments m = moments(h);
    const double std_floor = h.bin_width / std::sqrt(12.0);

    GaussianFit out;
    if (occupied < 5) {
        out.amplitude = m.total;
        out.mean = m.mean;
        out.std = std::max(m.std, std_floor);
        out.degenerate = true;
        return out;
    }

    const auto nb = static_cast<Eigen::Index>(h.counts.size());
    Eigen::VectorXd y(nb), w(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        y[i] = h.counts[static_cast<std::size_t>(i)];
        w[i] = 1.0 / std::max(y[i], 1.0);
    }
    // p = (A, mu, log sigma)
    auto evaluate = [&](const Eigen::Vector3d& p, Eigen::VectorXd& model, Eigen::MatrixXd* jac) {
        const double sigma = std::exp(p[2]);
        model.resize(nb);
        if (jac)
            jac->resize(nb, 3);
        for (Eigen::Index i = 0; i < nb; ++i) {
            const double lo = h.lo + static_cast<double>(i) * h.bin_width;
            const double zl = (lo - p[1]) / sigma;
            const double zh = (lo + h.bin_width - p[1]) / sigma;
            const double prob = big_phi(zh) - big_phi(zl);
            model[i] = p[0] * prob;
            if (jac) {
                (*jac)(i, 0) = prob;
                (*jac)(i, 1) = -p[0] * (phi(zh) - phi(zl)) / sigma;
                (*jac)(i, 2) = -p[0] * (zh * phi(zh) - zl * phi(zl));
            }
        }
    };
    auto chi2_of = [&](const Eigen::VectorXd& model) {
        return (w.array() * (y - model).array().square()).sum();
    };

    Eigen::Vector3d p(m.total, m.mean, std::log(std::max(m.std, std_floor)));
    Eigen::VectorXd model;
    Eigen::MatrixXd jac;
    evaluate(p, model, &jac);
    double chi2 = chi2_of(model);
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < 500 && lambda < 1e12; ++it) {
        const Eigen::MatrixXd jtw = jac.transpose() * w.asDiagonal();
        Eigen::Matrix3d a = jtw * jac;
        const Eigen::Vector3d g = jtw * (y - model);
        a.diagonal() *= (1.0 + lambda);
        const Eigen::Vector3d step = a.ldlt().solve(g);
        Eigen::Vector3d trial = p + step;
        trial[2] = std::max(trial[2], std::log(std_floor));
        Eigen::VectorXd trial_model;
        evaluate(trial, trial_model, nullptr);
        const double trial_chi2 = chi2_of(trial_model);
        if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
            const double rel = (chi2 - trial_chi2) / std::max(chi2, 1e-300);
            p = trial;
            chi2 = trial_chi2;
            evaluate(p, model, &jac);
            lambda = std::max(lambda * 0.1, 1e-12);
            if (rel < 1e-12) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
        }
    }
    if (!converged && lambda >= 1e12)
        converged = true; // no further descent possible from the current point

    out.amplitude = p[0];
    out.mean = p[1];
    out.std = std::max(std::exp(p[2]), std_floor);
    const auto dof = std::max<Eigen::Index>(nb - 3, 1);
    out.reduced_chi2 = chi2 / static_cast<double>(dof);
    out.poor_fit = !converged || out.reduced_chi2 > 4.0;
    return out;
}

//---------------------------------------------------------------------------//
// Lifetime ensemble
//---------------------------------------------------------------------------//

FitResult lifetime_ensemble(const CountIntegral& counts, const EnsembleOptions& opts)
{
    if (opts.start_ms_lo > opts.start_ms_hi || opts.end_ms_lo > opts.end_ms_hi
        || opts.bins_lo > opts.bins_hi || opts.bins_lo < 3 || opts.shifts < 1
        || opts.start_ms_hi >= opts.end_ms_lo)
        throw DomainError("lifetime_ensemble: invalid analysis grid");
    const double in_window = counts(units::ms_to_s(opts.start_ms_lo), units::ms_to_s(opts.end_ms_hi));
    if (in_window < opts.min_events)
        throw DomainError("lifetime_ensemble: only " + std::to_string(in_window)
                          + " events in the analysis window (need "
                          + std::to_string(opts.min_events) + ")");

    struct Member
    {
        int start, end, bins, shift;
    };
    std::vector<Member> members;
    for (int s = opts.start_ms_lo; s <= opts.start_ms_hi; ++s)
        for (int e = opts.end_ms_lo; e <= opts.end_ms_hi; ++e)
            for (int b = opts.bins_lo; b <= opts.bins_hi; ++b)
                for (int k = 0; k < opts.shifts; ++k)
                    members.push_back({s, e, b, k});

    FitResult result;
    result.n_fits = members.size();
    result.gammas.assign(members.size(), std::numeric_limits<double>::quiet_NaN());

    auto fit_member = [&](std::size_t idx) {
        const Member& mb = members[idx];
        const double width = units::ms_to_s(mb.end - mb.start) / mb.bins;
        const double origin = units::ms_to_s(mb.start) + width * mb.shift / opts.shifts;
        std::vector<double> t(static_cast<std::size_t>(mb.bins)), n(t.size());
        for (int j = 0; j < mb.bins; ++j) {
            const double lo = origin + j * width;
            t[static_cast<std::size_t>(j)] = lo + 0.5 * width;
            n[static_cast<std::size_t>(j)] = counts(lo, lo + width);
        }
        try {
            result.gammas[idx] = fit_exponential(t, n, opts.fit).gamma;
        } catch (const Error&) {
            // left as NaN and counted below
        }
    };

    const unsigned jobs = std::max(1u, opts.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < members.size(); ++i)
            fit_member(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                for (std::size_t i = j; i < members.size(); i += jobs)
                    fit_member(i);
            });
        for (auto& th : pool)
            th.join();
    }

    std::vector<double> ok;
    ok.reserve(members.size());
    for (double g : result.gammas)
        if (std::isfinite(g))
            ok.push_back(g);
    result.n_failed = members.size() - ok.size();
    if (ok.empty())
        throw ConvergenceError("lifetime_ensemble: every ensemble fit failed");

    result.histogram = make_histogram(ok, opts.histogram_bins);
    result.gaussian = gaussian_fit(result.histogram);
    result.gamma = result.gaussian.mean;
    result.gamma_sigma = result.gaussian.std;
    if (result.gamma > 0)
        result.tau = 1.0 / result.gamma;
    if (result.gamma + result.gamma_sigma > 0)
        result.tau_low = 1.0 / (result.gamma + result.gamma_sigma);
    if (result.gamma - result.gamma_sigma > 0)
        result.tau_high = 1.0 / (result.gamma - result.gamma_sigma);
    return result;
}

FitResult lifetime_ensemble(const EventStream& stream, const EnsembleOptions& opts)
{
    std::vector<std::uint32_t> dets;
    for (const auto& name : opts.detectors)
        dets.push_back(stream.detector_index(name));
    std::vector<double> times;
    for (const auto& e : stream.events) {
        if (!dets.empty() && std::find(dets.begin(), dets.end(), e.detector) == dets.end())
            continue;
        if (e.e_kev >= opts.band_kev.lo && e.e_kev < opts.band_kev.hi)
            times.push_back(e.t_s);
    }
    std::sort(times.begin(), times.end());
    CountIntegral counts = [&](double t0, double t1) {
        const auto a = std::lower_bound(times.begin(), times.end(), t0);
        const auto b = std::lower_bound(times.begin(), times.end(), t1);
        return static_cast<double>(b - a);
    };
    return lifetime_ensemble(counts, opts);
}

} // namespace narrowline
