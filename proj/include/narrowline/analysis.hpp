#pragma once

// Statistics over event streams: band rates, signal-to-noise, the
// yield-corrected K-conversion coefficient and the ensemble lifetime fit.

#include "narrowline/event_sim.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace narrowline {

struct Range
{
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
};

/// Rate in counts / keV / 10,000 s.
struct BandRate
{
    double rate = 0.0;
    double sigma = 0.0;
    Range band_kev;
    Range window_s;
    double live_time_s = 0.0;
    std::size_t counts = 0;
};

/// Counts with band.lo <= E < band.hi and window.lo <= t < window.hi,
/// optionally restricted to a subset of detectors (empty = all).
BandRate band_rate(std::span<const EventRecord> events, Range band_kev, Range window_s,
                   double live_time_s, std::span<const std::uint32_t> detectors = {});

/// Band rate from a count total, with Poisson sigma.
BandRate band_rate_from_counts(double counts, Range band_kev, Range window_s, double live_time_s);

double snr(double signal_rate, double background_rate);
double snr(const BandRate& signal, double background_rate);

/// Fraction of fluorescence at attenuation length `le_um` escaping a foil
/// of thickness `l_um` into detectors on both sides, with `l12_um` the
/// attenuation length of the exciting 12.4 keV radiation.
double yield_correction(double le_um, double l12_um, double l_um);

struct ConversionCoefficient
{
    double alpha_k = 0.0;
    double sigma = 0.0;
};

/// alpha_K = [(R4 - 2RB) / (R12 - 2RB)] (1/omega_K) (Y12/Y4).
ConversionCoefficient conversion_coefficient(const BandRate& r4, const BandRate& r12,
                                             double rb, double omega_k, double y4, double y12);

struct ExpFitOptions
{
    bool float_background = false;
    int max_iterations = 200;
};

/// Poisson maximum-likelihood fit of counts_i ~ A exp(-gamma t_i) [+ B].
struct ExpFit
{
    double gamma = 0.0;
    double gamma_sigma = 0.0;
    double amplitude = 0.0;          // A at t = 0
    double amplitude_sigma = 0.0;
    double background = 0.0;         // per bin, when floated
    double background_sigma = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
};

ExpFit fit_exponential(std::span<const double> t, std::span<const double> counts,
                       const ExpFitOptions& opts = {});

struct Histogram
{
    double lo = 0.0;
    double bin_width = 1.0;
    std::vector<double> counts;

    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width; }
    double total() const;
};

/// Equal-width histogram spanning the sample range.
Histogram make_histogram(std::span<const double> values, std::size_t bins);

struct GaussianFit
{
    double amplitude = 0.0; // total counts under the curve
    double mean = 0.0;
    double std = 0.0;
    double reduced_chi2 = 0.0;
    bool degenerate = false; // too few occupied bins; moments used instead
    bool poor_fit = false;
};

/// Least-squares fit of binned Gaussian probabilities (Levenberg-Marquardt).
GaussianFit gaussian_fit(const Histogram& h);

struct EnsembleOptions
{
    Range band_kev{3.75, 4.75};
    std::vector<std::string> detectors{"Du", "Dd"}; // empty = all
    int start_ms_lo = 30, start_ms_hi = 40;
    int end_ms_lo = 88, end_ms_hi = 90;
    int bins_lo = 40, bins_hi = 100;
    int shifts = 10; // grid offsets k * width / shifts, k = 0 .. shifts-1
    std::size_t histogram_bins = 60;
    double min_events = 10;
    ExpFitOptions fit;
    unsigned jobs = 1;
};

struct FitResult
{
    double gamma = 0.0;       // Gaussian mean of the ensemble, 1/s
    double gamma_sigma = 0.0; // Gaussian std
    std::optional<double> tau;      // 1/gamma when gamma > 0
    std::optional<double> tau_low;  // 1/(gamma + sigma)
    std::optional<double> tau_high; // 1/(gamma - sigma); absent = unbounded
    std::size_t n_fits = 0;
    std::size_t n_failed = 0;
    std::vector<double> gammas; // per member, enumeration order; NaN if failed
    Histogram histogram;
    GaussianFit gaussian;
};

/// Counts in [t0, t1) seconds; lets the ensemble run on events or on an
/// analytic rate.
using CountIntegral = std::function<double(double t0, double t1)>;

FitResult lifetime_ensemble(const EventStream& stream, const EnsembleOptions& opts = {});
FitResult lifetime_ensemble(const CountIntegral& counts, const EnsembleOptions& opts = {});

} // namespace narrowline
