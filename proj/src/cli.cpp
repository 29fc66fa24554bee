#include "narrowline/cli.hpp"

#include "narrowline/analysis.hpp"
#include "narrowline/core_data.hpp"
#include "narrowline/errors.hpp"
#include "narrowline/event_sim.hpp"
#include "narrowline/flux.hpp"
#include "narrowline/hyperfine.hpp"
#include "narrowline/nfs.hpp"
#include "narrowline/units.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

namespace narrowline::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kVersion = NARROWLINE_VERSION;
constexpr const char* kCatalogEnv = "NARROWLINE_CATALOG";

/// Bad flag values detected after parsing; reported like CLI11 errors.
struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Helpers
//---------------------------------------------------------------------------//

double parse_number(const std::string& text, const std::string& flag)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos == text.size())
            return v;
    } catch (const std::exception&) {
    }
    throw UsageError(flag + ": '" + text + "' is not a number");
}

/// "lo:hi" -> Range, scaled by `scale`.
Range parse_range(const std::string& text, const std::string& flag, double scale = 1.0)
{
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw UsageError(flag + ": expected lo:hi, got '" + text + "'");
    Range r{parse_number(text.substr(0, colon), flag) * scale,
            parse_number(text.substr(colon + 1), flag) * scale};
    if (!(r.hi > r.lo))
        throw UsageError(flag + ": upper bound must exceed lower bound");
    return r;
}

std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body)
{
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw Error("cannot open '" + tmp.string() + "' for writing");
        body(os);
        os.flush();
        if (!os)
            throw Error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move output into '" + path + "': " + ec.message());
    }
}

/// "out.csv" + "dg500" -> "out_dg500.csv"
std::string suffixed(const std::string& path, const std::string& tag)
{
    fs::path p(path);
    fs::path name = p.stem();
    name += "_" + tag;
    name += p.extension();
    return (p.parent_path() / name).string();
}

std::string compact(double v) { return fmt::format("{:g}", v); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Context
{
    std::string catalog_path;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string command;
    std::uint64_t config_hash = 0;
    std::unique_ptr<Catalog> loaded;

    const Catalog& catalog()
    {
        if (catalog_path.empty())
            return default_catalog();
        if (!loaded)
            loaded = std::make_unique<Catalog>(load_catalog(catalog_path));
        return *loaded;
    }

    json meta() const
    {
        return json{{"tool", "narrowline"},
                    {"version", kVersion},
                    {"command", command},
                    {"seed", seed},
                    {"config_hash", fmt::format("{:016x}", config_hash)},
                    {"catalog", catalog_path.empty() ? "<built-in>" : catalog_path}};
    }
};

void emit(std::ostream& out, const Context& ctx, json result)
{
    json doc{{"meta", ctx.meta()}, {"result", std::move(result)}};
    out << doc.dump(2) << '\n';
}

//---------------------------------------------------------------------------//
// catalog
//---------------------------------------------------------------------------//

struct CatalogArgs
{
    std::string isomer, target, detector, out;
    bool dump = false;
};

json isomer_json(const IsomerSpec& iso)
{
    return json{{"name", iso.name},
                {"E0_keV", iso.energy_kev()},
                {"tau0_s", iso.lifetime_s},
                {"Gamma0_eV", iso.width_ev},
                {"Gamma0_Hz", iso.width_hz},
                {"Q0", iso.quality_factor},
                {"Ig", iso.ground_spin.str()},
                {"Ie", iso.excited_spin.str()},
                {"alphaK", optional_json(iso.alpha_k)},
                {"omegaK", optional_json(iso.omega_k)},
                {"Qratio", optional_json(iso.quadrupole_ratio)}};
}

json target_json(const TargetSpec& t)
{
    json q = nullptr, eta = nullptr;
    if (t.quadrupole) {
        q = json::array({t.quadrupole->coupling_low_mhz, t.quadrupole->coupling_high_mhz});
        eta = json::array({t.quadrupole->eta_low, t.quadrupole->eta_high});
    }
    json j{{"name", t.name},
           {"Le_um", t.absorption_length_um},
           {"N0_cm3", t.number_density_cm3},
           {"L_um", optional_json(t.thickness_um)},
           {"xi", optional_json(t.xi)},
           {"xi_opt", optional_json(t.xi_optimized)},
           {"eQgVzz_MHz", q},
           {"eta", eta},
           {"magnetism", std::string(to_string(t.magnetism))}};
    j["sigma_R_cm2"] = (t.xi && t.thickness_um) ? json(sigma_resonant(t)) : json(nullptr);
    j["sigma_R_opt_cm2"] = t.xi_optimized ? json(sigma_resonant_optimized(t)) : json(nullptr);
    return j;
}

json detector_json(const DetectorModel& d)
{
    return json{{"name", d.name},
                {"energy_sigma_eV", d.energy_sigma_ev},
                {"background_rate_per_keV_1e4s", d.background_rate},
                {"gate_s", json::array({d.gate_open_s, d.gate_close_s})},
                {"energy_range_keV", json::array({d.energy_min_kev, d.energy_max_kev})}};
}

void cmd_catalog(Context& ctx, const CatalogArgs& a, std::ostream& out)
{
    const Catalog& cat = ctx.catalog();
    if (a.dump) {
        const std::string text = serialize_catalog(cat);
        if (a.out.empty())
            out << text;
        else
            write_atomic(a.out, [&](std::ostream& os) { os << text; });
        return;
    }
    json result = json::object();
    if (!a.isomer.empty())
        result["isomer"] = isomer_json(cat.isomer(a.isomer));
    if (!a.target.empty())
        result["target"] = target_json(cat.target(a.target));
    if (!a.detector.empty())
        result["detector"] = detector_json(cat.detector(a.detector));
    if (result.empty()) {
        json isomers = json::array(), targets = json::array(), detectors = json::array();
        for (const auto& i : cat.isomers)
            isomers.push_back(isomer_json(i));
        for (const auto& t : cat.targets)
            targets.push_back(target_json(t));
        for (const auto& d : cat.detectors)
            detectors.push_back(detector_json(d));
        result = json{{"isomers", isomers}, {"targets", targets}, {"detectors", detectors}};
    }
    emit(out, ctx, result);
}

//---------------------------------------------------------------------------//
// flux
//---------------------------------------------------------------------------//

struct FluxArgs
{
    std::string isomer = "45Sc";
    std::string out;
};

void cmd_flux(Context& ctx, const FluxArgs& a, std::ostream& out)
{
    const Catalog& cat = ctx.catalog();
    const auto& beam = cat.beamline;
    const auto& iso = cat.isomer(a.isomer);
    const double sp = spectral_density(beam.pulse_energy_mj, beam.background_energy_mj, beam.bandwidth_ev);
    const double per_pulse = density_to_ph_per_gamma0(sp, iso);
    const auto rows = flux_chain(beam, iso);

    json table = json::array();
    for (const auto& r : rows)
        table.push_back(json{{"element", r.element},
                             {"point", r.point},
                             {"transmission", r.transmission},
                             {"cumulative_transmission", r.cumulative},
                             {"flux_ph_per_gamma0_s", r.flux}});
    json points = json::object();
    for (const auto& r : rows)
        if (!r.point.empty())
            points[r.point] = r.flux;

    if (!a.out.empty())
        write_atomic(a.out, [&](std::ostream& os) {
            os << "element,point,transmission,cumulative_transmission,flux_ph_per_gamma0_s\n";
            for (const auto& r : rows)
                os << fmt::format("{},{},{:.6g},{:.6g},{:.6g}\n", r.element, r.point,
                                  r.transmission, r.cumulative, r.flux);
        });

    emit(out, ctx,
         json{{"isomer", iso.name},
              {"spectral_density_mJ_per_eV", sp},
              {"ph_per_gamma0_per_pulse", per_pulse},
              {"ph_per_gamma0_per_train", per_pulse * beam.pulses_per_train},
              {"points_ph_per_gamma0_s", points},
              {"chain", table}});
}

//---------------------------------------------------------------------------//
// nfs
//---------------------------------------------------------------------------//

struct NfsArgs
{
    std::string isomer = "45Sc";
    std::optional<double> xi;
    std::string target;
    std::vector<double> dgamma{0.0};
    std::vector<std::string> lines;
    double le_ratio = 2.0;
    std::string window = "2:100";
    std::optional<double> flux;
    double t_max = 0.1;
    std::size_t samples = 1u << 16;
    std::size_t every = 1;
    std::string out;
};

double resolve_xi(const Catalog& cat, const std::optional<double>& xi, const std::string& target)
{
    if (xi && !target.empty())
        throw UsageError("--xi and --target are mutually exclusive");
    if (xi)
        return *xi;
    if (!target.empty())
        return optimal_thickness(cat.target(target)).xi;
    throw UsageError("one of --xi or --target is required");
}

double default_flux(const Catalog& cat, const IsomerSpec& iso)
{
    const auto rows = flux_chain(cat.beamline, iso);
    for (const auto& r : rows)
        if (r.point == "NFS target")
            return r.flux;
    return rows.back().flux;
}

LineSet build_lines(const std::vector<std::string>& specs, double xi, double le_ratio)
{
    LineSet ls = LineSet::single(xi, 0.0, le_ratio);
    if (specs.empty())
        return ls;
    ls.lines.clear();
    double total = 0.0;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        ResonanceLine l;
        if (colon == std::string::npos) {
            l.detuning = parse_number(s, "--line");
        } else {
            l.detuning = parse_number(s.substr(0, colon), "--line");
            l.weight = parse_number(s.substr(colon + 1), "--line");
        }
        if (!(l.weight > 0))
            throw UsageError("--line: weights must be positive");
        total += l.weight;
        ls.lines.push_back(l);
    }
    for (auto& l : ls.lines)
        l.weight /= total;
    return ls;
}

void cmd_nfs(Context& ctx, const NfsArgs& a, std::ostream& out)
{
    const Catalog& cat = ctx.catalog();
    const auto& iso = cat.isomer(a.isomer);
    const double xi = resolve_xi(cat, a.xi, a.target);
    const Range window = parse_range(a.window, "--window", 1e-3);
    const double flux = a.flux ? *a.flux : default_flux(cat, iso);
    if (a.every < 1)
        throw UsageError("--every must be >= 1");
    LineSet tmpl = build_lines(a.lines, xi, a.le_ratio);

    const auto signals = window_signal_sweep(tmpl, iso, flux, window.lo, window.hi, a.dgamma, ctx.jobs);

    json rows = json::array();
    for (std::size_t i = 0; i < a.dgamma.size(); ++i) {
        rows.push_back(json{{"dgamma_gamma0", a.dgamma[i]},
                            {"signal_ph_per_s", signals[i]},
                            {"signal_ph_per_1e4s", signals[i] * units::rate_unit_s},
                            {"method", tmpl.is_single_unshifted() ? "exact" : "fft"}});
    }

    json files = json::array();
    if (!a.out.empty()) {
        for (double dg : a.dgamma) {
            LineSet ls = tmpl;
            ls.gamma_total = 1.0 + dg;
            TimeSpectrum ts;
            if (ls.is_single_unshifted()) {
                ts = sample_exact(ls, iso, flux, 0.0, a.t_max, a.samples);
            } else {
                ts = propagate_pulse(ls, PulseGrid{a.t_max, a.samples}, iso, flux);
            }
            const std::string path = a.dgamma.size() == 1 ? a.out : suffixed(a.out, "dg" + compact(dg));
            write_atomic(path, [&](std::ostream& os) {
                os << "t_ms,rate_per_s\n";
                for (std::size_t k = 0; k < ts.t.size(); k += a.every)
                    os << fmt::format("{:.6f},{:.9e}\n", units::s_to_ms(ts.t[k]), ts.rate[k]);
            });
            files.push_back(path);
        }
    }

    json lines = json::array();
    for (const auto& l : tmpl.lines)
        lines.push_back(json{{"detuning_gamma0", l.detuning}, {"weight", l.weight}});
    emit(out, ctx,
         json{{"isomer", iso.name},
              {"xi", xi},
              {"le_ratio", a.le_ratio},
              {"flux_ph_per_gamma0_s", flux},
              {"window_ms", json::array({units::s_to_ms(window.lo), units::s_to_ms(window.hi)})},
              {"lines", lines},
              {"rows", rows},
              {"files", files}});
}

//---------------------------------------------------------------------------//
// hyperfine
//---------------------------------------------------------------------------//

struct HyperfineArgs
{
    std::string isomer = "45Sc";
    std::vector<std::string> targets;
    std::string endpoint = "upper";
    std::vector<double> fields_tesla{50e-6, 30e-9};
    std::optional<double> mu_e;
    std::optional<double> r_angstrom;
    std::string out;
};

void cmd_hyperfine(Context& ctx, const HyperfineArgs& a, std::ostream& out)
{
    const Catalog& cat = ctx.catalog();
    const auto& iso = cat.isomer(a.isomer);
    Endpoint ep;
    if (a.endpoint == "upper")
        ep = Endpoint::upper;
    else if (a.endpoint == "lower")
        ep = Endpoint::lower;
    else
        throw UsageError("--endpoint must be 'upper' or 'lower'");

    std::vector<const TargetSpec*> targets;
    if (a.targets.empty())
        for (const auto& t : cat.targets)
            targets.push_back(&t);
    else
        for (const auto& n : a.targets)
            targets.push_back(&cat.target(n));

    struct Row
    {
        std::string target;
        std::string mechanism;
        std::optional<double> gamma0;
        std::string note;
    };
    std::vector<Row> rows;
    for (const auto* t : targets) {
        try {
            rows.push_back({t->name, "quadrupole", transition_span_gamma0(iso, *t, ep).magnitude, ""});
        } catch (const MissingDataError& e) {
            rows.push_back({t->name, "quadrupole", std::nullopt, "no quadrupole data"});
        }
        const auto mu_e = a.mu_e ? a.mu_e : iso.mu_excited;
        const auto r = a.r_angstrom ? a.r_angstrom : t->dipole_distance_angstrom;
        if (iso.mu_ground && mu_e && r)
            rows.push_back({t->name, "dipole_dipole",
                            dipole_broadening(*iso.mu_ground, *mu_e, *r, iso).magnitude,
                            fmt::format("r = {} A", *r)});
        else
            rows.push_back({t->name, "dipole_dipole", std::nullopt, "moments or distance missing"});
    }
    if (iso.mu_ground)
        for (double b : a.fields_tesla)
            rows.push_back({"", "zeeman",
                            zeeman_splitting(*iso.mu_ground, iso.ground_spin, b, iso).magnitude,
                            fmt::format("B = {} T", compact(b))});

    json table = json::array();
    for (const auto& r : rows) {
        json j{{"target", r.target}, {"mechanism", r.mechanism}};
        if (r.gamma0) {
            j["magnitude_gamma0"] = *r.gamma0;
            j["magnitude_MHz"] = gamma0_to_mhz(*r.gamma0, iso);
            j["magnitude_Hz"] = *r.gamma0 * iso.width_hz;
        } else {
            j["magnitude_gamma0"] = nullptr;
        }
        j["note"] = r.note;
        table.push_back(j);
    }
    if (!a.out.empty())
        write_atomic(a.out, [&](std::ostream& os) {
            os << "target,mechanism,magnitude_gamma0,magnitude_MHz,magnitude_Hz,note\n";
            for (const auto& r : rows) {
                if (r.gamma0)
                    os << fmt::format("{},{},{:.6g},{:.6g},{:.6g},{}\n", r.target, r.mechanism,
                                      *r.gamma0, gamma0_to_mhz(*r.gamma0, iso),
                                      *r.gamma0 * iso.width_hz, r.note);
                else
                    os << fmt::format("{},{},,,,{}\n", r.target, r.mechanism, r.note);
            }
        });
    emit(out, ctx, json{{"isomer", iso.name}, {"endpoint", a.endpoint}, {"rows", table}});
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

struct SimulateArgs
{
    std::string out;
    CalibratedRunTargets targets;
    bool no_pileup = false;
    std::string notch; // t_ms:width_ms:depth
};

json run_config_json(const RunConfig& cfg)
{
    json dets = json::array(), procs = json::array();
    for (const auto& d : cfg.detectors)
        dets.push_back(detector_json(d));
    for (const auto& p : cfg.processes)
        procs.push_back(json{{"detector", p.detector},
                             {"kind", std::string(to_string(p.process.kind))},
                             {"energy_center_keV", p.process.energy_center_kev},
                             {"energy_width_keV", p.process.energy_width_kev},
                             {"rate", p.process.rate},
                             {"decay_tau_s", p.process.decay_tau_s}});
    json notch = nullptr;
    if (cfg.notch)
        notch = json{{"t_center_s", cfg.notch->t_center_s},
                     {"width_s", cfg.notch->width_s},
                     {"depth", cfg.notch->depth}};
    return json{{"duration_s", cfg.duration_s},
                {"rep_rate_Hz", cfg.rep_rate_hz},
                {"pulses", cfg.pulse_count()},
                {"pulses_per_train", cfg.pulses_per_train},
                {"pulse_spacing_s", cfg.pulse_spacing_s},
                {"pileup", cfg.pileup},
                {"notch", notch},
                {"detectors", dets},
                {"processes", procs}};
}

void cmd_simulate(Context& ctx, const SimulateArgs& a, std::ostream& out)
{
    CalibratedRunTargets tg = a.targets;
    tg.pileup = !a.no_pileup;
    RunConfig cfg = calibrated_run_config(ctx.catalog(), ctx.seed, tg);
    if (!a.notch.empty()) {
        std::vector<double> parts;
        std::stringstream ss(a.notch);
        std::string item;
        while (std::getline(ss, item, ':'))
            parts.push_back(parse_number(item, "--notch"));
        if (parts.size() != 3)
            throw UsageError("--notch: expected t_ms:width_ms:depth");
        cfg.notch = Notch{units::ms_to_s(parts[0]), units::ms_to_s(parts[1]), parts[2]};
        validate(cfg);
    }
    const EventStream stream = simulate_run(cfg, ctx.jobs);

    write_atomic(a.out, [&](std::ostream& os) { write_events_csv(os, stream); });
    json sidecar{{"meta", ctx.meta()},
                 {"generator", std::string(generator_name())},
                 {"seed", cfg.seed},
                 {"config", run_config_json(cfg)}};
    const std::string meta_path = a.out + ".meta.json";
    write_atomic(meta_path, [&](std::ostream& os) { os << sidecar.dump(2) << '\n'; });

    emit(out, ctx,
         json{{"events", stream.events.size()},
              {"pulses", cfg.pulse_count()},
              {"file", a.out},
              {"metadata", meta_path}});
}

//---------------------------------------------------------------------------//
// Event-file commands
//---------------------------------------------------------------------------//

EventStream load_events(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error("cannot open event file '" + path + "'");
    return read_events_csv(is, path);
}

/// Live time from the argument, else the simulation sidecar.
double resolve_live_time(double given, const std::string& events_path)
{
    if (given > 0)
        return given;
    std::ifstream is(events_path + ".meta.json");
    if (!is)
        throw UsageError("--live-time is required (no metadata sidecar next to the event file)");
    try {
        const json j = json::parse(is);
        return j.at("config").at("duration_s").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(events_path + ".meta.json: " + e.what());
    }
}

struct BandRateArgs
{
    std::string events;
    std::string band, window;
    double live_time = 0.0;
    std::vector<std::string> detectors;
    std::optional<double> background;
};

void cmd_band_rate(Context& ctx, const BandRateArgs& a, std::ostream& out)
{
    const Range band = parse_range(a.band, "--band");
    const Range window = parse_range(a.window, "--window", 1e-3);
    const EventStream stream = load_events(a.events);
    const double live = resolve_live_time(a.live_time, a.events);
    std::vector<std::uint32_t> dets;
    for (const auto& d : a.detectors)
        dets.push_back(stream.detector_index(d));
    const BandRate r = band_rate(stream.events, band, window, live, dets);
    json result{{"counts", r.counts},
                {"rate_per_keV_1e4s", r.rate},
                {"sigma_per_keV_1e4s", r.sigma},
                {"band_keV", json::array({band.lo, band.hi})},
                {"window_ms", json::array({units::s_to_ms(window.lo), units::s_to_ms(window.hi)})},
                {"live_time_s", live},
                {"detectors", a.detectors}};
    if (a.background)
        result["snr"] = snr(r, *a.background);
    emit(out, ctx, result);
}

struct AlphaKArgs
{
    double r4 = 0, r12 = 0, rb = 0;
    std::optional<double> r4_sigma, r12_sigma;
    double live_time = 9.0e4;
    std::optional<double> omega_k;
    double foil_um = 25.0, l4_um = 27.0, l12_um = 60.0;
    std::string isomer = "45Sc";
};

void cmd_alpha_k(Context& ctx, const AlphaKArgs& a, std::ostream& out)
{
    const auto& iso = ctx.catalog().isomer(a.isomer);
    double omega = 0.0;
    if (a.omega_k)
        omega = *a.omega_k;
    else if (iso.omega_k)
        omega = *iso.omega_k;
    else
        throw UsageError("--omega-k is required for isomer " + iso.name);

    // sigma defaults: Poisson error of a 1 keV band over the live time
    auto as_band = [&](double rate, const std::optional<double>& sigma) {
        BandRate b = band_rate_from_counts(rate * a.live_time / units::rate_unit_s,
                                           Range{0.0, 1.0}, Range{0.0, 1.0}, a.live_time);
        if (sigma)
            b.sigma = *sigma;
        return b;
    };
    if (!(a.r4 >= 0) || !(a.r12 >= 0))
        throw UsageError("--r4 and --r12 must be non-negative");
    const BandRate r4 = as_band(a.r4, a.r4_sigma);
    const BandRate r12 = as_band(a.r12, a.r12_sigma);
    const double y4 = yield_correction(a.l4_um, a.l12_um, a.foil_um);
    const double y12 = yield_correction(a.l12_um, a.l12_um, a.foil_um);
    const auto cc = conversion_coefficient(r4, r12, a.rb, omega, y4, y12);
    emit(out, ctx,
         json{{"alpha_K", cc.alpha_k},
              {"sigma", cc.sigma},
              {"Y4", y4},
              {"Y12", y12},
              {"omega_K", omega},
              {"R4_per_keV_1e4s", json::array({r4.rate, r4.sigma})},
              {"R12_per_keV_1e4s", json::array({r12.rate, r12.sigma})},
              {"RB_per_keV_1e4s", a.rb}});
}

struct FitLifetimeArgs
{
    std::string events;
    std::string band = "3.75:4.75";
    std::vector<std::string> detectors{"Du", "Dd"};
    bool float_background = false;
    std::string hist_out;
};

void cmd_fit_lifetime(Context& ctx, const FitLifetimeArgs& a, std::ostream& out)
{
    const EventStream stream = load_events(a.events);
    EnsembleOptions opts;
    opts.band_kev = parse_range(a.band, "--band");
    opts.detectors = a.detectors;
    opts.fit.float_background = a.float_background;
    opts.jobs = ctx.jobs;
    const FitResult r = lifetime_ensemble(stream, opts);

    if (!a.hist_out.empty())
        write_atomic(a.hist_out, [&](std::ostream& os) {
            os << "gamma_per_s,count\n";
            for (std::size_t i = 0; i < r.histogram.counts.size(); ++i)
                os << fmt::format("{:.9g},{:g}\n", r.histogram.center(i), r.histogram.counts[i]);
        });

    emit(out, ctx,
         json{{"gamma_per_s", r.gamma},
              {"gamma_sigma_per_s", r.gamma_sigma},
              {"tau_s", optional_json(r.tau)},
              {"tau_interval_s", json::array({optional_json(r.tau_low), optional_json(r.tau_high)})},
              {"n_fits", r.n_fits},
              {"n_failed", r.n_failed},
              {"gaussian", json{{"amplitude", r.gaussian.amplitude},
                                {"reduced_chi2", r.gaussian.reduced_chi2},
                                {"degenerate", r.gaussian.degenerate},
                                {"poor_fit", r.gaussian.poor_fit}}},
              {"grid", json{{"start_ms", json::array({opts.start_ms_lo, opts.start_ms_hi})},
                            {"end_ms", json::array({opts.end_ms_lo, opts.end_ms_hi})},
                            {"bins", json::array({opts.bins_lo, opts.bins_hi})},
                            {"shifts", opts.shifts},
                            {"shift_rule", "equal subdivisions of one bin width"},
                            {"float_background", a.float_background}}}});
}

//---------------------------------------------------------------------------//
// detect-limit
//---------------------------------------------------------------------------//

struct DetectLimitArgs
{
    std::string isomer = "45Sc";
    std::optional<double> xi;
    std::string target;
    std::optional<double> flux;
    double threshold = 3.0;
    std::optional<double> background;
    std::string detector = "Dnfs";
    std::string grid = "0:5000:10";
    double energy_window = 1.0;
    double le_ratio = 2.0;
};

void cmd_detect_limit(Context& ctx, const DetectLimitArgs& a, std::ostream& out)
{
    const Catalog& cat = ctx.catalog();
    const auto& iso = cat.isomer(a.isomer);
    const double xi = resolve_xi(cat, a.xi, a.target);
    const double flux = a.flux ? *a.flux : default_flux(cat, iso);
    DetectorModel det = cat.detector(a.detector);
    if (a.background)
        det.background_rate = *a.background;

    std::vector<double> parts;
    {
        std::stringstream ss(a.grid);
        std::string item;
        while (std::getline(ss, item, ':'))
            parts.push_back(parse_number(item, "--grid"));
    }
    if (parts.size() != 3 || !(parts[2] > 0) || !(parts[1] > parts[0]))
        throw UsageError("--grid: expected lo:hi:step with hi > lo and step > 0");
    std::vector<double> grid;
    const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (std::size_t i = 0; i <= n; ++i)
        grid.push_back(parts[0] + static_cast<double>(i) * parts[2]);

    const auto tmpl = LineSet::single(xi, 0.0, a.le_ratio);
    const auto lim = detection_limit_scan(tmpl, flux, det, a.threshold, grid, iso, a.energy_window);
    emit(out, ctx,
         json{{"bound_gamma0", lim.bound},
              {"snr_at_bound", lim.snr_at_bound},
              {"threshold", a.threshold},
              {"background_in_window_per_1e4s", lim.background_in_window},
              {"xi", xi},
              {"flux_ph_per_gamma0_s", flux},
              {"detector", det.name},
              {"gate_ms", json::array({units::s_to_ms(det.gate_open_s), units::s_to_ms(det.gate_close_s)})},
              {"evaluations", lim.evaluations}});
}

} // namespace

//---------------------------------------------------------------------------//

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Simulation and analysis of ultranarrow nuclear resonances", "narrowline"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML/INI file with option defaults; flags take precedence");
    app.require_subcommand(1, 1);
    app.fallthrough();

    Context ctx;
    app.add_option("--catalog", ctx.catalog_path, "catalog YAML file (default: built-in)")
        ->envname(kCatalogEnv);
    app.add_option("--seed", ctx.seed, "random seed for stochastic commands");
    app.add_option("--jobs", ctx.jobs, "worker threads")->check(CLI::Range(1u, 1024u));

    CatalogArgs catalog_args;
    auto* c_cat = app.add_subcommand("catalog", "show catalog rows");
    c_cat->add_option("--isomer", catalog_args.isomer);
    c_cat->add_option("--target", catalog_args.target);
    c_cat->add_option("--detector", catalog_args.detector);
    c_cat->add_flag("--dump", catalog_args.dump, "print the catalog in file form");
    c_cat->add_option("--out", catalog_args.out, "write --dump output here");

    FluxArgs flux_args;
    auto* c_flux = app.add_subcommand("flux", "spectral flux along the beamline");
    c_flux->add_option("--isomer", flux_args.isomer, "isomer")->capture_default_str();
    c_flux->add_option("--out", flux_args.out, "CSV of the transmission chain");

    NfsArgs nfs_args;
    auto* c_nfs = app.add_subcommand("nfs", "delayed NFS response and window integrals");
    c_nfs->add_option("--isomer", nfs_args.isomer)->capture_default_str();
    c_nfs->add_option("--xi", nfs_args.xi, "optical thickness parameter");
    c_nfs->add_option("--target", nfs_args.target, "use the optimal-thickness xi of this target");
    c_nfs->add_option("--dgamma", nfs_args.dgamma, "inhomogeneous broadening, Gamma0 (list)")
        ->delimiter(',')
        ->capture_default_str();
    c_nfs->add_option("--line", nfs_args.lines, "detuning[:weight] in Gamma0 (repeatable)");
    c_nfs->add_option("--le-ratio", nfs_args.le_ratio, "L / L_e")->capture_default_str();
    c_nfs->add_option("--window", nfs_args.window, "integration window lo:hi, ms")->capture_default_str();
    c_nfs->add_option("--flux", nfs_args.flux, "incident flux, ph/Gamma0/s (default: NFS target point)");
    c_nfs->add_option("--t-max", nfs_args.t_max, "time-spectrum extent, s")->capture_default_str();
    c_nfs->add_option("--samples", nfs_args.samples, "time-spectrum intervals")->capture_default_str();
    c_nfs->add_option("--every", nfs_args.every, "write every n-th sample")->capture_default_str();
    c_nfs->add_option("--out", nfs_args.out, "time-spectrum CSV (one per dgamma)");

    HyperfineArgs hf_args;
    auto* c_hf = app.add_subcommand("hyperfine", "broadening estimates per target");
    c_hf->add_option("--isomer", hf_args.isomer)->capture_default_str();
    c_hf->add_option("--target", hf_args.targets, "targets (default: all)")->delimiter(',');
    c_hf->add_option("--endpoint", hf_args.endpoint, "coupling endpoint: upper|lower")
        ->capture_default_str();
    c_hf->add_option("--field", hf_args.fields_tesla, "magnetic fields for Zeeman rows, T")
        ->delimiter(',')
        ->capture_default_str();
    c_hf->add_option("--mu-e", hf_args.mu_e, "excited-state moment, nuclear magnetons");
    c_hf->add_option("--r", hf_args.r_angstrom, "dipole distance, angstrom (overrides catalog)");
    c_hf->add_option("--out", hf_args.out, "CSV table");

    SimulateArgs sim_args;
    auto* c_sim = app.add_subcommand("simulate", "simulate a calibrated event stream");
    c_sim->add_option("--out", sim_args.out, "event CSV")->required();
    c_sim->add_option("--duration", sim_args.targets.duration_s, "beamtime, s")->capture_default_str();
    c_sim->add_option("--tau", sim_args.targets.tau_s, "delayed-line lifetime, s")->capture_default_str();
    c_sim->add_option("--r4", sim_args.targets.r4, "K-band rate, counts/keV/10,000 s")->capture_default_str();
    c_sim->add_option("--r12", sim_args.targets.r12, "elastic-band rate, counts/keV/10,000 s")
        ->capture_default_str();
    c_sim->add_option("--background", sim_args.targets.background,
                      "flat background per detector, counts/keV/10,000 s")
        ->capture_default_str();
    c_sim->add_flag("--no-pileup", sim_args.no_pileup, "ignore decays carried over from earlier pulses");
    c_sim->add_option("--notch", sim_args.notch, "delayed-line notch t_ms:width_ms:depth");

    BandRateArgs br_args;
    auto* c_br = app.add_subcommand("band-rate", "rate in an energy band and time window");
    c_br->add_option("--events", br_args.events, "event CSV")->required();
    c_br->add_option("--band", br_args.band, "energy band lo:hi, keV")->required();
    c_br->add_option("--window", br_args.window, "time window lo:hi, ms")->required();
    c_br->add_option("--live-time", br_args.live_time, "beamtime, s (default: from metadata)");
    c_br->add_option("--detector", br_args.detectors, "detectors to include (default: all)")->delimiter(',');
    c_br->add_option("--background", br_args.background, "background rate for SNR, counts/keV/10,000 s");

    AlphaKArgs ak_args;
    auto* c_ak = app.add_subcommand("alpha-k", "K-conversion coefficient from band rates");
    c_ak->add_option("--r4", ak_args.r4, "K-band rate, counts/keV/10,000 s")->required();
    c_ak->add_option("--r12", ak_args.r12, "elastic-band rate, counts/keV/10,000 s")->required();
    c_ak->add_option("--rb", ak_args.rb, "background per detector, counts/keV/10,000 s")->required();
    c_ak->add_option("--r4-sigma", ak_args.r4_sigma, "uncertainty of --r4");
    c_ak->add_option("--r12-sigma", ak_args.r12_sigma, "uncertainty of --r12");
    c_ak->add_option("--live-time", ak_args.live_time, "beamtime for Poisson sigmas, s")->capture_default_str();
    c_ak->add_option("--omega-k", ak_args.omega_k, "K fluorescence yield (default: catalog)");
    c_ak->add_option("--L", ak_args.foil_um, "foil thickness, um")->capture_default_str();
    c_ak->add_option("--L4", ak_args.l4_um, "attenuation length at 4 keV, um")->capture_default_str();
    c_ak->add_option("--L12", ak_args.l12_um, "attenuation length at 12.4 keV, um")->capture_default_str();
    c_ak->add_option("--isomer", ak_args.isomer)->capture_default_str();

    FitLifetimeArgs fl_args;
    auto* c_fl = app.add_subcommand("fit-lifetime", "ensemble exponential fit of delayed events");
    c_fl->add_option("--events", fl_args.events, "event CSV")->required();
    c_fl->add_option("--band", fl_args.band, "energy band lo:hi, keV")->capture_default_str();
    c_fl->add_option("--detector", fl_args.detectors, "detectors to combine")->delimiter(',')->capture_default_str();
    c_fl->add_flag("--float-background", fl_args.float_background, "fit a constant background term");
    c_fl->add_option("--hist-out", fl_args.hist_out, "CSV histogram of ensemble decay rates");

    DetectLimitArgs dl_args;
    auto* c_dl = app.add_subcommand("detect-limit", "largest broadening with a detectable NFS signal");
    c_dl->add_option("--isomer", dl_args.isomer)->capture_default_str();
    c_dl->add_option("--xi", dl_args.xi, "optical thickness parameter");
    c_dl->add_option("--target", dl_args.target, "use the optimal-thickness xi of this target");
    c_dl->add_option("--flux", dl_args.flux, "incident flux, ph/Gamma0/s (default: NFS target point)");
    c_dl->add_option("--threshold", dl_args.threshold, "SNR threshold")->capture_default_str();
    c_dl->add_option("--background", dl_args.background, "detector background, counts/keV/10,000 s");
    c_dl->add_option("--detector", dl_args.detector, "detector providing gate and background")
        ->capture_default_str();
    c_dl->add_option("--grid", dl_args.grid, "broadening grid lo:hi:step, Gamma0")->capture_default_str();
    c_dl->add_option("--energy-window", dl_args.energy_window, "energy window for background, keV")
        ->capture_default_str();
    c_dl->add_option("--le-ratio", dl_args.le_ratio, "L / L_e")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    ctx.command = sub->get_name();
    {
        // thread count does not change results, so it stays out of the hash
        std::stringstream cfg(app.config_to_str(true, false));
        std::string line, canonical;
        while (std::getline(cfg, line))
            if (line.rfind("jobs", 0) != 0)
                canonical += line + '\n';
        ctx.config_hash = fnv1a(canonical);
    }

    try {
        if (sub == c_cat)
            cmd_catalog(ctx, catalog_args, out);
        else if (sub == c_flux)
            cmd_flux(ctx, flux_args, out);
        else if (sub == c_nfs)
            cmd_nfs(ctx, nfs_args, out);
        else if (sub == c_hf)
            cmd_hyperfine(ctx, hf_args, out);
        else if (sub == c_sim)
            cmd_simulate(ctx, sim_args, out);
        else if (sub == c_br)
            cmd_band_rate(ctx, br_args, out);
        else if (sub == c_ak)
            cmd_alpha_k(ctx, ak_args, out);
        else if (sub == c_fl)
            cmd_fit_lifetime(ctx, fl_args, out);
        else if (sub == c_dl)
            cmd_detect_limit(ctx, dl_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace narrowline::cli
