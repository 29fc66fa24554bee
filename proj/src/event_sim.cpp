#include "narrowline/event_sim.hpp"

#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

namespace narrowline {

namespace {

/// SplitMix64 (Steele, Lea, Flood 2014); one instance per macropulse.
class SplitMix64
{
  public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t state) : state_(state) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()()
    {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }
    static std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
};

std::uint64_t pulse_state(std::uint64_t seed, std::uint64_t pulse_id)
{
    return SplitMix64::mix(SplitMix64::mix(seed) ^ (pulse_id * 0xD1B54A32D192ED03ull + 1));
}

constexpr std::uint64_t kChunkPulses = 4096;

} // namespace

std::string_view to_string(ProcessKind k)
{
    switch (k) {
    case ProcessKind::prompt_compton:
        return "prompt_compton";
    case ProcessKind::delayed_line:
        return "delayed_line";
    case ProcessKind::flat_background:
        return "flat_background";
    }
    return "unknown";
}

ProcessKind parse_process_kind(std::string_view text)
{
    if (text == "prompt_compton")
        return ProcessKind::prompt_compton;
    if (text == "delayed_line")
        return ProcessKind::delayed_line;
    if (text == "flat_background")
        return ProcessKind::flat_background;
    throw ParseError("unknown process kind '" + std::string(text) + "'");
}

std::uint64_t RunConfig::pulse_count() const
{
    return static_cast<std::uint64_t>(std::llround(duration_s * rep_rate_hz));
}

void validate(const RunConfig& cfg)
{
    if (!(cfg.duration_s > 0))
        throw InvariantError("run config: duration must be positive");
    if (!(cfg.rep_rate_hz > 0))
        throw InvariantError("run config: rep_rate must be positive");
    if (cfg.pulses_per_train < 1)
        throw InvariantError("run config: pulses_per_train must be >= 1");
    if (!(cfg.pulse_spacing_s >= 0))
        throw InvariantError("run config: pulse_spacing must be non-negative");
    if (cfg.detectors.empty())
        throw InvariantError("run config: no detectors");
    for (std::size_t i = 0; i < cfg.detectors.size(); ++i) {
        validate(cfg.detectors[i]);
        for (std::size_t j = 0; j < i; ++j)
            if (cfg.detectors[j].name == cfg.detectors[i].name)
                throw InvariantError("run config: duplicate detector " + cfg.detectors[i].name);
    }
    for (const auto& a : cfg.processes) {
        const bool known = std::any_of(cfg.detectors.begin(), cfg.detectors.end(),
                                       [&](const DetectorModel& d) { return d.name == a.detector; });
        if (!known)
            throw InvariantError("run config: process assigned to unknown detector " + a.detector);
        const auto& p = a.process;
        if (!(p.rate >= 0) || !std::isfinite(p.rate))
            throw InvariantError("run config: process rate must be non-negative");
        if (p.kind == ProcessKind::delayed_line && !(p.decay_tau_s > 0))
            throw InvariantError("run config: delayed_line requires decay_tau > 0");
        if (p.kind == ProcessKind::prompt_compton && !(p.energy_width_kev >= 0))
            throw InvariantError("run config: prompt width must be non-negative");
    }
    if (cfg.notch) {
        if (!(cfg.notch->width_s > 0) || !(cfg.notch->depth >= 0 && cfg.notch->depth <= 1))
            throw InvariantError("run config: notch needs width > 0 and depth in [0, 1]");
    }
}

std::uint32_t EventStream::detector_index(std::string_view name) const
{
    for (std::size_t i = 0; i < detectors.size(); ++i)
        if (detectors[i] == name)
            return static_cast<std::uint32_t>(i);
    throw DomainError("event stream has no detector '" + std::string(name) + "'");
}

std::string_view generator_name()
{
    return "splitmix64 per macropulse (state = mix(mix(seed) ^ f(pulse_id))); "
           "boost.random poisson/normal/uniform distributions";
}

double expected_per_pulse(const ProcessSpec& p, const DetectorModel& det, const RunConfig& cfg)
{
    const double per_unit = cfg.period_s() / units::rate_unit_s;
    switch (p.kind) {
    case ProcessKind::flat_background:
        return p.rate * det.energy_span_kev() * per_unit;
    case ProcessKind::delayed_line: {
        const double lambda = p.rate * per_unit;
        // without carry-over only decays inside the first period are seen
        return cfg.pileup ? lambda : lambda * -std::expm1(-cfg.period_s() / p.decay_tau_s);
    }
    case ProcessKind::prompt_compton:
        return p.rate * std::sqrt(units::two_pi) * p.energy_width_kev * per_unit;
    }
    return 0.0;
}

namespace {

struct PreparedProcess
{
    std::uint32_t detector;
    ProcessSpec spec;
    double lambda;
    double smear_kev;     // energy sigma applied to the drawn energy
    double trunc_factor;  // 1 - exp(-P/tau) for delayed lines
};

std::vector<PreparedProcess> prepare(const RunConfig& cfg)
{
    std::vector<PreparedProcess> out;
    for (const auto& a : cfg.processes) {
        std::uint32_t idx = 0;
        while (cfg.detectors[idx].name != a.detector)
            ++idx;
        const auto& det = cfg.detectors[idx];
        PreparedProcess pp{idx, a.process, expected_per_pulse(a.process, det, cfg), 0.0, 1.0};
        switch (a.process.kind) {
        case ProcessKind::delayed_line:
            pp.smear_kev = det.energy_sigma_kev();
            pp.trunc_factor = -std::expm1(-cfg.period_s() / a.process.decay_tau_s);
            break;
        case ProcessKind::prompt_compton:
            pp.smear_kev = std::hypot(a.process.energy_width_kev, det.energy_sigma_kev());
            break;
        case ProcessKind::flat_background:
            break;
        }
        out.push_back(pp);
    }
    return out;
}

bool event_less(const EventRecord& a, const EventRecord& b)
{
    if (a.t_s != b.t_s)
        return a.t_s < b.t_s;
    if (a.detector != b.detector)
        return a.detector < b.detector;
    return a.e_kev < b.e_kev;
}

void simulate_pulse(const RunConfig& cfg, const std::vector<PreparedProcess>& procs,
                    std::uint64_t pulse_id, std::vector<EventRecord>& out)
{
    SplitMix64 rng(pulse_state(cfg.seed, pulse_id));
    boost::random::uniform_01<double> unif;
    boost::random::normal_distribution<double> normal;
    const double period = cfg.period_s();
    const std::size_t first = out.size();

    for (const auto& pp : procs) {
        if (!(pp.lambda > 0))
            continue;
        const auto& det = cfg.detectors[pp.detector];
        boost::random::poisson_distribution<long, double> poisson(pp.lambda);
        const long n = poisson(rng);
        for (long i = 0; i < n; ++i) {
            double t = 0.0, e = 0.0;
            bool keep = true;
            switch (pp.spec.kind) {
            case ProcessKind::flat_background:
                t = unif(rng) * period;
                e = det.energy_min_kev + unif(rng) * det.energy_span_kev();
                break;
            case ProcessKind::delayed_line: {
                // steady state: decays of all earlier pulses fold onto the
                // same truncated exponential shape within one period
                const double u = unif(rng);
                t = -pp.spec.decay_tau_s * std::log1p(-u * pp.trunc_factor);
                e = pp.spec.energy_center_kev + pp.smear_kev * normal(rng);
                const double v = unif(rng);
                if (cfg.notch) {
                    const auto& nt = *cfg.notch;
                    if (std::abs(t - nt.t_center_s) <= 0.5 * nt.width_s && v < nt.depth)
                        keep = false;
                }
                break;
            }
            case ProcessKind::prompt_compton: {
                boost::random::uniform_int_distribution<int> slot(0, cfg.pulses_per_train - 1);
                t = slot(rng) * cfg.pulse_spacing_s;
                e = pp.spec.energy_center_kev + pp.smear_kev * normal(rng);
                break;
            }
            }
            if (!keep || t < det.gate_open_s || t > det.gate_close_s || e < det.energy_min_kev
                || e > det.energy_max_kev)
                continue;
            out.push_back({pulse_id, pp.detector, t, e});
        }
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(), event_less);
}

} // namespace

EventStream simulate_run(const RunConfig& cfg, unsigned jobs)
{
    validate(cfg);
    const auto procs = prepare(cfg);
    const std::uint64_t n_pulses = cfg.pulse_count();
    const std::uint64_t n_chunks = (n_pulses + kChunkPulses - 1) / kChunkPulses;

    std::vector<std::vector<EventRecord>> chunks(n_chunks);
    auto run_chunk = [&](std::uint64_t c) {
        const std::uint64_t begin = c * kChunkPulses;
        const std::uint64_t end = std::min(n_pulses, begin + kChunkPulses);
        auto& out = chunks[c];
        for (std::uint64_t p = begin; p < end; ++p)
            simulate_pulse(cfg, procs, p, out);
    };

    jobs = std::max(1u, jobs);
    if (jobs == 1 || n_chunks < 2) {
        for (std::uint64_t c = 0; c < n_chunks; ++c)
            run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(jobs);
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                try {
                    for (std::uint64_t c = j; c < n_chunks; c += jobs)
                        run_chunk(c);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            });
        for (auto& th : pool)
            th.join();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    EventStream stream;
    for (const auto& d : cfg.detectors)
        stream.detectors.push_back(d.name);
    std::size_t total = 0;
    for (const auto& c : chunks)
        total += c.size();
    stream.events.reserve(total);
    for (auto& c : chunks)
        stream.events.insert(stream.events.end(), c.begin(), c.end());
    return stream;
}

std::vector<EventRecord> gate_events(std::span<const EventRecord> events, const DetectorModel& det)
{
    std::vector<EventRecord> out;
    for (const auto& e : events)
        if (e.t_s >= det.gate_open_s && e.t_s <= det.gate_close_s)
            out.push_back(e);
    return out;
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

void write_events_csv(std::ostream& os, const EventStream& stream)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "pulse_id,detector,t_ms,E_keV\n");
    for (const auto& e : stream.events) {
        fmt::format_to(std::back_inserter(buf), "{},{},{:.3f},{:.3f}\n", e.pulse_id,
                       stream.detectors.at(e.detector), units::s_to_ms(e.t_s), e.e_kev);
        if (buf.size() > (1u << 20)) {
            os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

namespace {

template <class T>
T parse_field(std::string_view s, std::string_view source, std::size_t line, const char* what)
{
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError(fmt::format("{}:{}: invalid {} '{}'", source, line, what, s));
    return value;
}

} // namespace

EventStream read_events_csv(std::istream& is, std::string_view source)
{
    EventStream stream;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line))
        throw ParseError(fmt::format("{}: empty event file", source));
    ++lineno;
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "pulse_id,detector,t_ms,E_keV")
        throw ParseError(fmt::format("{}:1: expected header pulse_id,detector,t_ms,E_keV", source));

    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::string_view fields[4];
        std::string_view rest = line;
        for (int i = 0; i < 4; ++i) {
            const auto comma = rest.find(',');
            if ((comma == std::string_view::npos) != (i == 3))
                throw ParseError(fmt::format("{}:{}: expected 4 fields", source, lineno));
            fields[i] = rest.substr(0, comma);
            if (comma != std::string_view::npos)
                rest.remove_prefix(comma + 1);
        }
        EventRecord ev;
        ev.pulse_id = parse_field<std::uint64_t>(fields[0], source, lineno, "pulse_id");
        auto it = std::find(stream.detectors.begin(), stream.detectors.end(), fields[1]);
        if (it == stream.detectors.end()) {
            if (fields[1].empty())
                throw ParseError(fmt::format("{}:{}: empty detector name", source, lineno));
            stream.detectors.emplace_back(fields[1]);
            it = stream.detectors.end() - 1;
        }
        ev.detector = static_cast<std::uint32_t>(it - stream.detectors.begin());
        ev.t_s = units::ms_to_s(parse_field<double>(fields[2], source, lineno, "t_ms"));
        ev.e_kev = parse_field<double>(fields[3], source, lineno, "E_keV");
        stream.events.push_back(ev);
    }
    return stream;
}

//---------------------------------------------------------------------------//
// Calibrated run
//---------------------------------------------------------------------------//

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double band_fraction(double center, double sigma, double lo, double hi)
{
    return normal_cdf((hi - center) / sigma) - normal_cdf((lo - center) / sigma);
}

} // namespace

RunConfig calibrated_run_config(const Catalog& catalog, std::uint64_t seed, const CalibratedRunTargets& tg)
{
    const auto& beam = catalog.beamline;
    const auto& isomer = catalog.isomer("45Sc");
    DetectorModel du = catalog.detector("Du");
    DetectorModel dd = catalog.detector("Dd");
    for (auto* d : {&du, &dd})
        d->background_rate = tg.background;

    RunConfig cfg;
    cfg.duration_s = tg.duration_s;
    cfg.rep_rate_hz = beam.rep_rate_hz;
    cfg.pulses_per_train = beam.pulses_per_train;
    cfg.pulse_spacing_s = beam.pulse_spacing_s;
    cfg.detectors = {du, dd};
    cfg.seed = seed;
    cfg.pileup = tg.pileup;

    const double period = cfg.period_s();
    const double tau = tg.tau_s;
    // fraction of one detector's delayed-line counts falling in the window
    double f_win = (std::exp(-tg.window_lo_s / tau) - std::exp(-tg.window_hi_s / tau));
    if (tg.pileup)
        f_win /= -std::expm1(-period / tau);
    const double window_frac = (tg.window_hi_s - tg.window_lo_s) / period;
    const double sigma = du.energy_sigma_kev();

    auto line_total = [&](double target, double lo, double hi, double f_band) {
        const double width = hi - lo;
        const double bg = 2.0 * tg.background * window_frac * width;
        const double needed = target * width - bg;
        if (!(needed > 0))
            throw DomainError("calibrated_run_config: target band rate is below the background");
        return needed / (f_band * f_win);
    };

    const double f4 = tg.k_alpha_fraction * band_fraction(tg.k_alpha_kev, sigma, tg.band4_lo_kev, tg.band4_hi_kev)
                      + (1.0 - tg.k_alpha_fraction)
                            * band_fraction(tg.k_beta_kev, sigma, tg.band4_lo_kev, tg.band4_hi_kev);
    const double k_total = line_total(tg.r4, tg.band4_lo_kev, tg.band4_hi_kev, f4);
    const double f12 = band_fraction(isomer.energy_kev(), sigma, tg.band12_lo_kev, tg.band12_hi_kev);
    const double e_total = line_total(tg.r12, tg.band12_lo_kev, tg.band12_hi_kev, f12);

    for (const auto* d : {&du, &dd}) {
        auto add = [&](ProcessSpec p) { cfg.processes.push_back({d->name, p}); };
        add({ProcessKind::flat_background, 0.0, 0.0, tg.background, 0.0});
        add({ProcessKind::prompt_compton, tg.prompt_center_kev, tg.prompt_width_kev, tg.prompt_density, 0.0});
        add({ProcessKind::delayed_line, tg.k_alpha_kev, 0.0, 0.5 * k_total * tg.k_alpha_fraction, tau});
        add({ProcessKind::delayed_line, tg.k_beta_kev, 0.0, 0.5 * k_total * (1.0 - tg.k_alpha_fraction), tau});
        add({ProcessKind::delayed_line, isomer.energy_kev(), 0.0, 0.5 * e_total, tau});
    }
    validate(cfg);
    return cfg;
}

} // namespace narrowline
