#include "narrowline/core_data.hpp"

#include "narrowline/errors.hpp"
#include "narrowline/units.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace narrowline {

//---------------------------------------------------------------------------//
// Spin
//---------------------------------------------------------------------------//

Spin Spin::parse(std::string_view text)
{
    auto parse_int = [&](std::string_view s) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw ParseError("invalid spin '" + std::string(text) + "'");
        return value;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos)
        return Spin(2 * parse_int(text));
    if (parse_int(text.substr(slash + 1)) != 2)
        throw ParseError("spin '" + std::string(text) + "' is not a multiple of 1/2");
    const int twice = parse_int(text.substr(0, slash));
    if (twice < 0)
        throw ParseError("negative spin '" + std::string(text) + "'");
    return Spin(twice);
}

std::string Spin::str() const
{
    if (twice_ % 2 == 0)
        return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
}

//---------------------------------------------------------------------------//
// Records
//---------------------------------------------------------------------------//

double IsomerSpec::energy_kev() const { return units::ev_to_kev(energy_ev); }

IsomerSpec make_isomer(std::string name, double energy_kev, double lifetime_s,
                       Spin ground, Spin excited)
{
    IsomerSpec iso;
    iso.name = std::move(name);
    iso.energy_ev = units::kev_to_ev(energy_kev);
    iso.lifetime_s = lifetime_s;
    iso.width_ev = units::hbar_ev_s / lifetime_s;
    iso.width_hz = units::ev_to_hz(iso.width_ev);
    iso.quality_factor = iso.energy_ev / iso.width_ev;
    iso.ground_spin = ground;
    iso.excited_spin = excited;
    return iso;
}

std::string_view to_string(Magnetism m)
{
    return m == Magnetism::paramagnetic ? "paramagnetic" : "diamagnetic";
}

Magnetism parse_magnetism(std::string_view text)
{
    if (text == "diamagnetic")
        return Magnetism::diamagnetic;
    if (text == "paramagnetic")
        return Magnetism::paramagnetic;
    throw ParseError("unknown magnetism '" + std::string(text) + "'");
}

std::vector<double> BeamlineSpec::transmissions() const
{
    std::vector<double> out;
    out.reserve(elements.size());
    for (const auto& e : elements)
        out.push_back(e.transmission);
    return out;
}

double DetectorModel::energy_sigma_kev() const { return units::ev_to_kev(energy_sigma_ev); }

namespace {

[[noreturn]] void violation(const std::string& record, const std::string& field,
                            const std::string& what)
{
    throw InvariantError(record + ": field '" + field + "' " + what);
}

bool rel_close(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

} // namespace

void validate(const IsomerSpec& iso)
{
    const std::string rec = "isomer " + iso.name;
    if (!(iso.energy_ev > 0))
        violation(rec, "E0_keV", "must be positive");
    if (!(iso.lifetime_s > 0))
        violation(rec, "tau0_s", "must be positive");
    if (!rel_close(iso.width_ev, units::hbar_ev_s / iso.lifetime_s, 1e-6))
        violation(rec, "Gamma0_eV", "differs from hbar/tau0");
    if (!rel_close(iso.quality_factor, iso.energy_ev / iso.width_ev, 1e-6))
        violation(rec, "Q0", "differs from E0/Gamma0");
    if (!rel_close(iso.width_hz, units::ev_to_hz(iso.width_ev), 1e-6))
        violation(rec, "Gamma0_Hz", "differs from Gamma0/(2 pi hbar)");
    if (iso.omega_k && !(*iso.omega_k > 0 && *iso.omega_k <= 1))
        violation(rec, "omegaK", "must lie in (0, 1]");
    if (iso.alpha_k && *iso.alpha_k < 0)
        violation(rec, "alphaK", "must be non-negative");
}

void validate(const TargetSpec& t)
{
    const std::string rec = "target " + t.name;
    if (!(t.absorption_length_um > 0))
        violation(rec, "Le_um", "must be positive");
    if (!(t.number_density_cm3 > 0))
        violation(rec, "N0_cm3", "must be positive");
    if (t.thickness_um && !(*t.thickness_um > 0))
        violation(rec, "L_um", "must be positive");
    if (t.xi && *t.xi < 0)
        violation(rec, "xi", "must be non-negative");
    if (t.xi_optimized && *t.xi_optimized < 0)
        violation(rec, "xi_opt", "must be non-negative");
    if (t.quadrupole) {
        const auto& q = *t.quadrupole;
        if (q.coupling_low_mhz > q.coupling_high_mhz)
            violation(rec, "eQgVzz_MHz", "range is reversed");
        for (double eta : {q.eta_low, q.eta_high})
            if (!(eta >= 0 && eta <= 1))
                violation(rec, "eta", "must lie in [0, 1]");
    }
    if (t.dipole_distance_angstrom && !(*t.dipole_distance_angstrom > 0))
        violation(rec, "dipole_r_A", "must be positive");
}

void validate(const BeamlineSpec& b)
{
    if (b.pulses_per_train < 1)
        violation("beamline", "np", "must be at least 1");
    if (!(b.background_energy_mj >= 0))
        violation("beamline", "Ebg_mJ", "must be non-negative");
    if (!(b.pulse_energy_mj > b.background_energy_mj))
        violation("beamline", "Ep_mJ", "must exceed Ebg_mJ");
    if (!(b.bandwidth_ev > 0))
        violation("beamline", "dEp_eV", "must be positive");
    if (!(b.rep_rate_hz > 0))
        violation("beamline", "rep_rate_Hz", "must be positive");
    for (const auto& e : b.elements)
        if (!(e.transmission > 0 && e.transmission <= 1))
            violation("beamline", "elements[" + e.name + "].transmission",
                      "must lie in (0, 1]");
}

void validate(const DetectorModel& d)
{
    const std::string rec = "detector " + d.name;
    if (!(d.energy_sigma_ev > 0))
        violation(rec, "energy_sigma_eV", "must be positive");
    if (!(d.gate_open_s < d.gate_close_s))
        violation(rec, "gate_open_s", "must be earlier than gate_close_s");
    if (!(d.background_rate >= 0))
        violation(rec, "background_rate", "must be non-negative");
    if (!(d.energy_min_kev < d.energy_max_kev))
        violation(rec, "energy_range_keV", "must be increasing");
}

//---------------------------------------------------------------------------//
// Cross-section
//---------------------------------------------------------------------------//

double sigma_resonant(const TargetSpec& t)
{
    if (!t.xi || !t.thickness_um)
        throw MissingDataError("target " + t.name + " has no tabulated L and xi");
    if (!(t.number_density_cm3 > 0) || !(*t.thickness_um > 0) || *t.xi < 0)
        throw DomainError("target " + t.name + ": xi, N0 and L must be positive");
    return 4.0 * *t.xi / (t.number_density_cm3 * units::um_to_cm(*t.thickness_um));
}

double sigma_resonant_optimized(const TargetSpec& t)
{
    if (!t.xi_optimized)
        throw MissingDataError("target " + t.name + " has no optimized xi");
    if (!(t.number_density_cm3 > 0) || !(t.absorption_length_um > 0))
        throw DomainError("target " + t.name + ": N0 and Le must be positive");
    return 2.0 * *t.xi_optimized / (t.number_density_cm3 * units::um_to_cm(t.absorption_length_um));
}

void check_cross_section_consistency(const std::vector<TargetSpec>& targets, double rel_tol)
{
    std::vector<std::pair<std::string, double>> sigmas;
    for (const auto& t : targets) {
        std::optional<double> s_xi, s_opt;
        if (t.xi && t.thickness_um && *t.xi > 0)
            s_xi = sigma_resonant(t);
        if (t.xi_optimized && *t.xi_optimized > 0)
            s_opt = sigma_resonant_optimized(t);
        if (s_xi && s_opt && !rel_close(*s_xi, *s_opt, rel_tol))
            violation("target " + t.name, "xi_opt", "implies a cross-section inconsistent with the xi row");
        if (s_xi)
            sigmas.emplace_back(t.name, *s_xi);
        else if (s_opt)
            sigmas.emplace_back(t.name, *s_opt);
    }
    if (sigmas.size() < 2)
        return;
    std::vector<double> values;
    for (const auto& [name, s] : sigmas)
        values.push_back(s);
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    const double median = values[values.size() / 2];
    for (const auto& [name, s] : sigmas)
        if (!rel_close(s, median, rel_tol))
            violation("target " + name, "xi", "implies a cross-section inconsistent with the other targets");
}

//---------------------------------------------------------------------------//
// Catalog lookup
//---------------------------------------------------------------------------//

namespace {

template<class T>
const T& find_named(const std::vector<T>& items, std::string_view name, const char* kind)
{
    auto it = std::find_if(items.begin(), items.end(),
                           [&](const T& x) { return x.name == name; });
    if (it == items.end())
        throw DomainError(std::string("no ") + kind + " named '" + std::string(name) + "' in catalog");
    return *it;
}

} // namespace

const IsomerSpec& Catalog::isomer(std::string_view name) const
{
    return find_named(isomers, name, "isomer");
}

const TargetSpec& Catalog::target(std::string_view name) const
{
    return find_named(targets, name, "target");
}

const DetectorModel& Catalog::detector(std::string_view name) const
{
    return find_named(detectors, name, "detector");
}

//---------------------------------------------------------------------------//
// YAML reading
//---------------------------------------------------------------------------//

namespace {

class Reader
{
  public:
    explicit Reader(std::string_view source) : source_(source) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& key,
                           const std::string& what) const
    {
        std::ostringstream os;
        os << source_;
        if (at.IsDefined() && at.Mark().line >= 0)
            os << ":" << at.Mark().line + 1;
        os << ": key '" << key << "': " << what;
        throw ParseError(os.str());
    }

    const YAML::Node& require_map(const YAML::Node& node, const std::string& ctx) const
    {
        if (!node.IsMap())
            fail(node, ctx, "expected a mapping");
        return node;
    }

    double number(const YAML::Node& parent, const std::string& key, const std::string& ctx) const
    {
        auto v = optional_number(parent, key, ctx);
        if (!v)
            fail(parent, ctx + "." + key, "missing required value");
        return *v;
    }

    std::optional<double> optional_number(const YAML::Node& parent, const std::string& key,
                                          const std::string& ctx) const
    {
        const YAML::Node node = parent[key];
        if (!node.IsDefined() || node.IsNull())
            return std::nullopt;
        if (!node.IsScalar())
            fail(node, ctx + "." + key, "expected a number");
        return to_double(node, ctx + "." + key);
    }

    double to_double(const YAML::Node& node, const std::string& key) const
    {
        const std::string& s = node.Scalar();
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size())
                fail(node, key, "trailing characters in number '" + s + "'");
            return v;
        } catch (const std::logic_error&) {
            fail(node, key, "not a number: '" + s + "'");
        }
    }

    std::string text(const YAML::Node& parent, const std::string& key, const std::string& ctx) const
    {
        const YAML::Node node = parent[key];
        if (!node.IsDefined() || node.IsNull())
            fail(parent, ctx + "." + key, "missing required value");
        if (!node.IsScalar())
            fail(node, ctx + "." + key, "expected text");
        return node.Scalar();
    }

    std::optional<std::pair<double, double>> optional_pair(const YAML::Node& parent,
                                                           const std::string& key,
                                                           const std::string& ctx) const
    {
        const YAML::Node node = parent[key];
        if (!node.IsDefined() || node.IsNull())
            return std::nullopt;
        if (node.IsScalar()) {
            double v = to_double(node, ctx + "." + key);
            return std::make_pair(v, v);
        }
        if (!node.IsSequence() || node.size() != 2)
            fail(node, ctx + "." + key, "expected a number or a [low, high] pair");
        return std::make_pair(to_double(node[0], ctx + "." + key),
                              to_double(node[1], ctx + "." + key));
    }

    template<class F>
    auto guarded(const YAML::Node& node, const std::string& key, F&& f) const
    {
        try {
            return f();
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            fail(node, key, e.what());
        }
    }

  private:
    std::string source_;
};

void check_derived(const Reader& r, const YAML::Node& node, const std::string& key,
                   const std::string& ctx, double derived)
{
    auto stated = r.optional_number(node, key, ctx);
    if (stated && !rel_close(*stated, derived, 1e-6))
        throw InvariantError("isomer " + ctx + ": field '" + key + "' disagrees with the value derived from tau0_s");
}

IsomerSpec read_isomer(const Reader& r, const YAML::Node& node)
{
    r.require_map(node, "isomers[]");
    const std::string name = r.text(node, "name", "isomer");
    auto spin = [&](const char* key) {
        return r.guarded(node, name + "." + key,
                         [&] { return Spin::parse(r.text(node, key, name)); });
    };
    // E0 may be given in keV (tables) or eV (serialized catalogs, exact round trip).
    const auto e0_ev = r.optional_number(node, "E0_eV", name);
    const double e0_kev = e0_ev ? units::ev_to_kev(*e0_ev) : r.number(node, "E0_keV", name);
    IsomerSpec iso = make_isomer(name, e0_kev, r.number(node, "tau0_s", name), spin("Ig"), spin("Ie"));
    if (e0_ev)
        iso.energy_ev = *e0_ev;
    iso.quality_factor = iso.energy_ev / iso.width_ev;
    check_derived(r, node, "Gamma0_eV", name, iso.width_ev);
    check_derived(r, node, "Gamma0_Hz", name, iso.width_hz);
    check_derived(r, node, "Q0", name, iso.quality_factor);
    iso.alpha_k = r.optional_number(node, "alphaK", name);
    iso.omega_k = r.optional_number(node, "omegaK", name);
    iso.quadrupole_ratio = r.optional_number(node, "Qratio", name);
    iso.mu_ground = r.optional_number(node, "mu_g", name);
    iso.mu_excited = r.optional_number(node, "mu_e", name);
    return iso;
}

TargetSpec read_target(const Reader& r, const YAML::Node& node)
{
    r.require_map(node, "targets[]");
    TargetSpec t;
    t.name = r.text(node, "name", "target");
    t.absorption_length_um = r.number(node, "Le_um", t.name);
    t.number_density_cm3 = r.number(node, "N0_cm3", t.name);
    t.thickness_um = r.optional_number(node, "L_um", t.name);
    t.xi = r.optional_number(node, "xi", t.name);
    t.xi_optimized = r.optional_number(node, "xi_opt", t.name);
    auto coupling = r.optional_pair(node, "eQgVzz_MHz", t.name);
    auto eta = r.optional_pair(node, "eta", t.name);
    if (coupling) {
        QuadrupoleData q;
        q.coupling_low_mhz = coupling->first;
        q.coupling_high_mhz = coupling->second;
        if (eta) {
            q.eta_low = eta->first;
            q.eta_high = eta->second;
        }
        t.quadrupole = q;
    }
    t.magnetism = r.guarded(node, t.name + ".magnetism", [&] {
        return parse_magnetism(r.text(node, "magnetism", t.name));
    });
    t.mass_density_g_cm3 = r.optional_number(node, "density_g_cm3", t.name);
    t.dipole_distance_angstrom = r.optional_number(node, "dipole_r_A", t.name);
    return t;
}

BeamlineSpec read_beamline(const Reader& r, const YAML::Node& node)
{
    r.require_map(node, "beamline");
    const std::string ctx = "beamline";
    BeamlineSpec b;
    b.pulse_energy_mj = r.number(node, "Ep_mJ", ctx);
    b.background_energy_mj = r.number(node, "Ebg_mJ", ctx);
    b.bandwidth_ev = r.number(node, "dEp_eV", ctx);
    const double np = r.number(node, "np", ctx);
    if (np != std::floor(np))
        r.fail(node["np"], "beamline.np", "must be an integer");
    b.pulses_per_train = static_cast<int>(np);
    b.pulse_spacing_s = r.number(node, "pulse_spacing_s", ctx);
    b.train_duration_s = r.number(node, "train_duration_s", ctx);
    b.rep_rate_hz = r.number(node, "rep_rate_Hz", ctx);
    const YAML::Node elements = node["elements"];
    if (elements.IsDefined() && !elements.IsNull()) {
        if (!elements.IsSequence())
            r.fail(elements, "beamline.elements", "expected a list");
        for (const auto& e : elements) {
            r.require_map(e, "beamline.elements[]");
            TransmissionElement el;
            el.name = r.text(e, "name", "element");
            el.transmission = r.number(e, "transmission", "elements." + el.name);
            if (e["point"].IsDefined() && !e["point"].IsNull())
                el.point = r.text(e, "point", "elements." + el.name);
            b.elements.push_back(std::move(el));
        }
    }
    return b;
}

DetectorModel read_detector(const Reader& r, const YAML::Node& node)
{
    r.require_map(node, "detectors[]");
    DetectorModel d;
    d.name = r.text(node, "name", "detector");
    d.energy_sigma_ev = r.number(node, "energy_sigma_eV", d.name);
    d.background_rate = r.number(node, "background_rate", d.name);
    d.gate_open_s = r.number(node, "gate_open_s", d.name);
    d.gate_close_s = r.number(node, "gate_close_s", d.name);
    auto range = r.optional_pair(node, "energy_range_keV", d.name);
    if (!range)
        r.fail(node, d.name + ".energy_range_keV", "missing required value");
    d.energy_min_kev = range->first;
    d.energy_max_kev = range->second;
    return d;
}

template<class T, class F>
std::vector<T> read_list(const Reader& r, const YAML::Node& root, const char* key, F&& read_one)
{
    std::vector<T> out;
    const YAML::Node list = root[key];
    if (!list.IsDefined() || list.IsNull())
        return out;
    if (!list.IsSequence())
        r.fail(list, key, "expected a list");
    for (const auto& item : list)
        out.push_back(read_one(r, item));
    return out;
}

template<class T>
void check_unique(const std::vector<T>& items, const char* kind)
{
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j)
            if (items[i].name == items[j].name)
                throw InvariantError(std::string("duplicate ") + kind + " name '" + items[i].name + "'");
}

} // namespace

Catalog parse_catalog(std::string_view text, std::string_view source)
{
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        std::ostringstream os;
        os << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
        throw ParseError(os.str());
    }
    Reader r(source);
    if (!root.IsMap())
        throw ParseError(std::string(source) + ": catalog root must be a mapping");

    Catalog c;
    c.isomers = read_list<IsomerSpec>(r, root, "isomers", read_isomer);
    c.targets = read_list<TargetSpec>(r, root, "targets", read_target);
    if (!root["beamline"].IsDefined())
        r.fail(root, "beamline", "missing required section");
    c.beamline = read_beamline(r, root["beamline"]);
    c.detectors = read_list<DetectorModel>(r, root, "detectors", read_detector);

    for (const auto& i : c.isomers)
        validate(i);
    for (const auto& t : c.targets)
        validate(t);
    validate(c.beamline);
    for (const auto& d : c.detectors)
        validate(d);
    check_unique(c.isomers, "isomer");
    check_unique(c.targets, "target");
    check_unique(c.detectors, "detector");
    check_cross_section_consistency(c.targets);
    return c;
}

Catalog load_catalog(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError(path + ": cannot open catalog file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_catalog(buf.str(), path);
}

const Catalog& default_catalog()
{
    static const Catalog catalog = parse_catalog(default_catalog_text(), "<default catalog>");
    return catalog;
}

//---------------------------------------------------------------------------//
// YAML writing
//---------------------------------------------------------------------------//

namespace {

void emit_optional(YAML::Emitter& out, const char* key, const std::optional<double>& v)
{
    out << YAML::Key << key << YAML::Value;
    if (v)
        out << *v;
    else
        out << YAML::Null;
}

void emit_pair(YAML::Emitter& out, double a, double b)
{
    out << YAML::Flow << YAML::BeginSeq << a << b << YAML::EndSeq;
}

} // namespace

std::string serialize_catalog(const Catalog& c)
{
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;

    out << YAML::Key << "isomers" << YAML::Value << YAML::BeginSeq;
    for (const auto& i : c.isomers) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << i.name;
        out << YAML::Key << "E0_eV" << YAML::Value << i.energy_ev;
        out << YAML::Key << "tau0_s" << YAML::Value << i.lifetime_s;
        out << YAML::Key << "Gamma0_eV" << YAML::Value << i.width_ev;
        out << YAML::Key << "Gamma0_Hz" << YAML::Value << i.width_hz;
        out << YAML::Key << "Q0" << YAML::Value << i.quality_factor;
        out << YAML::Key << "Ig" << YAML::Value << i.ground_spin.str();
        out << YAML::Key << "Ie" << YAML::Value << i.excited_spin.str();
        emit_optional(out, "alphaK", i.alpha_k);
        emit_optional(out, "omegaK", i.omega_k);
        emit_optional(out, "Qratio", i.quadrupole_ratio);
        emit_optional(out, "mu_g", i.mu_ground);
        emit_optional(out, "mu_e", i.mu_excited);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "targets" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : c.targets) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << t.name;
        out << YAML::Key << "Le_um" << YAML::Value << t.absorption_length_um;
        out << YAML::Key << "N0_cm3" << YAML::Value << t.number_density_cm3;
        emit_optional(out, "L_um", t.thickness_um);
        emit_optional(out, "xi", t.xi);
        emit_optional(out, "xi_opt", t.xi_optimized);
        out << YAML::Key << "eQgVzz_MHz" << YAML::Value;
        if (t.quadrupole)
            emit_pair(out, t.quadrupole->coupling_low_mhz, t.quadrupole->coupling_high_mhz);
        else
            out << YAML::Null;
        out << YAML::Key << "eta" << YAML::Value;
        if (t.quadrupole)
            emit_pair(out, t.quadrupole->eta_low, t.quadrupole->eta_high);
        else
            out << YAML::Null;
        out << YAML::Key << "magnetism" << YAML::Value << std::string(to_string(t.magnetism));
        emit_optional(out, "density_g_cm3", t.mass_density_g_cm3);
        emit_optional(out, "dipole_r_A", t.dipole_distance_angstrom);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    const auto& b = c.beamline;
    out << YAML::Key << "beamline" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "Ep_mJ" << YAML::Value << b.pulse_energy_mj;
    out << YAML::Key << "Ebg_mJ" << YAML::Value << b.background_energy_mj;
    out << YAML::Key << "dEp_eV" << YAML::Value << b.bandwidth_ev;
    out << YAML::Key << "np" << YAML::Value << b.pulses_per_train;
    out << YAML::Key << "pulse_spacing_s" << YAML::Value << b.pulse_spacing_s;
    out << YAML::Key << "train_duration_s" << YAML::Value << b.train_duration_s;
    out << YAML::Key << "rep_rate_Hz" << YAML::Value << b.rep_rate_hz;
    out << YAML::Key << "elements" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : b.elements) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << e.name;
        out << YAML::Key << "transmission" << YAML::Value << e.transmission;
        if (!e.point.empty())
            out << YAML::Key << "point" << YAML::Value << e.point;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;

    out << YAML::Key << "detectors" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : c.detectors) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << d.name;
        out << YAML::Key << "energy_sigma_eV" << YAML::Value << d.energy_sigma_ev;
        out << YAML::Key << "background_rate" << YAML::Value << d.background_rate;
        out << YAML::Key << "gate_open_s" << YAML::Value << d.gate_open_s;
        out << YAML::Key << "gate_close_s" << YAML::Value << d.gate_close_s;
        out << YAML::Key << "energy_range_keV" << YAML::Value;
        emit_pair(out, d.energy_min_kev, d.energy_max_kev);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

} // namespace narrowline
