#pragma once

// Validated physical data: isomer constants, crystal targets, the beamline
// transmission chain and detector models. All records are plain values and
// immutable once a Catalog has been loaded.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace narrowline {

/// Nuclear spin stored as twice its value so half-integers stay exact.
class Spin
{
  public:
    constexpr Spin() = default;
    constexpr explicit Spin(int twice) : twice_(twice) {}

    /// Parses "7/2", "3/2", "1" or "2".
    static Spin parse(std::string_view text);

    constexpr int twice() const { return twice_; }
    constexpr double value() const { return 0.5 * twice_; }
    constexpr int multiplicity() const { return twice_ + 1; }
    std::string str() const;

    friend constexpr bool operator==(Spin, Spin) = default;

  private:
    int twice_ = 0;
};

/// Natural-resonance constants of one isomeric transition.
///
/// Only energy and lifetime are primary; width (eV and Hz) and the quality
/// factor are derived at construction so the invariants hold by
/// construction.
struct IsomerSpec
{
    std::string name;
    double energy_ev = 0.0;
    double lifetime_s = 0.0;
    double width_ev = 0.0;      // hbar / tau0
    double width_hz = 0.0;      // width_ev / (2 pi hbar)
    double quality_factor = 0.0;
    Spin ground_spin;
    Spin excited_spin;
    std::optional<double> alpha_k;          // partial K conversion coefficient
    std::optional<double> omega_k;          // K-shell fluorescence yield
    std::optional<double> quadrupole_ratio; // Q_e / Q_g
    std::optional<double> mu_ground;        // nuclear magnetons
    std::optional<double> mu_excited;       // nuclear magnetons

    double energy_kev() const;
};

/// Builds an IsomerSpec with its derived widths filled in.
IsomerSpec make_isomer(std::string name, double energy_kev, double lifetime_s,
                       Spin ground, Spin excited);

enum class Magnetism
{
    diamagnetic,
    paramagnetic
};

std::string_view to_string(Magnetism m);
Magnetism parse_magnetism(std::string_view text);

/// Which end of a tabulated quadrupole-coupling range to use.
enum class Endpoint
{
    lower,
    upper
};

/// Ground-state quadrupole coupling eQ_g V_zz / h, possibly a range across
/// inequivalent sites or measurements. eta is paired with each endpoint.
struct QuadrupoleData
{
    double coupling_low_mhz = 0.0;
    double coupling_high_mhz = 0.0;
    double eta_low = 0.0;
    double eta_high = 0.0;

    double coupling(Endpoint e) const
    {
        return e == Endpoint::upper ? coupling_high_mhz : coupling_low_mhz;
    }
    double eta(Endpoint e) const { return e == Endpoint::upper ? eta_high : eta_low; }
};

/// Crystal target. Absent table entries are std::nullopt, never zero.
struct TargetSpec
{
    std::string name;
    double absorption_length_um = 0.0;     // L_e
    double number_density_cm3 = 0.0;      // Sc nuclei, N0
    std::optional<double> thickness_um;    // L
    std::optional<double> xi;              // sigma_R N0 L / 4
    std::optional<double> xi_optimized;    // sigma_R N0 L_e / 2
    std::optional<QuadrupoleData> quadrupole;
    Magnetism magnetism = Magnetism::diamagnetic;
    std::optional<double> mass_density_g_cm3;
    std::optional<double> dipole_distance_angstrom; // config input, see README
};

struct TransmissionElement
{
    std::string name;
    double transmission = 1.0;
    std::string point; // non-empty when a named flux point follows this element
};

struct BeamlineSpec
{
    double pulse_energy_mj = 0.0;
    double background_energy_mj = 0.0;
    double bandwidth_ev = 0.0;
    int pulses_per_train = 1;
    double pulse_spacing_s = 0.0;
    double train_duration_s = 0.0;
    double rep_rate_hz = 0.0;
    std::vector<TransmissionElement> elements;

    std::vector<double> transmissions() const;
};

struct DetectorModel
{
    std::string name;
    double energy_sigma_ev = 0.0;
    double background_rate = 0.0; // counts / keV / 10,000 s
    double gate_open_s = 0.0;
    double gate_close_s = 0.0;
    double energy_min_kev = 0.0;
    double energy_max_kev = 0.0;

    double energy_sigma_kev() const;
    double energy_span_kev() const { return energy_max_kev - energy_min_kev; }
};

void validate(const IsomerSpec& isomer);
void validate(const TargetSpec& target);
void validate(const BeamlineSpec& beamline);
void validate(const DetectorModel& detector);

/// Resonant cross-section (cm^2) from the optical thickness row,
/// sigma_R = 4 xi / (N0 L). Throws MissingDataError without L or xi.
double sigma_resonant(const TargetSpec& target);

/// Same quantity from the optimized-thickness row, sigma_R = 2 xi* / (N0 L_e).
double sigma_resonant_optimized(const TargetSpec& target);

/// Checks that every target's cross-section rows agree with each other and
/// with the catalog-wide median to the given relative tolerance.
void check_cross_section_consistency(const std::vector<TargetSpec>& targets,
                                     double rel_tol = 0.05);

struct Catalog
{
    std::vector<IsomerSpec> isomers;
    std::vector<TargetSpec> targets;
    BeamlineSpec beamline;
    std::vector<DetectorModel> detectors;

    const IsomerSpec& isomer(std::string_view name) const;
    const TargetSpec& target(std::string_view name) const;
    const DetectorModel& detector(std::string_view name) const;
};

/// Text of the built-in catalog (YAML).
std::string_view default_catalog_text();

/// Parses and validates catalog text. `source` only decorates error messages.
Catalog parse_catalog(std::string_view text, std::string_view source = "<catalog>");

/// Loads a catalog file from disk.
Catalog load_catalog(const std::string& path);

/// The embedded default catalog, parsed once.
const Catalog& default_catalog();

/// Serializes a catalog in the same schema, with round-trip precision.
std::string serialize_catalog(const Catalog& catalog);

} // namespace narrowline
