#pragma once

// Monte Carlo photon-event generator for a pulsed isomer experiment.
//
// Each macropulse draws its events from an independent random stream
// derived from (seed, pulse index), so output is reproducible and
// independent of how pulses are distributed over threads.

#include "narrowline/core_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace narrowline {

enum class ProcessKind
{
    prompt_compton,
    delayed_line,
    flat_background
};

std::string_view to_string(ProcessKind k);
ProcessKind parse_process_kind(std::string_view text);

/// One emission process seen by one detector.
///
/// rate units: delayed_line counts / 10,000 s (all decays of the line);
/// prompt_compton peak density counts / keV / 10,000 s;
/// flat_background counts / keV / 10,000 s over the detector energy range.
struct ProcessSpec
{
    ProcessKind kind = ProcessKind::flat_background;
    double energy_center_kev = 0.0;
    double energy_width_kev = 0.0; // prompt profile sigma
    double rate = 0.0;
    double decay_tau_s = 0.0;      // delayed_line only
};

struct ProcessAssignment
{
    std::string detector;
    ProcessSpec process;
};

/// Artifact that removes a fraction `depth` of delayed-line events in
/// [t_center - width/2, t_center + width/2].
struct Notch
{
    double t_center_s = 0.0;
    double width_s = 0.0;
    double depth = 1.0;
};

struct RunConfig
{
    double duration_s = 0.0;
    double rep_rate_hz = 10.0;
    int pulses_per_train = 1;
    double pulse_spacing_s = 0.0;
    std::vector<DetectorModel> detectors;
    std::vector<ProcessAssignment> processes;
    std::uint64_t seed = 0;
    std::optional<Notch> notch;
    bool pileup = true; // include decays carried over from earlier pulses

    std::uint64_t pulse_count() const;
    double period_s() const { return 1.0 / rep_rate_hz; }
};

void validate(const RunConfig& cfg);

struct EventRecord
{
    std::uint64_t pulse_id = 0;
    std::uint32_t detector = 0; // index into EventStream::detectors
    double t_s = 0.0;
    double e_kev = 0.0;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct EventStream
{
    std::vector<std::string> detectors;
    std::vector<EventRecord> events;

    std::uint32_t detector_index(std::string_view name) const;
};

/// Name of the per-pulse random stream and sampling algorithm.
std::string_view generator_name();

/// Expected number of events of one process per macropulse, before gating.
double expected_per_pulse(const ProcessSpec& p, const DetectorModel& det, const RunConfig& cfg);

/// Runs the simulation. Events are ordered by pulse, then (t, detector, E).
EventStream simulate_run(const RunConfig& cfg, unsigned jobs = 1);

/// Keeps events with gate_open <= t <= gate_close.
std::vector<EventRecord> gate_events(std::span<const EventRecord> events, const DetectorModel& det);

/// CSV with header `pulse_id,detector,t_ms,E_keV`; t to 1 us, E to 1 eV.
void write_events_csv(std::ostream& os, const EventStream& stream);
EventStream read_events_csv(std::istream& is, std::string_view source = "<events>");

/// Calibration targets for a simulated run resembling the 45Sc beamtime.
struct CalibratedRunTargets
{
    double duration_s = 9.0e4;
    double r4 = 328.0;            // counts/keV/10,000 s in the K band and window
    double r12 = 7.3;             // counts/keV/10,000 s in the elastic band and window
    double background = 0.9;      // counts/keV/10,000 s per detector
    double tau_s = 0.46;
    double k_alpha_kev = 4.09;
    double k_beta_kev = 4.46;
    double k_alpha_fraction = 0.885;
    double band4_lo_kev = 3.75, band4_hi_kev = 4.75;
    double band12_lo_kev = 12.15, band12_hi_kev = 12.65;
    double window_lo_s = 0.015, window_hi_s = 0.100;
    double prompt_density = 2.0e3; // counts/keV/10,000 s at the Compton peak
    double prompt_center_kev = 12.1;
    double prompt_width_kev = 0.2;
    bool pileup = true;
};

/// Two delayed-fluorescence detectors (Du, Dd) with line rates chosen so
/// the combined band rates in the analysis window, background included,
/// equal the targets in expectation.
RunConfig calibrated_run_config(const Catalog& catalog, std::uint64_t seed,
                           const CalibratedRunTargets& targets = {});

} // namespace narrowline
