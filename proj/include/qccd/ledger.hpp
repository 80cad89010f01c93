#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qccd/distribution.hpp"
#include "qccd/primitives.hpp"
#include "qccd/quantity.hpp"
#include "qccd/sequence.hpp"

namespace qccd::motion {

using ::qccd::Distribution;
using ::qccd::distribution_from_string;

// Mean occupations per mode. Keys: "COM" and "STR" for a two-ion crystal,
// "axial(<ion>)" for an ion alone in its well, plus free-form spectator
// entries such as "radial_low(<ion>)".
struct MotionalState {
    std::map<std::string, Quantity> occupations;
    Distribution distribution = Distribution::Thermal;

    // Throws std::invalid_argument on negative occupation or uncertainty.
    void validate() const;
};

struct ExcitationLedgerConfig {
    double idle_heating_rate_per_s = 0.0;  // quanta/s added to open modes
    Quantity concatenation_penalty;        // quanta per step boundary
    MotionalState baseline;                // occupations at sequence start

    void validate() const;
};

// Step index window [first, last): the ion accrues the constant detuning
// only during these steps.
struct StepWindow {
    std::size_t first = 0;
    std::size_t last = static_cast<std::size_t>(-1);
};

struct PhaseSources {
    double constant_detuning_hz = 0.0;
    // Position-dependent qubit shift, sampled per zone (Hz). Zones not
    // listed contribute nothing.
    std::map<std::string, double> acz_profile_hz;
    // Missing ions default to the whole sequence.
    std::map<std::string, StepWindow> active_window;
};

// Running account of one mode. `baseline` is unset while the mode's
// absolute occupation is indeterminate (e.g. right after separation mixes
// the crystal modes); `extra` accumulates per-primitive costs on top.
struct ModeAccount {
    std::optional<Quantity> baseline;
    Quantity extra;
    bool open = true;

    Quantity total() const {
        return baseline ? *baseline + extra : extra;
    }
};

struct PhaseAccount {
    double total_rad = 0.0;
    double mod_2pi = 0.0;  // in [0, 2*pi)
};

struct LedgerReport {
    std::map<std::string, ModeAccount> modes;
    std::map<std::string, PhaseAccount> phases;

    std::string to_json_text() const;
};

// One additive event applied to a mode account during simulation.
struct Contribution {
    std::size_t step = 0;
    std::string primitive;  // library name (empty for idle/penalty rows)
    std::string role;       // "mover", "spectator", "idle", "penalty"
    std::string mode_key;
    Quantity amount;
    bool zeroed = false;  // recorded but not applied (bootstrap derivation)
};

struct SimulationOptions {
    // When non-empty, contributions from this primitive with the given role
    // are recorded with amount zero; the bootstrap derivation uses this to
    // predict a test sequence without the cost under derivation.
    std::string zero_dnp_primitive;
    std::string zero_dnp_role;
};

struct SimulationTrace {
    LedgerReport report;
    std::vector<Contribution> contributions;
    // Mode accounts after 0..n steps (index 0 = initial state).
    std::vector<std::map<std::string, ModeAccount>> snapshots;
};

// Walks the sequence accumulating excitation per mode and phase per ion.
// Per-pass costs land on the moving (mover) or stationary (spectator) ions'
// open modes; endpoint measurements re-anchor a mode's baseline while
// keeping accumulated extras; separation/recombination opens and closes
// crystal modes with indeterminate baselines (mode mixing is not modeled).
SimulationTrace simulate_detailed(const shuttle::ShuttleSequence& seq,
                                  const ExcitationLedgerConfig& config,
                                  const PhaseSources& phases,
                                  const SimulationOptions& options = {});

LedgerReport simulate_sequence(const shuttle::ShuttleSequence& seq,
                               const ExcitationLedgerConfig& config,
                               const PhaseSources& phases);

// Baseline occupations for the ground-state preparation of the sequence's
// starting configuration, plus Doppler-limit radial spectator entries.
ExcitationLedgerConfig default_ledger_config(
    const shuttle::PrimitiveLibrary& library,
    const trap::WellConfiguration& initial);

struct DerivedExcitation {
    Quantity dnp;
    // Central value below zero by more than three sigma: the inputs are
    // inconsistent with a non-negative per-pass cost.
    bool negative_beyond_3sigma = false;
};

// dnp = (measured - baseline - sum(known)) / passes, uncertainties combined
// in quadrature. Throws std::invalid_argument when passes < 1.
DerivedExcitation derive_primitive_excitation(
    const Quantity& measured, const Quantity& baseline,
    const std::vector<Quantity>& known_contributions, int passes);

// Re-derives every stored per-pass cost from its own characterization run:
// the run's chain is compiled, simulated with the cost under derivation
// zeroed, and inverted through derive_primitive_excitation.
struct TableDerivation {
    int table_row = 0;
    std::string primitive;
    std::string role;  // "mover" or "spectator"
    Quantity stored;
    Quantity derived;
    double tolerance = 0.0;  // max(stored sigma, 0.002)
    bool within = false;
};

std::vector<TableDerivation> derive_table_dnp(
    const shuttle::PrimitiveLibrary& library);

// Predicts every characterization run's measured occupation by simulation
// and compares against the recorded value at its quoted one sigma.
struct TableCheck {
    int table_row = 0;
    std::string primitive;
    shuttle::EndpointMeasurement measured;
    Quantity predicted;
    double difference = 0.0;
    bool baseline_row = false;  // run only anchors a baseline (no cost)
    bool within_sigma = false;
};

std::vector<TableCheck> check_table(const shuttle::PrimitiveLibrary& library);

// c2 * delta_b^2 with delta_b in microtesla; result in Hz.
double second_order_zeeman_shift(double delta_b_ut, double c2_hz_per_ut2);

// Per-zone quadratic qubit shifts for a uniform field gradient along the
// trap's z axis: delta_b(zone) = gradient * (z - z_reference) in microtesla
// (T/m times micrometers), shift = c2 * delta_b^2 in Hz. Feed the result
// into PhaseSources::acz_profile_hz. Throws when the reference zone is
// unknown.
std::map<std::string, double> zeeman_zone_profile(
    const trap::TrapGraph& graph, const std::string& reference_zone,
    double b_gradient_t_per_m, double c2_hz_per_ut2);

struct ReducedPhase {
    double reduced_rad = 0.0;  // in [0, 2*pi)
    double offset_rad = 0.0;   // total - reduced (a multiple of 2*pi)
};

ReducedPhase ramsey_phase_check(double total_phase_rad);

}  // namespace qccd::motion
