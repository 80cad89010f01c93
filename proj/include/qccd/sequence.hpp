#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qccd/primitives.hpp"
#include "qccd/well_config.hpp"

namespace qccd::shuttle {

// An addressing marker: while the sequence sits in the configuration reached
// by the owning step, laser pulses may be applied to `ion` (which is then in
// the interaction zone S).
struct AddressMarker {
    std::string ion;
};

// One executed primitive instance. The primitive is stored fully
// instantiated: endpoints renamed to the sequence's ion labels and the
// initial/final configurations carrying any spectator wells of the context.
struct SequenceStep {
    TransportPrimitive primitive;
    bool reversed = false;
    // Names the library rows this step came from, e.g. "shuttle_A_C" or
    // "rotate_C_Cp+shuttle_V_Cp~" (a fused transit; '~' marks a reversed
    // part).
    std::string source;
    double idle_after_us = 0.0;
    std::vector<AddressMarker> markers;
};

struct ShuttleSequence {
    trap::WellConfiguration initial;
    std::vector<SequenceStep> steps;

    const trap::WellConfiguration& final_configuration() const;
    std::vector<trap::WellConfiguration> configuration_chain() const;
    // Chain rendered with format_configuration, joined by " -> ".
    std::string chain_string() const;
};

struct ValidationReport {
    bool ok = true;
    std::size_t violation_boundary = 0;
    std::string message;

    explicit operator bool() const { return ok; }
};

struct SequenceTotals {
    double duration_us = 0.0;  // step durations plus idle annotations
    std::map<std::string, double> per_ion_distance_um;
};

struct IonPlacement {
    std::string start_zone;
    std::size_t start_index = 0;  // position within the starting well
    std::string end_zone;
    std::size_t end_index = 0;
};

// True when the two configurations hold the same wells with the same ion
// order, regardless of the order the wells are listed in.
bool same_configuration(const trap::WellConfiguration& x,
                        const trap::WellConfiguration& y);

// Checks well-chain contiguity (final of step k == initial of step k+1 and
// sequence.initial == first step initial), a constant ion set, and each
// step's primitive invariants. Reports the first violation.
ValidationReport validate_sequence(const ShuttleSequence& seq);

// Steps reversed and endpoint-swapped; durations, distances and excitation
// costs are preserved (a primitive costs the same in both directions).
ShuttleSequence reverse_sequence(const ShuttleSequence& seq);

SequenceTotals totals(const ShuttleSequence& seq);

std::map<std::string, IonPlacement> net_permutation(
    const ShuttleSequence& seq);

// Builds the unique step taking `from` to `to` out of library primitives:
// tries every primitive forward and reversed under zone-aligned ion
// renaming, keeping spectator wells; when no single primitive fits, fuses
// two (e.g. the junction rotation followed by the V-arm shuttle). Throws
// std::runtime_error when no step exists.
SequenceStep compile_step(const trap::WellConfiguration& from,
                          const trap::WellConfiguration& to,
                          const PrimitiveLibrary& library);

// Compiles a configuration chain into a validated sequence.
ShuttleSequence compile_chain(
    const std::vector<trap::WellConfiguration>& chain,
    const PrimitiveLibrary& library);
ShuttleSequence compile_chain(const std::vector<std::string>& chain,
                              const PrimitiveLibrary& library);

// The two-ion reordering sequence: starting from S holding (first, second),
// separates the crystal, routes the ions around the junction, and recombines
// them in swapped order. Ten steps.
ShuttleSequence compile_reorder(const std::string& first,
                                const std::string& second,
                                const PrimitiveLibrary& library);

// The individual-addressing sequence for two ions held as A/B: shifts the
// pair so each ion in turn sits in the interaction zone S, returning to A/B
// after each shift. Steps reaching an addressable configuration carry an
// AddressMarker; `target` selects which ion must become addressable (and is
// validated to be one of the two).
ShuttleSequence compile_individual_address(const std::string& ion_in_a,
                                           const std::string& ion_in_b,
                                           const std::string& target,
                                           const PrimitiveLibrary& library);

std::string sequence_to_json_text(const ShuttleSequence& seq);
ShuttleSequence sequence_from_json_text(const std::string& text);

}  // namespace qccd::shuttle
