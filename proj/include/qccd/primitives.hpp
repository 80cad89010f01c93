#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qccd/quantity.hpp"
#include "qccd/trap_graph.hpp"
#include "qccd/well_config.hpp"

namespace qccd::shuttle {

enum class PrimitiveKind { Shuttle, Separate, Recombine, RotateWell };

std::string to_string(PrimitiveKind k);
PrimitiveKind primitive_kind_from_string(const std::string& s);

// A mean-occupation measurement taken while the ions sit in a specific
// configuration. `ion` is empty for two-ion crystal modes (COM/STR).
struct EndpointMeasurement {
    trap::WellConfiguration config;
    std::string ion;
    std::string mode;
    Quantity nbar;
};

// A characterization run: a configuration chain, plus where in that chain
// the occupation was measured and what it was. `derives` names which cost
// of the owning primitive this run determines ("mover", "spectator", or
// "none" for runs that only establish endpoint baselines).
struct PrimitiveTest {
    std::string derives;
    std::vector<trap::WellConfiguration> sequence;
    std::size_t measure_at = 0;
    EndpointMeasurement measured;
};

// One elementary transport operation between well configurations, with its
// measured duration, per-ion travel distance, and excitation costs.
// Costs are per one-way pass; a forward/backward pair contributes twice.
struct TransportPrimitive {
    std::string name;
    PrimitiveKind kind = PrimitiveKind::Shuttle;
    trap::WellConfiguration initial;
    trap::WellConfiguration final;
    double duration_us = 0.0;
    std::map<std::string, double> per_ion_distance_um;
    std::optional<Quantity> mover_dnp;
    std::optional<Quantity> spectator_dnp;
    std::vector<EndpointMeasurement> endpoints;
    std::vector<PrimitiveTest> tests;
    int table_row = 0;

    // Ions whose zone changes between initial and final.
    std::vector<std::string> moving_ions() const;
    // Ions present but not moving (covered by spectator_dnp when set).
    std::vector<std::string> stationary_ions() const;

    // Throws std::invalid_argument on: mismatched ion sets, non-positive
    // duration, or a kind whose well counts do not fit (separate must go
    // 1 well -> 2 wells, recombine 2 -> 1, rotate_well must only exchange
    // the C/C' zone label).
    void validate() const;
};

// Ground-state preparation results used as the starting ledger baseline.
struct Preparation {
    Quantity single_ion_axial;
    Quantity two_ion_com;
    Quantity two_ion_str;
};

// The measured primitive table, loaded from the versioned JSON data file.
class PrimitiveLibrary {
  public:
    static PrimitiveLibrary load(const std::string& path);
    static PrimitiveLibrary from_json_text(const std::string& text);

    // Resolves the data file path: explicit argument if non-empty, else the
    // QCCD_TABLE1 environment variable, else the built-in default path.
    static std::string default_path(const std::string& override_path = "");

    const std::vector<TransportPrimitive>& primitives() const {
        return primitives_;
    }
    const TransportPrimitive& by_name(const std::string& name) const;
    bool has(const std::string& name) const;
    const Preparation& preparation() const { return preparation_; }

    // Mode frequencies shipped with the table (MHz).
    double com_frequency_mhz() const { return com_mhz_; }
    double str_frequency_mhz() const { return str_mhz_; }

    // Throws std::invalid_argument when a primitive references a zone that
    // does not exist in the graph, or when names collide.
    void validate_against(const trap::TrapGraph& graph) const;

  private:
    std::vector<TransportPrimitive> primitives_;
    Preparation preparation_;
    double com_mhz_ = 3.6;
    double str_mhz_ = 6.2;
};

}  // namespace qccd::shuttle
