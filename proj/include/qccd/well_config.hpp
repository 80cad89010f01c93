#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qccd::trap {

// A single ion. Only 9Be+ is in scope; the label distinguishes ions.
struct IonId {
    std::string label;
    std::string species = "Be-9";
    double mass_kg = 0.0;
};

IonId make_be9(std::string label);

// One potential well holding an ordered ion chain. Ion order is the
// left-to-right spatial order within the well.
struct Well {
    std::string zone;
    std::vector<std::string> ions;

    bool operator==(const Well&) const = default;
};

// Assignment of ions to named wells, e.g. "S_ab" or "A_a B_b".
struct WellConfiguration {
    std::vector<Well> wells;

    bool operator==(const WellConfiguration&) const = default;

    // All ion labels in well order, left to right.
    std::vector<std::string> ion_labels() const;
    // Zone holding the given ion; throws if absent.
    const Well& well_of(const std::string& ion) const;
    bool holds(const std::string& ion) const;

    // Throws std::invalid_argument on duplicate ions, duplicate zones,
    // or an empty well. Zone labels are checked against the grammar only;
    // binding to a TrapGraph happens in the primitive library.
    void validate() const;
};

struct ConfigParseError : std::runtime_error {
    ConfigParseError(const std::string& message, std::size_t offset)
        : std::runtime_error(message + " (at offset " +
                             std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

// Parses the well-configuration notation: whitespace-separated tokens of
// the form Zone "_" ions, zones in {L,A,S,B,R,C,C',H,V}, ions lowercase.
WellConfiguration parse_configuration(const std::string& text);

// Canonical text form: single spaces between wells, subscripts concatenated.
std::string format_configuration(const WellConfiguration& config);

bool is_zone_label(const std::string& label);

}  // namespace qccd::trap
