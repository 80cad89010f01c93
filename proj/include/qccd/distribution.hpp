#pragma once

#include <stdexcept>
#include <string>

namespace qccd {

// Motional-state population model: thermal (geometric in Fock number) or
// coherent (Poissonian in Fock number).
enum class Distribution { Thermal, Coherent };

inline std::string to_string(Distribution d) {
    return d == Distribution::Thermal ? "thermal" : "coherent";
}

inline Distribution distribution_from_string(const std::string& s) {
    if (s == "thermal") return Distribution::Thermal;
    if (s == "coherent") return Distribution::Coherent;
    throw std::invalid_argument("unknown distribution '" + s + "'");
}

}  // namespace qccd
