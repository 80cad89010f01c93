#pragma once

namespace qccd::constants {

inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double epsilon0 = 8.8541878128e-12;           // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double mass_be9 = 9.0121831 * atomic_mass_unit;
inline constexpr double pi = 3.14159265358979323846;

// Quadratic sensitivity of the qubit transition to static field offsets,
// in Hz per microtesla squared.
inline constexpr double c2_hz_per_ut2 = 3.05e-1;

}  // namespace qccd::constants
