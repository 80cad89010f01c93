#pragma once

#include <array>
#include <string>
#include <utility>

namespace qccd::motion {

// A normal mode of motion. For two-ion axial modes `axis` is the normalized
// mass-weighted participation vector of the two ions.
struct ModeSpec {
    std::string label;
    double frequency_mhz = 0.0;
    std::array<double, 2> axis{1.0, 0.0};
};

// Axial normal modes of a two-ion crystal in a common harmonic well whose
// single-ion frequency (for the first mass) is `axial_freq_mhz`. Returns
// (in-phase, out-of-phase); for equal masses the frequencies are (f, sqrt(3) f).
// Throws std::invalid_argument on non-positive inputs.
std::pair<ModeSpec, ModeSpec> two_ion_normal_modes(
    double axial_freq_mhz, std::pair<double, double> masses_kg);

// Equilibrium spacing of two equal-mass ions: d = (e^2 / (2 pi eps0 m w^2))^(1/3),
// returned in micrometers. Throws std::invalid_argument on non-positive inputs.
double equilibrium_spacing_um(double axial_freq_mhz, double mass_kg);

}  // namespace qccd::motion
