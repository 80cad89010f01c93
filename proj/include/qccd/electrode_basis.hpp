#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "qccd/constants.hpp"

namespace qccd::wave {

// Localized smooth bump: amplitude * exp(-|r - center|^2 / (2 width^2)).
// For DC electrodes the amplitude is the potential (volts) contributed at
// the kernel center per volt applied; for RF bumps it is the squared field
// magnitude |E|^2 in (V/m)^2 at unit drive amplitude.
struct GaussianKernel {
    std::array<double, 2> center_um{0.0, 0.0};  // (x, z)
    double width_um = 50.0;
    double amplitude = 0.0;
};

// One DC control electrode: a named sum of kernels.
struct Electrode {
    std::string name;
    std::vector<GaussianKernel> kernels;
};

// Synthetic RF field model: |E_RF|^2(x, z) = amplitude_v^2 * sum of bumps.
struct RfModel {
    double amplitude_v = 1.0;
    double frequency_hz = 82.0e6;
    std::vector<GaussianKernel> e2_bumps;
};

// Analytic electrode potential basis over the junction plane. Positions are
// given in micrometers; all derivatives are returned in SI units
// (V / m^order for DC, and likewise for the pseudopotential expressed as an
// equivalent voltage).
class ElectrodeBasis {
  public:
    ElectrodeBasis() = default;
    ElectrodeBasis(std::vector<Electrode> electrodes, RfModel rf);

    // Kernels spaced ~55 um (width 50 um) along the four junction arms plus
    // a center electrode, with four pseudopotential bumps flanking the
    // junction at (+-60, 0) and (0, +-60) um.
    static ElectrodeBasis synthetic_default();

    static ElectrodeBasis from_json_text(const std::string& text);
    std::string to_json_text() const;

    std::size_t size() const { return electrodes_.size(); }
    const std::vector<Electrode>& electrodes() const { return electrodes_; }
    const RfModel& rf() const { return rf_; }

    // d^dx/dx^dx d^dz/dz^dz of electrode e's potential at `point_um`,
    // in V/m^(dx+dz). Orders up to dx+dz = 4 are supported.
    double electrode_derivative(std::size_t e, std::array<double, 2> point_um,
                                int dx, int dz) const;

    // Same derivative of the pseudopotential expressed as a voltage for an
    // ion of mass `mass_kg`: q |E_RF|^2 / (4 m Omega_RF^2).
    double pseudo_derivative(std::array<double, 2> point_um, int dx, int dz,
                             double mass_kg) const;

  private:
    std::vector<Electrode> electrodes_;
    RfModel rf_;
};

// Derivatives of the total potential (DC part linear in voltages plus the
// pseudopotential) at one point, as an equivalent voltage. d(i, j) is
// d^(i+j) phi / dx^i dz^j in V/m^(i+j), valid for i + j <= 4.
class Moments {
  public:
    double d(int dx, int dz) const;
    double& d(int dx, int dz);

    double value() const { return d(0, 0); }
    // Directional derivative of the given order along the unit vector
    // u = (sin angle, cos angle); angle is measured from the +z axis toward
    // +x, so 0 points along an arm of the S column and pi/2 along x.
    double directional(int order, double angle_rad) const;
    // Mixed second derivative along u and its in-plane normal v.
    double cross_curvature(double angle_rad) const;

  private:
    std::array<double, 25> d_{};  // [dx * 5 + dz]
};

// Total-potential moments for an ion of mass `mass_kg` (the pseudopotential
// term is mass-dependent). Voltages must match basis.size().
Moments moments_at(const ElectrodeBasis& basis, std::array<double, 2> point_um,
                   const std::vector<double>& voltages,
                   double mass_kg = constants::mass_be9);

// Pseudopotential energy q^2 |E_RF|^2 / (4 m Omega_RF^2) in joules at a
// point, using the default synthetic bump geometry scaled to the given drive
// amplitude and frequency.
double pseudopotential(std::array<double, 2> point_um, double rf_amplitude_v,
                       double rf_frequency_hz, double mass_kg);

}  // namespace qccd::wave
