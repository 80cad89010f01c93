#include "qccd/modes.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "qccd/constants.hpp"

namespace qccd::motion {

namespace c = qccd::constants;

double equilibrium_spacing_um(double axial_freq_mhz, double mass_kg) {
    if (!(axial_freq_mhz > 0.0) || !(mass_kg > 0.0))
        throw std::invalid_argument(
            "equilibrium spacing needs positive frequency and mass");
    const double omega = 2.0 * c::pi * axial_freq_mhz * 1e6;
    const double d3 = c::elementary_charge * c::elementary_charge /
                      (2.0 * c::pi * c::epsilon0 * mass_kg * omega * omega);
    return std::cbrt(d3) * 1e6;
}

std::pair<ModeSpec, ModeSpec> two_ion_normal_modes(
    double axial_freq_mhz, std::pair<double, double> masses_kg) {
    const auto [m1, m2] = masses_kg;
    if (!(axial_freq_mhz > 0.0) || !(m1 > 0.0) || !(m2 > 0.0))
        throw std::invalid_argument(
            "normal modes need positive frequency and masses");

    // Common well curvature, set by the first ion's single-ion frequency.
    const double omega = 2.0 * c::pi * axial_freq_mhz * 1e6;
    const double curv = m1 * omega * omega;

    // Equilibrium spacing from force balance in the shared well, then the
    // Coulomb coupling stiffness 2 k e^2 / d^3 (equal charges).
    const double ke2 = c::elementary_charge * c::elementary_charge /
                       (4.0 * c::pi * c::epsilon0);
    const double d = std::cbrt(2.0 * ke2 / curv);
    const double coupling = 2.0 * ke2 / (d * d * d);

    Eigen::Matrix2d hess;
    hess << curv + coupling, -coupling, -coupling, curv + coupling;
    Eigen::Vector2d inv_sqrt_m(1.0 / std::sqrt(m1), 1.0 / std::sqrt(m2));
    Eigen::Matrix2d weighted =
        inv_sqrt_m.asDiagonal() * hess * inv_sqrt_m.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(weighted);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("mode eigensolve failed");

    auto make_mode = [&](int k, const std::string& label) {
        ModeSpec mode;
        mode.label = label;
        mode.frequency_mhz =
            std::sqrt(solver.eigenvalues()(k)) / (2.0 * c::pi) * 1e-6;
        Eigen::Vector2d v = solver.eigenvectors().col(k).normalized();
        if (v(0) < 0.0) v = -v;
        mode.axis = {v(0), v(1)};
        return mode;
    };
    // Eigenvalues come sorted ascending: in-phase (COM) first.
    return {make_mode(0, "COM"), make_mode(1, "STR")};
}

}  // namespace qccd::motion
