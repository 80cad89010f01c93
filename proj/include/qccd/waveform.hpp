#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qccd/constants.hpp"
#include "qccd/electrode_basis.hpp"
#include "qccd/execution.hpp"

namespace qccd::wave {

// Constraint set for one potential well. Curvature/quartic/gradient targets
// are derivatives of the total potential (as a voltage) along the weak axis
// u = (sin angle, cos angle); the in-plane normal direction v always gets a
// vanishing gradient, and the u-v cross curvature is constrained to zero so
// the principal axes align with the requested angle.
struct PotentialConstraints {
    std::array<double, 2> well_position_um{0.0, 0.0};
    double weak_axis_angle_rad = 0.0;
    // d phi/du at the well (axial bias field; 0 for an equilibrium well).
    double gradient_target_v_per_m = 0.0;
    // d^2 phi/du^2. Positive for a confining well; may be <= 0 only when a
    // positive quartic target shapes a double well.
    double axial_curvature_target_v_per_m2 = 0.0;
    // Optional d^4 phi/du^4 (separation ramps).
    std::optional<double> quartic_target_v_per_m4;
    // Optional d^2 phi/dv^2 (needed when the transverse direction must be
    // actively confined, e.g. during well rotation).
    std::optional<double> transverse_curvature_target_v_per_m2;
    // Relative weight when several wells overdetermine the solve.
    double weight = 1.0;
    // Per-electrode box bound |V_e| <= voltage_bound_v.
    double voltage_bound_v = 10.0;

    void validate() const;

    // Energy curvature m (2 pi f)^2 expressed as a potential curvature
    // (divided by the elementary charge), in V/m^2.
    static double curvature_from_frequency(double frequency_hz,
                                           double mass_kg);
    // Inverse of curvature_from_frequency, in Hz.
    static double frequency_from_curvature(double curvature_v_per_m2,
                                           double mass_kg);
};

// Outcome of one constrained minimum-norm voltage solve.
struct SolveReport {
    std::vector<double> voltages;
    bool feasible = false;
    int rank = 0;
    // Electrodes minus rank: size of the family of voltage sets satisfying
    // the constraints (the minimum-norm member is returned).
    int null_space_dimension = 0;
    std::vector<std::string> constraint_names;
    // Normalized equality residuals per constraint row at the solution.
    std::vector<double> constraint_residuals;
    // Electrode indices pinned at +-voltage_bound by the active-set loop.
    std::vector<int> active_bounds;
    // Largest normalized violation and the row responsible (when infeasible).
    double max_violation = 0.0;
    std::string most_violated;
};

// Minimize sum of squared voltages subject to the well constraint rows
// (equality) and per-electrode box bounds (grow-only active set, worst
// violator first; deterministic order). Never throws for infeasibility: the
// report carries the diagnosis.
SolveReport solve_voltages(const ElectrodeBasis& basis,
                           const std::vector<PotentialConstraints>& wells,
                           double mass_kg = constants::mass_be9);
SolveReport solve_voltages(const ElectrodeBasis& basis,
                           const PotentialConstraints& well,
                           double mass_kg = constants::mass_be9);

// Discrete single-pole low-pass: y[k] = alpha x[k] + (1-alpha) y[k-1], with
// alpha = 1 - exp(-2 pi cutoff / update_rate) and the settled initial
// condition y[0] = x[0] (DC gain exactly 1).
struct FilterModel {
    double cutoff_hz = 0.0;
    double update_rate_hz = 5e7;

    double alpha() const;
    void validate() const;  // requires 0 < cutoff < update_rate / 2
};

// Per-electrode voltage samples at a fixed update rate.
struct Waveform {
    std::vector<std::string> electrode_names;
    std::vector<std::vector<double>> samples;  // [step][electrode]
    double update_rate_hz = 5e7;
    double voltage_bound_v = 10.0;
    std::optional<FilterModel> filter;  // recorded by filter operations

    std::size_t step_count() const { return samples.size(); }
    double duration_us() const;
    void validate() const;
};

// Number of samples covering `duration_us` at `update_rate_hz`:
// ceil(duration * rate), with a tiny guard against floating-point excess so
// exact products stay exact.
std::size_t samples_for_duration(double duration_us, double update_rate_hz);

// Linear interpolation of (curvature, quartic, bias, angle, position)
// between two constraint sets with a voltage solve per step. steps == 1
// degenerates to the `to` endpoint alone. Throws std::runtime_error naming
// the failing step if any step is infeasible. Serial/Parallel give identical
// results; Parallel distributes steps across OpenMP threads.
Waveform separation_ramp(const ElectrodeBasis& basis,
                         const PotentialConstraints& from,
                         const PotentialConstraints& to, std::size_t steps,
                         double mass_kg = constants::mass_be9,
                         Execution exec = Execution::Serial,
                         double update_rate_hz = 5e7);

struct RotationResult {
    Waveform waveform;
    std::vector<double> angles_rad;    // per step
    std::vector<double> mode_gap_mhz;  // per step, from the local Hessian
    double min_gap_mhz = 0.0;
    std::size_t min_gap_step = 0;
    bool gap_below_threshold = false;
    // Smallest step-to-step overlap |<v_k | v_k+1>| of the low-mode
    // eigenvector (1 means perfectly continuous rotation).
    double min_eigenvector_overlap = 1.0;
};

// Rotate the weak axis of one well from angle_from to angle_to (radians),
// re-diagonalizing the local Hessian at each step and reporting the minimum
// frequency gap between the two in-plane modes. The template must constrain
// the transverse curvature so both axes stay controlled.
RotationResult well_rotation_ramp(const ElectrodeBasis& basis,
                                  const PotentialConstraints& well_template,
                                  double angle_from_rad, double angle_to_rad,
                                  std::size_t steps,
                                  double gap_threshold_mhz = 0.05,
                                  double mass_kg = constants::mass_be9,
                                  Execution exec = Execution::Serial,
                                  double update_rate_hz = 5e7);

// Forward low-pass recurrence per electrode. Records the filter in the
// result header.
Waveform apply_filter(const Waveform& waveform, const FilterModel& filter);

struct FilterResult {
    Waveform waveform;
    std::size_t clipped_samples = 0;  // inverse values clipped to the bound
};

// Exact discrete inverse of apply_filter: apply_filter(precompensate(w))
// reproduces w sample-for-sample. Inverse samples beyond the voltage bound
// are clipped and counted.
FilterResult precompensate(const Waveform& waveform, const FilterModel& filter);

// CSV with header "time_us,V_<name>,..." plus a JSON header document
// (update rate, bounds, filter, electrode names).
std::string waveform_to_csv(const Waveform& waveform);
std::string waveform_header_json(const Waveform& waveform);
Waveform waveform_from_text(const std::string& csv_text,
                            const std::string& header_json_text);
void save_waveform(const Waveform& waveform, const std::string& csv_path);
Waveform load_waveform(const std::string& csv_path);

// Local minimum of the solved potential near `start_um`, found by Newton
// iteration on the analytic gradient, with the principal-axis frequencies
// and weak-axis angle at the minimum.
struct WellMeasurement {
    std::array<double, 2> position_um{0.0, 0.0};
    double axial_frequency_mhz = 0.0;       // lower in-plane mode
    double transverse_frequency_mhz = 0.0;  // higher in-plane mode
    double weak_axis_angle_rad = 0.0;
    bool converged = false;
};

WellMeasurement measure_well(const ElectrodeBasis& basis,
                             const std::vector<double>& voltages,
                             std::array<double, 2> start_um,
                             double mass_kg = constants::mass_be9);

// Offsets (um) of local minima of the potential along the axis through
// `center_um` at `angle_rad`, scanned over +-half_range_um and refined by
// 1-D Newton steps. Sorted ascending.
std::vector<double> axial_minima(const ElectrodeBasis& basis,
                                 const std::vector<double>& voltages,
                                 std::array<double, 2> center_um,
                                 double angle_rad, double half_range_um,
                                 double mass_kg = constants::mass_be9);

}  // namespace qccd::wave
