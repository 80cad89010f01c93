#include "qccd/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "format_detail.hpp"

namespace qccd::wave {

namespace {

using nlohmann::json;

const double kPi = 3.14159265358979323846;

struct ConstraintRows {
    Eigen::MatrixXd a;                  // rows x electrodes, row-normalized
    Eigen::VectorXd b;                  // matching right-hand sides
    std::vector<std::string> names;
    std::vector<double> b_normalized;   // before weighting, for feasibility
};

// One row: coefficients are the per-electrode directional derivatives, the
// right-hand side subtracts the (voltage-independent) pseudopotential part.
void push_row(ConstraintRows& rows, const std::string& name,
              const Eigen::VectorXd& coeffs, double target, double pseudo_part,
              double weight) {
    double norm = coeffs.norm();
    double scale = norm > 1e-300 ? 1.0 / norm : 1.0;
    Eigen::Index r = rows.a.rows();
    rows.a.conservativeResize(r + 1, coeffs.size());
    rows.a.row(r) = coeffs.transpose() * (scale * weight);
    double b_normalized = (target - pseudo_part) * scale;
    rows.b.conservativeResize(r + 1);
    rows.b(r) = b_normalized * weight;
    rows.names.push_back(name);
    rows.b_normalized.push_back(b_normalized);
}

ConstraintRows build_rows(const ElectrodeBasis& basis,
                          const std::vector<PotentialConstraints>& wells,
                          double mass_kg) {
    const std::size_t ne = basis.size();
    ConstraintRows rows;
    rows.a.resize(0, static_cast<Eigen::Index>(ne));
    rows.b.resize(0);

    for (std::size_t w = 0; w < wells.size(); ++w) {
        const PotentialConstraints& pc = wells[w];
        pc.validate();
        const std::string tag = "well" + std::to_string(w);
        double theta = pc.weak_axis_angle_rad;

        // Per-electrode moments at the well position (unit voltage each) and
        // the pseudopotential moments, all as directional combinations.
        std::vector<Moments> em(ne);
        for (std::size_t e = 0; e < ne; ++e)
            for (int dx = 0; dx <= 4; ++dx)
                for (int dz = 0; dz + dx <= 4; ++dz)
                    em[e].d(dx, dz) = basis.electrode_derivative(
                        e, pc.well_position_um, dx, dz);
        Moments pm;
        for (int dx = 0; dx <= 4; ++dx)
            for (int dz = 0; dz + dx <= 4; ++dz)
                pm.d(dx, dz) = basis.pseudo_derivative(pc.well_position_um, dx,
                                                       dz, mass_kg);

        Eigen::VectorXd coeffs(static_cast<Eigen::Index>(ne));
        auto fill = [&](auto&& extract) {
            for (std::size_t e = 0; e < ne; ++e)
                coeffs(static_cast<Eigen::Index>(e)) = extract(em[e]);
        };

        fill([&](const Moments& m) { return m.directional(1, theta); });
        push_row(rows, tag + ":grad_u", coeffs, pc.gradient_target_v_per_m,
                 pm.directional(1, theta), pc.weight);

        fill([&](const Moments& m) {
            return m.directional(1, theta + kPi / 2.0);
        });
        push_row(rows, tag + ":grad_v", coeffs, 0.0,
                 pm.directional(1, theta + kPi / 2.0), pc.weight);

        fill([&](const Moments& m) { return m.directional(2, theta); });
        push_row(rows, tag + ":curv_u", coeffs,
                 pc.axial_curvature_target_v_per_m2, pm.directional(2, theta),
                 pc.weight);

        fill([&](const Moments& m) { return m.cross_curvature(theta); });
        push_row(rows, tag + ":cross_uv", coeffs, 0.0, pm.cross_curvature(theta),
                 pc.weight);

        if (pc.transverse_curvature_target_v_per_m2) {
            fill([&](const Moments& m) {
                return m.directional(2, theta + kPi / 2.0);
            });
            push_row(rows, tag + ":curv_v", coeffs,
                     *pc.transverse_curvature_target_v_per_m2,
                     pm.directional(2, theta + kPi / 2.0), pc.weight);
        }
        if (pc.quartic_target_v_per_m4) {
            fill([&](const Moments& m) { return m.directional(4, theta); });
            push_row(rows, tag + ":quartic_u", coeffs,
                     *pc.quartic_target_v_per_m4, pm.directional(4, theta),
                     pc.weight);
        }
    }
    return rows;
}

}  // namespace

void PotentialConstraints::validate() const {
    if (!(voltage_bound_v > 0.0))
        throw std::invalid_argument("voltage bound must be positive");
    if (!(weight > 0.0))
        throw std::invalid_argument("constraint weight must be positive");
    bool double_well = quartic_target_v_per_m4 && *quartic_target_v_per_m4 > 0;
    if (axial_curvature_target_v_per_m2 <= 0.0 && !double_well)
        throw std::invalid_argument(
            "axial curvature must be positive for a confining well (or pair a "
            "non-positive curvature with a positive quartic target)");
    if (transverse_curvature_target_v_per_m2 &&
        *transverse_curvature_target_v_per_m2 <= 0.0)
        throw std::invalid_argument(
            "transverse curvature target must be positive");
}

double PotentialConstraints::curvature_from_frequency(double frequency_hz,
                                                      double mass_kg) {
    double omega = 2.0 * kPi * frequency_hz;
    return mass_kg * omega * omega / constants::elementary_charge;
}

double PotentialConstraints::frequency_from_curvature(
    double curvature_v_per_m2, double mass_kg) {
    if (curvature_v_per_m2 <= 0.0) return 0.0;
    return std::sqrt(curvature_v_per_m2 * constants::elementary_charge /
                     mass_kg) /
           (2.0 * kPi);
}

SolveReport solve_voltages(const ElectrodeBasis& basis,
                           const std::vector<PotentialConstraints>& wells,
                           double mass_kg) {
    if (wells.empty())
        throw std::invalid_argument("at least one well constraint is required");
    double bound = wells[0].voltage_bound_v;
    for (const auto& w : wells)
        if (w.voltage_bound_v != bound)
            throw std::invalid_argument(
                "all wells must share one voltage bound");

    ConstraintRows rows = build_rows(basis, wells, mass_kg);
    const Eigen::Index ne = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index nr = rows.a.rows();

    SolveReport report;
    report.constraint_names = rows.names;

    // Grow-only active set: solve the minimum-norm equality problem on the
    // free electrodes, then pin the worst bound violator until none remain.
    std::map<Eigen::Index, double> fixed;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ne);
    bool first_pass = true;
    while (true) {
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index e = 0; e < ne; ++e)
            if (!fixed.count(e)) free_idx.push_back(e);

        Eigen::VectorXd rhs = rows.b;
        for (const auto& [e, val] : fixed) rhs -= rows.a.col(e) * val;

        Eigen::VectorXd vf;
        if (!free_idx.empty()) {
            Eigen::MatrixXd af(nr, static_cast<Eigen::Index>(free_idx.size()));
            for (std::size_t k = 0; k < free_idx.size(); ++k)
                af.col(static_cast<Eigen::Index>(k)) =
                    rows.a.col(free_idx[k]);
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(af);
            if (first_pass) {
                report.rank = static_cast<int>(cod.rank());
                report.null_space_dimension =
                    static_cast<int>(ne) - report.rank;
                first_pass = false;
            }
            vf = cod.solve(rhs);
        } else if (first_pass) {
            report.rank = 0;
            report.null_space_dimension = 0;
            first_pass = false;
        }

        v = Eigen::VectorXd::Zero(ne);
        for (const auto& [e, val] : fixed) v(e) = val;
        for (std::size_t k = 0; k < free_idx.size(); ++k)
            v(free_idx[k]) = vf(static_cast<Eigen::Index>(k));

        // Worst violator; ties resolve to the lowest electrode index.
        Eigen::Index worst = -1;
        double worst_excess = 1e-9;
        for (std::size_t k = 0; k < free_idx.size(); ++k) {
            double excess = std::abs(vf(static_cast<Eigen::Index>(k))) - bound;
            if (excess > worst_excess) {
                worst_excess = excess;
                worst = free_idx[k];
            }
        }
        if (worst < 0 || fixed.size() == static_cast<std::size_t>(ne)) break;
        fixed[worst] = v(worst) > 0.0 ? bound : -bound;
        report.active_bounds.push_back(static_cast<int>(worst));
    }

    report.voltages.assign(static_cast<std::size_t>(ne), 0.0);
    for (Eigen::Index e = 0; e < ne; ++e)
        report.voltages[static_cast<std::size_t>(e)] = v(e);

    // Feasibility: every normalized constraint row satisfied to 1e-8
    // relative (absolute for nearly-zero targets).
    Eigen::VectorXd resid = rows.a * v - rows.b;
    report.constraint_residuals.resize(static_cast<std::size_t>(nr));
    report.feasible = true;
    double worst_ratio = 0.0;
    for (Eigen::Index r = 0; r < nr; ++r) {
        double rn = resid(r);
        report.constraint_residuals[static_cast<std::size_t>(r)] = rn;
        double tol = 1e-8 * std::max(1.0, std::abs(rows.b(r)));
        double ratio = std::abs(rn) / tol;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            report.max_violation = std::abs(rn);
            report.most_violated = rows.names[static_cast<std::size_t>(r)];
        }
        if (ratio > 1.0) report.feasible = false;
    }
    if (report.feasible) {
        report.max_violation = 0.0;
        report.most_violated.clear();
    }
    return report;
}

SolveReport solve_voltages(const ElectrodeBasis& basis,
                           const PotentialConstraints& well, double mass_kg) {
    return solve_voltages(basis, std::vector<PotentialConstraints>{well},
                          mass_kg);
}

double FilterModel::alpha() const {
    validate();
    return 1.0 - std::exp(-2.0 * kPi * cutoff_hz / update_rate_hz);
}

void FilterModel::validate() const {
    if (!(update_rate_hz > 0.0))
        throw std::invalid_argument("update rate must be positive");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < update_rate_hz / 2.0))
        throw std::invalid_argument(
            "filter cutoff must lie in (0, update_rate/2)");
}

double Waveform::duration_us() const {
    if (update_rate_hz <= 0.0) return 0.0;
    return static_cast<double>(step_count()) / update_rate_hz * 1e6;
}

void Waveform::validate() const {
    if (!(update_rate_hz > 0.0))
        throw std::invalid_argument("update rate must be positive");
    if (!(voltage_bound_v > 0.0))
        throw std::invalid_argument("voltage bound must be positive");
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].size() != electrode_names.size())
            throw std::invalid_argument("sample row " + std::to_string(s) +
                                        " has wrong electrode count");
        for (double x : samples[s])
            if (std::abs(x) > voltage_bound_v * (1.0 + 1e-12))
                throw std::invalid_argument("sample row " + std::to_string(s) +
                                            " exceeds the voltage bound");
    }
    if (filter) filter->validate();
}

std::size_t samples_for_duration(double duration_us, double update_rate_hz) {
    if (duration_us < 0.0 || !(update_rate_hz > 0.0))
        throw std::invalid_argument("duration must be >= 0 with positive rate");
    double x = duration_us * update_rate_hz / 1e6;
    double s = std::ceil(x - 1e-9);
    return s < 0.0 ? 0 : static_cast<std::size_t>(s);
}

namespace {

PotentialConstraints interpolate_constraints(const PotentialConstraints& from,
                                             const PotentialConstraints& to,
                                             double tau) {
    PotentialConstraints c = to;  // weight/bound metadata from the endpoint
    double s = 1.0 - tau;
    c.well_position_um = {s * from.well_position_um[0] + tau * to.well_position_um[0],
                          s * from.well_position_um[1] + tau * to.well_position_um[1]};
    c.weak_axis_angle_rad =
        s * from.weak_axis_angle_rad + tau * to.weak_axis_angle_rad;
    c.gradient_target_v_per_m =
        s * from.gradient_target_v_per_m + tau * to.gradient_target_v_per_m;
    c.axial_curvature_target_v_per_m2 =
        s * from.axial_curvature_target_v_per_m2 +
        tau * to.axial_curvature_target_v_per_m2;
    if (from.quartic_target_v_per_m4 || to.quartic_target_v_per_m4) {
        double qf = from.quartic_target_v_per_m4.value_or(0.0);
        double qt = to.quartic_target_v_per_m4.value_or(0.0);
        c.quartic_target_v_per_m4 = s * qf + tau * qt;
    } else {
        c.quartic_target_v_per_m4.reset();
    }
    if (from.transverse_curvature_target_v_per_m2 &&
        to.transverse_curvature_target_v_per_m2) {
        c.transverse_curvature_target_v_per_m2 =
            s * *from.transverse_curvature_target_v_per_m2 +
            tau * *to.transverse_curvature_target_v_per_m2;
    } else {
        c.transverse_curvature_target_v_per_m2.reset();
    }
    return c;
}

// Shared scaffolding for per-step independent solves assembled in schedule
// order. Throws for the first infeasible step.
Waveform solve_schedule(const ElectrodeBasis& basis,
                        const std::vector<PotentialConstraints>& schedule,
                        double mass_kg, Execution exec, double update_rate_hz,
                        double voltage_bound_v, const char* what,
                        std::vector<SolveReport>* reports_out) {
    const std::size_t steps = schedule.size();
    std::vector<SolveReport> reports(steps);
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(steps);
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < count; ++k)
            reports[static_cast<std::size_t>(k)] = solve_voltages(
                basis, schedule[static_cast<std::size_t>(k)], mass_kg);
    } else {
        for (std::ptrdiff_t k = 0; k < count; ++k)
            reports[static_cast<std::size_t>(k)] = solve_voltages(
                basis, schedule[static_cast<std::size_t>(k)], mass_kg);
    }
    for (std::size_t k = 0; k < steps; ++k)
        if (!reports[k].feasible)
            throw std::runtime_error(
                std::string(what) + ": step " + std::to_string(k) +
                " infeasible; most violated constraint: " +
                reports[k].most_violated);

    Waveform w;
    for (const auto& e : basis.electrodes()) w.electrode_names.push_back(e.name);
    w.update_rate_hz = update_rate_hz;
    w.voltage_bound_v = voltage_bound_v;
    w.samples.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k)
        w.samples.push_back(reports[k].voltages);
    if (reports_out) *reports_out = std::move(reports);
    return w;
}

}  // namespace

Waveform separation_ramp(const ElectrodeBasis& basis,
                         const PotentialConstraints& from,
                         const PotentialConstraints& to, std::size_t steps,
                         double mass_kg, Execution exec,
                         double update_rate_hz) {
    if (steps == 0)
        throw std::invalid_argument("separation ramp needs at least one step");
    from.validate();
    to.validate();
    if (from.voltage_bound_v != to.voltage_bound_v)
        throw std::invalid_argument("ramp endpoints must share voltage bounds");
    if (from.transverse_curvature_target_v_per_m2.has_value() !=
        to.transverse_curvature_target_v_per_m2.has_value())
        throw std::invalid_argument(
            "ramp endpoints must both (or neither) constrain the transverse "
            "curvature");

    std::vector<PotentialConstraints> schedule;
    schedule.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        double tau = steps == 1
                         ? 1.0
                         : static_cast<double>(k) /
                               static_cast<double>(steps - 1);
        schedule.push_back(interpolate_constraints(from, to, tau));
    }
    return solve_schedule(basis, schedule, mass_kg, exec, update_rate_hz,
                          from.voltage_bound_v, "separation ramp", nullptr);
}

RotationResult well_rotation_ramp(const ElectrodeBasis& basis,
                                  const PotentialConstraints& well_template,
                                  double angle_from_rad, double angle_to_rad,
                                  std::size_t steps, double gap_threshold_mhz,
                                  double mass_kg, Execution exec,
                                  double update_rate_hz) {
    if (steps == 0)
        throw std::invalid_argument("rotation ramp needs at least one step");
    well_template.validate();
    if (!well_template.transverse_curvature_target_v_per_m2)
        throw std::invalid_argument(
            "well rotation requires a transverse curvature target");

    RotationResult result;
    std::vector<PotentialConstraints> schedule;
    schedule.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        double tau = steps == 1
                         ? 1.0
                         : static_cast<double>(k) /
                               static_cast<double>(steps - 1);
        PotentialConstraints c = well_template;
        c.weak_axis_angle_rad =
            (1.0 - tau) * angle_from_rad + tau * angle_to_rad;
        schedule.push_back(c);
        result.angles_rad.push_back(c.weak_axis_angle_rad);
    }
    result.waveform =
        solve_schedule(basis, schedule, mass_kg, exec, update_rate_hz,
                       well_template.voltage_bound_v, "well rotation", nullptr);

    // Re-diagonalize the in-plane Hessian at every step; track the gap and
    // the continuity of the low-mode axis.
    result.min_gap_mhz = std::numeric_limits<double>::infinity();
    std::array<double, 2> prev_axis{0.0, 0.0};
    bool have_prev = false;
    for (std::size_t k = 0; k < steps; ++k) {
        Moments m = moments_at(basis, well_template.well_position_um,
                               result.waveform.samples[k], mass_kg);
        double axx = m.d(2, 0), axz = m.d(1, 1), azz = m.d(0, 2);
        double tr = axx + azz;
        double disc = std::sqrt((axx - azz) * (axx - azz) + 4.0 * axz * axz);
        double lo = 0.5 * (tr - disc);
        double hi = 0.5 * (tr + disc);
        double f_lo = PotentialConstraints::frequency_from_curvature(lo, mass_kg);
        double f_hi = PotentialConstraints::frequency_from_curvature(hi, mass_kg);
        double gap_mhz = (f_hi - f_lo) * 1e-6;
        result.mode_gap_mhz.push_back(gap_mhz);
        if (gap_mhz < result.min_gap_mhz) {
            result.min_gap_mhz = gap_mhz;
            result.min_gap_step = k;
        }

        // Eigenvector of the lower eigenvalue; pick the better-conditioned
        // of the two algebraic forms (each degenerates when the axes align
        // with a coordinate direction).
        std::array<double, 2> v1{axz, lo - axx};
        std::array<double, 2> v2{lo - azz, axz};
        std::array<double, 2> axis =
            std::hypot(v1[0], v1[1]) >= std::hypot(v2[0], v2[1]) ? v1 : v2;
        double n = std::hypot(axis[0], axis[1]);
        if (n > 0.0) {
            axis[0] /= n;
            axis[1] /= n;
        } else {
            axis = {0.0, 1.0};  // isotropic curvature: any axis
        }
        if (have_prev) {
            double overlap =
                std::abs(axis[0] * prev_axis[0] + axis[1] * prev_axis[1]);
            result.min_eigenvector_overlap =
                std::min(result.min_eigenvector_overlap, overlap);
        }
        prev_axis = axis;
        have_prev = true;
    }
    result.gap_below_threshold = result.min_gap_mhz < gap_threshold_mhz;
    return result;
}

Waveform apply_filter(const Waveform& waveform, const FilterModel& filter) {
    filter.validate();
    double a = filter.alpha();
    Waveform out = waveform;
    out.filter = filter;
    const std::size_t ne = waveform.electrode_names.size();
    for (std::size_t e = 0; e < ne; ++e) {
        double y = 0.0;
        for (std::size_t k = 0; k < out.samples.size(); ++k) {
            double x = waveform.samples[k][e];
            y = k == 0 ? x : a * x + (1.0 - a) * y;  // settled start
            out.samples[k][e] = y;
        }
    }
    return out;
}

FilterResult precompensate(const Waveform& waveform,
                           const FilterModel& filter) {
    filter.validate();
    double a = filter.alpha();
    FilterResult result;
    result.waveform = waveform;
    result.waveform.filter = filter;
    const std::size_t ne = waveform.electrode_names.size();
    double bound = waveform.voltage_bound_v;
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t k = waveform.samples.size(); k-- > 0;) {
            double x = waveform.samples[k][e];
            double w =
                k == 0 ? x : (x - (1.0 - a) * waveform.samples[k - 1][e]) / a;
            if (std::abs(w) > bound) {
                w = std::clamp(w, -bound, bound);
                ++result.clipped_samples;
            }
            result.waveform.samples[k][e] = w;
        }
    }
    return result;
}

std::string waveform_to_csv(const Waveform& waveform) {
    std::string out = "time_us";
    for (const auto& name : waveform.electrode_names) out += ",V_" + name;
    out += '\n';
    for (std::size_t k = 0; k < waveform.samples.size(); ++k) {
        out += detail::format_double(static_cast<double>(k) * 1e6 /
                                     waveform.update_rate_hz);
        for (double v : waveform.samples[k]) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string waveform_header_json(const Waveform& waveform) {
    json j;
    j["format"] = "qccd-waveform";
    j["version"] = 1;
    j["update_rate_hz"] = waveform.update_rate_hz;
    j["voltage_bound_v"] = waveform.voltage_bound_v;
    j["electrodes"] = waveform.electrode_names;
    j["samples"] = waveform.samples.size();
    if (waveform.filter) {
        json f;
        f["kind"] = "single_pole_low_pass";
        f["cutoff_hz"] = waveform.filter->cutoff_hz;
        f["update_rate_hz"] = waveform.filter->update_rate_hz;
        j["filter"] = f;
    } else {
        j["filter"] = nullptr;
    }
    return j.dump(2) + "\n";
}

Waveform waveform_from_text(const std::string& csv_text,
                            const std::string& header_json_text) {
    json j = json::parse(header_json_text);
    if (j.value("format", "") != "qccd-waveform")
        throw std::invalid_argument("not a waveform document");
    Waveform w;
    w.update_rate_hz = j.at("update_rate_hz").get<double>();
    w.voltage_bound_v = j.at("voltage_bound_v").get<double>();
    w.electrode_names = j.at("electrodes").get<std::vector<std::string>>();
    if (!j.at("filter").is_null()) {
        FilterModel f;
        f.cutoff_hz = j.at("filter").at("cutoff_hz").get<double>();
        f.update_rate_hz = j.at("filter").at("update_rate_hz").get<double>();
        w.filter = f;
    }

    std::istringstream in(csv_text);
    std::string line;
    std::size_t row = 0;
    std::string expect_header = "time_us";
    for (const auto& name : w.electrode_names) expect_header += ",V_" + name;
    while (std::getline(in, line)) {
        ++row;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        if (row == 1) {
            if (line != expect_header)
                throw std::runtime_error(
                    "waveform CSV row 1: header does not match electrode "
                    "list");
            continue;
        }
        std::vector<double> values;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            std::string field = line.substr(
                start, comma == std::string::npos ? comma : comma - start);
            try {
                std::size_t used = 0;
                values.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw std::runtime_error("waveform CSV row " +
                                         std::to_string(row) +
                                         ": malformed numeric field");
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (values.size() != w.electrode_names.size() + 1)
            throw std::runtime_error("waveform CSV row " + std::to_string(row) +
                                     ": wrong field count");
        w.samples.emplace_back(values.begin() + 1, values.end());
    }
    std::size_t declared = j.at("samples").get<std::size_t>();
    if (declared != w.samples.size())
        throw std::runtime_error("waveform header declares " +
                                 std::to_string(declared) + " samples, CSV has " +
                                 std::to_string(w.samples.size()));
    return w;
}

void save_waveform(const Waveform& waveform, const std::string& csv_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
    csv << waveform_to_csv(waveform);
    std::string header_path = csv_path + ".json";
    std::ofstream header(header_path);
    if (!header) throw std::runtime_error("cannot write '" + header_path + "'");
    header << waveform_header_json(waveform);
}

Waveform load_waveform(const std::string& csv_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot read '" + csv_path + "'");
    std::stringstream csv_text;
    csv_text << csv.rdbuf();
    std::string header_path = csv_path + ".json";
    std::ifstream header(header_path);
    if (!header) throw std::runtime_error("cannot read '" + header_path + "'");
    std::stringstream header_text;
    header_text << header.rdbuf();
    return waveform_from_text(csv_text.str(), header_text.str());
}

WellMeasurement measure_well(const ElectrodeBasis& basis,
                             const std::vector<double>& voltages,
                             std::array<double, 2> start_um, double mass_kg) {
    WellMeasurement out;
    std::array<double, 2> p = start_um;
    for (int iter = 0; iter < 60; ++iter) {
        Moments m = moments_at(basis, p, voltages, mass_kg);
        double gx = m.d(1, 0), gz = m.d(0, 1);
        double axx = m.d(2, 0), axz = m.d(1, 1), azz = m.d(0, 2);
        double det = axx * azz - axz * axz;
        if (std::abs(det) < 1e-300) break;
        double dx_m = -(azz * gx - axz * gz) / det;
        double dz_m = -(-axz * gx + axx * gz) / det;
        p[0] += dx_m * 1e6;
        p[1] += dz_m * 1e6;
        if (std::hypot(dx_m, dz_m) < 1e-15) {
            out.converged = true;
            break;
        }
    }
    out.position_um = p;
    Moments m = moments_at(basis, p, voltages, mass_kg);
    double axx = m.d(2, 0), axz = m.d(1, 1), azz = m.d(0, 2);
    double tr = axx + azz;
    double disc = std::sqrt((axx - azz) * (axx - azz) + 4.0 * axz * axz);
    double lo = 0.5 * (tr - disc);
    double hi = 0.5 * (tr + disc);
    out.axial_frequency_mhz =
        PotentialConstraints::frequency_from_curvature(lo, mass_kg) * 1e-6;
    out.transverse_frequency_mhz =
        PotentialConstraints::frequency_from_curvature(hi, mass_kg) * 1e-6;
    std::array<double, 2> v1{axz, lo - axx};
    std::array<double, 2> v2{lo - azz, axz};
    std::array<double, 2> axis =
        std::hypot(v1[0], v1[1]) >= std::hypot(v2[0], v2[1]) ? v1 : v2;
    if (std::hypot(axis[0], axis[1]) == 0.0) axis = {0.0, 1.0};
    double angle = std::atan2(axis[0], axis[1]);  // from +z toward +x
    if (angle < 0.0) angle += kPi;
    if (angle >= kPi) angle -= kPi;
    out.weak_axis_angle_rad = angle;
    return out;
}

std::vector<double> axial_minima(const ElectrodeBasis& basis,
                                 const std::vector<double>& voltages,
                                 std::array<double, 2> center_um,
                                 double angle_rad, double half_range_um,
                                 double mass_kg) {
    if (!(half_range_um > 0.0))
        throw std::invalid_argument("scan range must be positive");
    const double step_um = 0.5;
    double ux = std::sin(angle_rad);
    double uz = std::cos(angle_rad);
    auto at_offset = [&](double s_um) {
        return std::array<double, 2>{center_um[0] + s_um * ux,
                                     center_um[1] + s_um * uz};
    };
    std::size_t count =
        static_cast<std::size_t>(std::floor(2.0 * half_range_um / step_um)) + 1;
    std::vector<double> value(count);
    for (std::size_t i = 0; i < count; ++i)
        value[i] = moments_at(basis, at_offset(-half_range_um + step_um *
                                                                   static_cast<double>(i)),
                              voltages, mass_kg)
                       .value();

    std::vector<double> minima;
    for (std::size_t i = 1; i + 1 < count; ++i) {
        if (!(value[i] < value[i - 1] && value[i] <= value[i + 1])) continue;
        double s = -half_range_um + step_um * static_cast<double>(i);
        // 1-D Newton refinement on the directional derivative.
        for (int it = 0; it < 12; ++it) {
            Moments m = moments_at(basis, at_offset(s), voltages, mass_kg);
            double g = m.directional(1, angle_rad);
            double c = m.directional(2, angle_rad);
            if (!(c > 0.0)) break;
            double delta_um = -g / c * 1e6;
            s += delta_um;
            if (std::abs(delta_um) < 1e-9) break;
        }
        if (s < -half_range_um || s > half_range_um) continue;
        bool duplicate = false;
        for (double existing : minima)
            if (std::abs(existing - s) < 0.05) duplicate = true;
        if (!duplicate) minima.push_back(s);
    }
    std::sort(minima.begin(), minima.end());
    return minima;
}

}  // namespace qccd::wave
