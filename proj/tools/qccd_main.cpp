// qccd: plan ion transport sequences, simulate their excitation and phase
// budgets, fit sideband thermometry data, synthesize datasets, and solve
// electrode waveforms — all deterministic for fixed seeds and inputs.

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qccd/fit.hpp"
#include "qccd/ledger.hpp"
#include "qccd/modes.hpp"
#include "qccd/primitives.hpp"
#include "qccd/sequence.hpp"
#include "qccd/thermometry.hpp"
#include "qccd/trap_graph.hpp"
#include "qccd/waveform.hpp"
#include "qccd/well_config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

constexpr double kPi = 3.14159265358979323846;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        std::string field = text.substr(
            start, comma == std::string::npos ? comma : comma - start);
        if (!field.empty()) out.push_back(field);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Durations accept "310", "310us", "1.1ms" or "0.002s"; plain numbers are
// microseconds.
double parse_duration_us(std::string text) {
    double scale = 1.0;
    auto ends_with = [&](const char* suffix) {
        std::size_t n = std::string(suffix).size();
        return text.size() > n &&
               text.compare(text.size() - n, n, suffix) == 0;
    };
    if (ends_with("us")) {
        text.resize(text.size() - 2);
    } else if (ends_with("ms")) {
        scale = 1e3;
        text.resize(text.size() - 2);
    } else if (ends_with("s") && !ends_with("us") && !ends_with("ms")) {
        scale = 1e6;
        text.resize(text.size() - 1);
    }
    std::size_t used = 0;
    double value = std::stod(text, &used);
    if (used != text.size())
        throw std::invalid_argument("malformed duration '" + text + "'");
    return value * scale;
}

std::array<double, 2> parse_position_um(const std::string& text) {
    auto parts = split_list(text);
    if (parts.size() != 2)
        throw std::invalid_argument("position must be 'x,z' in um");
    return {std::stod(parts[0]), std::stod(parts[1])};
}

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Shortest round-trip decimal form, for byte-stable CSV output.
std::string csv_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

qccd::shuttle::PrimitiveLibrary load_library(const std::string& override_path) {
    return qccd::shuttle::PrimitiveLibrary::load(
        qccd::shuttle::PrimitiveLibrary::default_path(override_path));
}

void print_sequence_summary(const qccd::shuttle::ShuttleSequence& seq) {
    std::cout << seq.chain_string() << "\n";
    auto tot = qccd::shuttle::totals(seq);
    std::cout << "total duration: " << fixed3(tot.duration_us) << " us\n";
    for (const auto& [ion, dist] : tot.per_ion_distance_um)
        std::cout << "distance(" << ion << "): " << fixed3(dist) << " um\n";
    for (const auto& [ion, place] : qccd::shuttle::net_permutation(seq))
        std::cout << "ion " << ion << ": " << place.start_zone << "["
                  << place.start_index << "] -> " << place.end_zone << "["
                  << place.end_index << "]\n";
}

int run_plan(const std::string& kind, const std::string& ions_csv,
             const std::string& target, const std::string& table,
             const std::string& out_path) {
    auto library = load_library(table);
    auto ions = split_list(ions_csv);
    if (ions.size() != 2) {
        std::cerr << "error: --ions needs exactly two comma-separated labels"
                  << "\n";
        return kExitValidation;
    }
    qccd::shuttle::ShuttleSequence seq;
    try {
        if (kind == "reorder") {
            seq = qccd::shuttle::compile_reorder(ions[0], ions[1], library);
        } else {
            seq = qccd::shuttle::compile_individual_address(ions[0], ions[1],
                                                            target, library);
        }
    } catch (const std::exception& e) {
        std::cerr << "plan failed: " << e.what() << "\n";
        return kExitValidation;
    }
    auto report = qccd::shuttle::validate_sequence(seq);
    if (!report) {
        std::cerr << "validation failed: " << report.message << "\n";
        return kExitValidation;
    }
    print_sequence_summary(seq);
    if (!out_path.empty())
        write_file(out_path, qccd::shuttle::sequence_to_json_text(seq));
    return kExitOk;
}

int run_simulate(const std::string& seq_path, const std::string& table,
                 bool check_table1, const std::string& json_path,
                 const std::string& csv_path, double idle_heating,
                 double penalty, double penalty_sigma, double detuning_hz,
                 const std::vector<std::string>& acz_entries,
                 double b_gradient, double c2) {
    auto library = load_library(table);

    if (check_table1) {
        bool all_ok = true;
        for (const auto& check : qccd::motion::check_table(library)) {
            std::cout << "row " << check.table_row << " " << check.primitive
                      << ": predicted "
                      << fixed3(check.predicted.value) << " measured "
                      << fixed3(check.measured.nbar.value) << "("
                      << fixed3(check.measured.nbar.sigma) << ")"
                      << (check.baseline_row ? " [baseline]" : "")
                      << (check.within_sigma ? " PASS" : " FAIL") << "\n";
            all_ok = all_ok && check.within_sigma;
        }
        if (!all_ok) return kExitValidation;
        if (seq_path.empty()) return kExitOk;
    }
    if (seq_path.empty()) {
        std::cerr << "error: --seq is required\n";
        return kExitValidation;
    }

    auto seq = qccd::shuttle::sequence_from_json_text(read_file(seq_path));
    auto report_check = qccd::shuttle::validate_sequence(seq);
    if (!report_check) {
        std::cerr << "sequence invalid: " << report_check.message << "\n";
        return kExitValidation;
    }

    auto config = qccd::motion::default_ledger_config(library, seq.initial);
    config.idle_heating_rate_per_s = idle_heating;
    config.concatenation_penalty = qccd::Quantity{penalty, penalty_sigma};

    qccd::motion::PhaseSources phases;
    phases.constant_detuning_hz = detuning_hz;
    for (const auto& entry : acz_entries) {
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--acz expects zone=Hz, got '" +
                                        entry + "'");
        phases.acz_profile_hz[entry.substr(0, eq)] =
            std::stod(entry.substr(eq + 1));
    }
    if (b_gradient != 0.0) {
        // Quadratic field shift per zone, referenced to the interaction
        // zone where the qubit frequency is calibrated.
        for (const auto& [zone, shift] : qccd::motion::zeeman_zone_profile(
                 qccd::trap::default_trap(), "S", b_gradient, c2))
            phases.acz_profile_hz[zone] += shift;
    }

    auto report = qccd::motion::simulate_sequence(seq, config, phases);
    std::string json_text = report.to_json_text();
    if (json_path.empty())
        std::cout << json_text;
    else
        write_file(json_path, json_text);

    if (!csv_path.empty()) {
        std::string csv =
            "mode,baseline,baseline_sigma,extra,extra_sigma,total,total_sigma,"
            "open\n";
        for (const auto& [key, account] : report.modes) {
            csv += key + ",";
            if (account.baseline) {
                csv += csv_double(account.baseline->value) + "," +
                       csv_double(account.baseline->sigma) + ",";
            } else {
                csv += ",,";
            }
            auto total = account.total();
            csv += csv_double(account.extra.value) + "," +
                   csv_double(account.extra.sigma) + "," +
                   csv_double(total.value) + "," + csv_double(total.sigma) +
                   "," + (account.open ? "true" : "false") + "\n";
        }
        write_file(csv_path, csv);
    }
    return kExitOk;
}

qccd::thermo::Crystal default_crystal(std::size_t mode_count) {
    return mode_count == 1 ? qccd::thermo::Crystal::OneIonOneMode
                           : qccd::thermo::Crystal::TwoIonsSameSpecies;
}

int run_fit(const std::vector<std::string>& data_paths,
            const std::string& distribution, const std::string& crystal_kind,
            const std::vector<std::string>& fix,
            const std::vector<std::string>& floated, double omega0,
            double gamma0, const std::vector<std::string>& nbar0,
            int max_iterations, const std::string& json_path,
            const std::string& residual_path) {
    std::vector<qccd::thermo::SidebandDataset> datasets;
    for (const auto& path : data_paths)
        datasets.push_back(qccd::thermo::load_dataset(path));

    qccd::thermo::Crystal kind =
        crystal_kind.empty() ? datasets[0].crystal
                             : qccd::thermo::crystal_from_string(crystal_kind);
    auto dist = qccd::distribution_from_string(distribution);

    auto initial = qccd::thermo::initial_guess(datasets, kind, dist);
    if (omega0 > 0.0) initial.omega_rad_s = omega0;
    if (gamma0 >= 0.0) initial.gamma_per_s = gamma0;
    for (const auto& entry : nbar0) {
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--nbar0 expects label=value");
        initial.nbar[entry.substr(0, eq)] = std::stod(entry.substr(eq + 1));
    }

    auto names = qccd::thermo::parameter_names(initial);
    qccd::thermo::FitOptions options;
    options.max_iterations = max_iterations;
    options.free_mask.assign(names.size(), 1);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i].rfind("eta(", 0) == 0) options.free_mask[i] = 0;
    auto set_mask = [&](const std::vector<std::string>& which,
                        std::uint8_t value) {
        for (const auto& name : which) {
            bool found = false;
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == name ||
                    names[i].rfind(name + "(", 0) == 0) {
                    options.free_mask[i] = value;
                    found = true;
                }
            if (!found)
                throw std::invalid_argument("unknown parameter '" + name +
                                            "'");
        }
    };
    set_mask(fix, 0);
    set_mask(floated, 1);

    auto result = qccd::thermo::fit(datasets, kind, initial, options);
    std::string json_text = result.to_json_text();
    if (json_path.empty())
        std::cout << json_text;
    else
        write_file(json_path, json_text);

    if (!residual_path.empty()) {
        std::string csv = "dataset,t_us,population,residual_weighted\n";
        for (std::size_t d = 0; d < datasets.size(); ++d)
            for (std::size_t i = 0; i < datasets[d].points.size(); ++i) {
                csv += std::to_string(d) + "," +
                       csv_double(datasets[d].points[i].t_us) + "," +
                       csv_double(datasets[d].points[i].population) + "," +
                       csv_double(result.residuals[d][i]) + "\n";
            }
        write_file(residual_path, csv);
    }
    return result.converged ? kExitOk : kExitInfeasible;
}

int run_synth(const std::string& crystal_kind, const std::string& modes_csv,
              const std::string& drive, const std::string& kappa_sel,
              const std::string& nbar_csv, const std::string& eta_csv,
              double omega, double gamma, const std::string& distribution,
              double tmax_us, int points, long shots, std::uint64_t seed,
              const std::string& out_prefix) {
    qccd::thermo::FlopModelParams params;
    params.omega_rad_s = omega;
    params.gamma_per_s = gamma;
    params.distribution = qccd::distribution_from_string(distribution);
    params.modes = split_list(modes_csv);

    auto assign = [&](const std::string& csv, const char* what)
        -> std::vector<double> {
        auto parts = split_list(csv);
        std::vector<double> values;
        for (const auto& p : parts) values.push_back(std::stod(p));
        if (values.size() == 1 && params.modes.size() > 1)
            values.assign(params.modes.size(), values[0]);
        if (values.size() != params.modes.size())
            throw std::invalid_argument(std::string(what) +
                                        " must list one value per mode");
        return values;
    };
    auto nbars = assign(nbar_csv, "--nbar");
    auto etas = assign(eta_csv, "--eta");
    for (std::size_t i = 0; i < params.modes.size(); ++i) {
        params.nbar[params.modes[i]] = nbars[i];
        params.eta[params.modes[i]] = etas[i];
    }

    qccd::thermo::Crystal kind =
        crystal_kind.empty() ? default_crystal(params.modes.size())
                             : qccd::thermo::crystal_from_string(crystal_kind);
    std::string driven = drive.empty() ? params.modes[0] : drive;

    if (points < 1) throw std::invalid_argument("--points must be >= 1");
    std::vector<double> times_us(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        times_us[static_cast<std::size_t>(i)] =
            tmax_us * static_cast<double>(i + 1) / static_cast<double>(points);

    struct Job {
        int kappa;
        const char* suffix;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    if (kappa_sel == "bsb" || kappa_sel == "both")
        jobs.push_back({+1, "_bsb", seed});
    if (kappa_sel == "rsb" || kappa_sel == "both")
        jobs.push_back({-1, "_rsb", seed + 1});
    if (jobs.empty())
        throw std::invalid_argument("--kappa must be bsb, rsb, or both");

    for (const auto& job : jobs) {
        auto ds = qccd::thermo::synthesize_dataset(
            params, kind, driven, job.kappa, times_us, shots, job.seed);
        std::string path = out_prefix + job.suffix + ".csv";
        qccd::thermo::save_dataset(ds, path);
        std::cout << "wrote " << path << " (+.json)\n";
    }
    return kExitOk;
}

qccd::wave::ElectrodeBasis load_basis(const std::string& path) {
    if (path.empty()) return qccd::wave::ElectrodeBasis::synthetic_default();
    return qccd::wave::ElectrodeBasis::from_json_text(read_file(path));
}

void print_solve_report(const qccd::wave::SolveReport& report) {
    std::cout << "feasible: " << (report.feasible ? "yes" : "no")
              << ", rank " << report.rank << ", null-space dimension "
              << report.null_space_dimension << ", active bounds "
              << report.active_bounds.size() << "\n";
    if (!report.feasible)
        std::cout << "most violated: " << report.most_violated << "\n";
}

int run_waveform_solve(const std::string& basis_path,
                       const std::string& position, double frequency_mhz,
                       double angle_deg, double transverse_mhz, double quartic,
                       bool has_quartic, double bias, double bound,
                       const std::string& out_path) {
    auto basis = load_basis(basis_path);
    qccd::wave::PotentialConstraints pc;
    pc.well_position_um = parse_position_um(position);
    pc.weak_axis_angle_rad = angle_deg * kPi / 180.0;
    pc.axial_curvature_target_v_per_m2 =
        qccd::wave::PotentialConstraints::curvature_from_frequency(
            frequency_mhz * 1e6, qccd::constants::mass_be9);
    if (transverse_mhz > 0.0)
        pc.transverse_curvature_target_v_per_m2 =
            qccd::wave::PotentialConstraints::curvature_from_frequency(
                transverse_mhz * 1e6, qccd::constants::mass_be9);
    if (has_quartic) pc.quartic_target_v_per_m4 = quartic;
    pc.gradient_target_v_per_m = bias;
    pc.voltage_bound_v = bound;
    pc.validate();

    auto report = qccd::wave::solve_voltages(basis, pc);
    print_solve_report(report);
    if (!report.feasible) return kExitInfeasible;

    auto measured = qccd::wave::measure_well(basis, report.voltages,
                                             pc.well_position_um);
    std::cout << "well: (" << fixed3(measured.position_um[0]) << ", "
              << fixed3(measured.position_um[1]) << ") um, axial "
              << fixed3(measured.axial_frequency_mhz) << " MHz, transverse "
              << fixed3(measured.transverse_frequency_mhz) << " MHz, angle "
              << fixed3(measured.weak_axis_angle_rad * 180.0 / kPi)
              << " deg\n";

    if (!out_path.empty()) {
        qccd::wave::Waveform w;
        for (const auto& e : basis.electrodes())
            w.electrode_names.push_back(e.name);
        w.voltage_bound_v = bound;
        w.samples.push_back(report.voltages);
        qccd::wave::save_waveform(w, out_path);
        std::cout << "wrote " << out_path << " (+.json)\n";
    }
    return kExitOk;
}

int run_waveform_separate(const std::string& basis_path,
                          const std::string& duration, std::size_t steps,
                          double rate, const std::string& position,
                          double frequency_mhz, double separation_um,
                          double angle_deg, double bound, bool parallel,
                          const std::string& out_path) {
    auto basis = load_basis(basis_path);
    if (steps == 0)
        steps = qccd::wave::samples_for_duration(parse_duration_us(duration),
                                                 rate);
    double mass = qccd::constants::mass_be9;
    double curvature =
        qccd::wave::PotentialConstraints::curvature_from_frequency(
            frequency_mhz * 1e6, mass);

    qccd::wave::PotentialConstraints from;
    from.well_position_um = parse_position_um(position);
    from.weak_axis_angle_rad = angle_deg * kPi / 180.0;
    from.axial_curvature_target_v_per_m2 = curvature;
    from.quartic_target_v_per_m4 = 0.0;
    from.voltage_bound_v = bound;

    // Endpoint double well: local curvature at each minimum matches the
    // requested frequency; minima sit at +-sqrt(-6 c2 / c4).
    qccd::wave::PotentialConstraints to = from;
    double c2_end = -curvature / 2.0;
    double half_sep_m = separation_um * 0.5 * 1e-6;
    to.axial_curvature_target_v_per_m2 = c2_end;
    to.quartic_target_v_per_m4 = -6.0 * c2_end / (half_sep_m * half_sep_m);

    qccd::wave::Waveform w;
    try {
        w = qccd::wave::separation_ramp(
            basis, from, to, steps, mass,
            parallel ? qccd::Execution::Parallel : qccd::Execution::Serial,
            rate);
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return kExitInfeasible;
    }
    std::cout << "samples: " << w.step_count() << "\n";

    auto minima = qccd::wave::axial_minima(basis, w.samples.back(),
                                           from.well_position_um,
                                           from.weak_axis_angle_rad, 400.0);
    if (minima.size() >= 2)
        std::cout << "final minima separation: "
                  << fixed3(minima.back() - minima.front()) << " um\n";

    if (!out_path.empty()) {
        qccd::wave::save_waveform(w, out_path);
        std::cout << "wrote " << out_path << " (+.json)\n";
    }
    return kExitOk;
}

int run_waveform_rotate(const std::string& basis_path, std::size_t steps,
                        double from_deg, double to_deg, double frequency_mhz,
                        double transverse_mhz, const std::string& position,
                        double gap_threshold_mhz, double bound, bool parallel,
                        const std::string& out_path) {
    auto basis = load_basis(basis_path);
    double mass = qccd::constants::mass_be9;
    qccd::wave::PotentialConstraints tmpl;
    tmpl.well_position_um = parse_position_um(position);
    tmpl.axial_curvature_target_v_per_m2 =
        qccd::wave::PotentialConstraints::curvature_from_frequency(
            frequency_mhz * 1e6, mass);
    tmpl.transverse_curvature_target_v_per_m2 =
        qccd::wave::PotentialConstraints::curvature_from_frequency(
            transverse_mhz * 1e6, mass);
    tmpl.voltage_bound_v = bound;

    qccd::wave::RotationResult result;
    try {
        result = qccd::wave::well_rotation_ramp(
            basis, tmpl, from_deg * kPi / 180.0, to_deg * kPi / 180.0, steps,
            gap_threshold_mhz, mass,
            parallel ? qccd::Execution::Parallel : qccd::Execution::Serial);
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return kExitInfeasible;
    }
    std::cout << "steps: " << result.waveform.step_count() << "\n";
    std::cout << "min mode gap: " << fixed3(result.min_gap_mhz)
              << " MHz at step " << result.min_gap_step
              << (result.gap_below_threshold ? " (BELOW THRESHOLD)" : "")
              << "\n";
    std::cout << "min eigenvector overlap: "
              << fixed3(result.min_eigenvector_overlap) << "\n";
    if (!out_path.empty()) {
        qccd::wave::save_waveform(result.waveform, out_path);
        std::cout << "wrote " << out_path << " (+.json)\n";
    }
    return kExitOk;
}

int run_waveform_filter(const std::string& in_path, double cutoff_hz,
                        bool inverse, const std::string& out_path) {
    auto w = qccd::wave::load_waveform(in_path);
    qccd::wave::FilterModel filter;
    filter.cutoff_hz = cutoff_hz;
    filter.update_rate_hz = w.update_rate_hz;
    filter.validate();
    qccd::wave::Waveform out;
    if (inverse) {
        auto result = qccd::wave::precompensate(w, filter);
        out = std::move(result.waveform);
        std::cout << "clipped samples: " << result.clipped_samples << "\n";
    } else {
        out = qccd::wave::apply_filter(w, filter);
    }
    qccd::wave::save_waveform(out, out_path);
    std::cout << "wrote " << out_path << " (+.json)\n";
    return kExitOk;
}

int run_topology(const std::string& table, const std::string& out_path) {
    auto graph = qccd::trap::default_trap();
    graph.validate();
    // Cross-check the primitive table against the graph when available;
    // the topology is still printable without a reachable table file.
    try {
        auto library = load_library(table);
        library.validate_against(graph);
    } catch (const std::runtime_error&) {
    }
    std::string text = graph.to_json();
    if (out_path.empty())
        std::cout << text;
    else
        write_file(out_path, text);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Ion-transport sequence planner, excitation/phase ledger, sideband "
        "thermometry fitter, and electrode waveform solver"};
    app.require_subcommand(1);

    std::string table;
    app.add_option("--table", table,
                   "Primitive-table JSON (overrides the built-in default and "
                   "the QCCD_TABLE1 environment variable)");

    // --- plan ---------------------------------------------------------
    auto* plan = app.add_subcommand("plan", "Compile a transport sequence");
    plan->require_subcommand(1);
    std::string plan_ions, plan_target, plan_out;
    auto* plan_reorder =
        plan->add_subcommand("reorder", "Two-ion junction reorder (swap)");
    plan_reorder->add_option("--ions", plan_ions, "Two ion labels, e.g. a,b")
        ->required();
    plan_reorder->add_option("--out", plan_out, "Write sequence JSON here");
    auto* plan_address = plan->add_subcommand(
        "address", "Individual addressing round trip for one ion");
    plan_address
        ->add_option("--ions", plan_ions, "Ions in wells A,B, e.g. a,b")
        ->required();
    plan_address->add_option("--target", plan_target, "Ion to park for access")
        ->required();
    plan_address->add_option("--out", plan_out, "Write sequence JSON here");

    // --- simulate ------------------------------------------------------
    auto* simulate = app.add_subcommand(
        "simulate", "Run the excitation/phase ledger over a sequence");
    std::string sim_seq, sim_json, sim_csv;
    bool sim_check = false;
    double sim_idle = 0.0, sim_penalty = 0.0, sim_penalty_sigma = 0.0;
    double sim_detuning = 0.0, sim_bgrad = 0.0, sim_c2 = 0.305;
    std::vector<std::string> sim_acz;
    simulate->add_option("--seq", sim_seq, "Sequence JSON from 'plan'");
    simulate->add_flag("--check-table1", sim_check,
                       "Recompute every stored characterization run and "
                       "compare with its measured occupation");
    simulate->add_option("--json", sim_json, "Write the ledger JSON here");
    simulate->add_option("--csv", sim_csv, "Write a per-mode CSV summary");
    simulate->add_option("--idle-heating", sim_idle,
                         "Quanta per second added to open modes while idling");
    simulate->add_option("--penalty", sim_penalty,
                         "Extra quanta per step boundary");
    simulate->add_option("--penalty-sigma", sim_penalty_sigma,
                         "Uncertainty of --penalty");
    simulate->add_option("--detuning", sim_detuning,
                         "Constant qubit detuning in Hz");
    simulate->add_option("--acz", sim_acz,
                         "Zone-dependent shift, zone=Hz (repeatable)");
    simulate->add_option("--b-gradient", sim_bgrad,
                         "Magnetic field gradient in T/m");
    simulate->add_option("--c2", sim_c2,
                         "Second-order field sensitivity in Hz/uT^2");

    // --- fit -----------------------------------------------------------
    auto* fit_cmd = app.add_subcommand(
        "fit", "Fit flop models to sideband datasets (joint, weighted)");
    std::vector<std::string> fit_data, fit_fix, fit_float, fit_nbar0;
    std::string fit_dist = "thermal", fit_crystal, fit_json, fit_resid;
    double fit_omega0 = 0.0, fit_gamma0 = -1.0;
    int fit_maxiter = 200;
    fit_cmd->add_option("--data", fit_data, "Dataset CSV (repeatable)")
        ->required();
    fit_cmd->add_option("--distribution", fit_dist,
                        "thermal or coherent population model");
    fit_cmd->add_option("--crystal", fit_crystal,
                        "Override the crystal kind from the sidecar");
    fit_cmd->add_option("--fix", fit_fix,
                        "Parameter (name or family) to hold fixed");
    fit_cmd->add_option("--float", fit_float,
                        "Parameter to free (eta is fixed by default)");
    fit_cmd->add_option("--omega0", fit_omega0, "Initial omega (rad/s)");
    fit_cmd->add_option("--gamma0", fit_gamma0, "Initial gamma (1/s)");
    fit_cmd->add_option("--nbar0", fit_nbar0,
                        "Initial occupation, label=value (repeatable)");
    fit_cmd->add_option("--max-iter", fit_maxiter, "Iteration cap");
    fit_cmd->add_option("--json", fit_json, "Write the fit report here");
    fit_cmd->add_option("--residuals", fit_resid,
                        "Write weighted residual CSV here");

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand(
        "synth", "Synthesize sideband datasets from the forward model");
    std::string sy_crystal, sy_modes = "axial", sy_drive, sy_kappa = "both";
    std::string sy_nbar = "0.5", sy_eta = "0.3", sy_dist = "thermal";
    std::string sy_out = "synth";
    double sy_omega = 2.0 * kPi * 250e3, sy_gamma = 0.0, sy_tmax = 60.0;
    int sy_points = 60;
    long sy_shots = 250;
    std::uint64_t sy_seed = 1;
    synth->add_option("--crystal", sy_crystal,
                      "one_ion_one_mode, one_ion_two_modes, or "
                      "two_ions_same_species");
    synth->add_option("--modes", sy_modes, "Mode labels, e.g. COM,STR");
    synth->add_option("--drive", sy_drive, "Driven mode label");
    synth->add_option("--kappa", sy_kappa, "bsb, rsb, or both");
    synth->add_option("--nbar", sy_nbar, "Mean occupation per mode");
    synth->add_option("--eta", sy_eta, "Lamb-Dicke parameter per mode");
    synth->add_option("--omega", sy_omega, "Carrier Rabi rate (rad/s)");
    synth->add_option("--gamma", sy_gamma, "Decay rate (1/s)");
    synth->add_option("--distribution", sy_dist, "thermal or coherent");
    synth->add_option("--tmax-us", sy_tmax, "Last sample time");
    synth->add_option("--points", sy_points, "Samples per curve");
    synth->add_option("--shots", sy_shots,
                      "Repetitions per point (0 = noiseless analytic limit)");
    synth->add_option("--seed", sy_seed, "RNG seed");
    synth->add_option("--out", sy_out, "Output path prefix");

    // --- waveform ------------------------------------------------------
    auto* waveform = app.add_subcommand(
        "waveform", "Solve electrode voltages and waveforms");
    waveform->require_subcommand(1);
    std::string wf_basis, wf_out, wf_position = "0,-610", wf_duration = "310us";
    std::string wf_in, wf_rot_position = "0,0";
    double wf_freq = 3.6, wf_angle = 0.0, wf_transverse = 0.0;
    double wf_quartic = 0.0, wf_bias = 0.0, wf_bound = 10.0;
    double wf_rate = 5e7, wf_separation = 340.0;
    double wf_from_deg = 0.0, wf_to_deg = 90.0, wf_gap = 0.05;
    double wf_rot_transverse = 11.0, wf_cutoff = 100e3;
    std::size_t wf_steps = 0, wf_rot_steps = 64;
    bool wf_parallel = false, wf_inverse = false;
    bool wf_has_quartic = false;

    auto* wf_solve = waveform->add_subcommand(
        "solve", "Single static well (one voltage set)");
    wf_solve->add_option("--basis", wf_basis, "Electrode basis JSON");
    wf_solve->add_option("--position", wf_position, "Well position x,z (um)");
    wf_solve->add_option("--frequency-mhz", wf_freq, "Axial frequency");
    wf_solve->add_option("--angle-deg", wf_angle, "Weak-axis angle from +z");
    wf_solve->add_option("--transverse-frequency-mhz", wf_transverse,
                         "Constrain the in-plane transverse frequency");
    wf_solve->add_option("--quartic", wf_quartic, "Quartic target (V/m^4)")
        ->each([&wf_has_quartic](const std::string&) {
            wf_has_quartic = true;
        });
    wf_solve->add_option("--bias", wf_bias, "Axial bias field (V/m)");
    wf_solve->add_option("--bound", wf_bound, "Per-electrode |V| bound");
    wf_solve->add_option("--out", wf_out, "Write a one-sample waveform CSV");

    auto* wf_sep = waveform->add_subcommand(
        "separate", "Single-well to double-well quartic ramp");
    wf_sep->add_option("--basis", wf_basis, "Electrode basis JSON");
    wf_sep->add_option("--duration", wf_duration, "Ramp duration (e.g. 310us)");
    wf_sep->add_option("--steps", wf_steps,
                       "Sample count (overrides --duration)");
    wf_sep->add_option("--rate", wf_rate, "Update rate (samples/s)");
    wf_sep->add_option("--position", wf_position, "Well center x,z (um)");
    wf_sep->add_option("--frequency-mhz", wf_freq,
                       "Axial frequency (start and per final well)");
    wf_sep->add_option("--separation-um", wf_separation,
                       "Final distance between the two minima");
    wf_sep->add_option("--angle-deg", wf_angle, "Weak-axis angle from +z");
    wf_sep->add_option("--bound", wf_bound, "Per-electrode |V| bound");
    wf_sep->add_flag("--parallel", wf_parallel, "Solve steps with OpenMP");
    wf_sep->add_option("--out", wf_out, "Write the waveform CSV here");

    auto* wf_rot = waveform->add_subcommand(
        "rotate", "Adiabatic 0->90 degree well rotation");
    wf_rot->add_option("--basis", wf_basis, "Electrode basis JSON");
    wf_rot->add_option("--steps", wf_rot_steps, "Schedule steps");
    wf_rot->add_option("--from-deg", wf_from_deg, "Start angle");
    wf_rot->add_option("--to-deg", wf_to_deg, "End angle");
    wf_rot->add_option("--frequency-mhz", wf_freq, "Rotating-mode frequency");
    wf_rot->add_option("--transverse-frequency-mhz", wf_rot_transverse,
                       "Spectator-mode frequency");
    wf_rot->add_option("--position", wf_rot_position,
                       "Well position x,z (um)");
    wf_rot->add_option("--gap-threshold-mhz", wf_gap,
                       "Flag steps with a smaller mode gap");
    wf_rot->add_option("--bound", wf_bound, "Per-electrode |V| bound");
    wf_rot->add_flag("--parallel", wf_parallel, "Solve steps with OpenMP");
    wf_rot->add_option("--out", wf_out, "Write the waveform CSV here");

    auto* wf_filter = waveform->add_subcommand(
        "filter", "Apply or invert the output low-pass filter");
    wf_filter->add_option("--in", wf_in, "Input waveform CSV")->required();
    wf_filter->add_option("--cutoff", wf_cutoff, "Filter cutoff (Hz)");
    wf_filter->add_flag("--inverse", wf_inverse,
                        "Pre-compensate instead of filtering");
    wf_filter->add_option("--out", wf_out, "Output waveform CSV")->required();

    // --- topology ------------------------------------------------------
    auto* topology = app.add_subcommand(
        "topology", "Print the trap-array graph as JSON");
    std::string topo_out;
    topology->add_option("--out", topo_out, "Write the graph JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*plan_reorder)
            return run_plan("reorder", plan_ions, "", table, plan_out);
        if (*plan_address)
            return run_plan("address", plan_ions, plan_target, table,
                            plan_out);
        if (*simulate)
            return run_simulate(sim_seq, table, sim_check, sim_json, sim_csv,
                                sim_idle, sim_penalty, sim_penalty_sigma,
                                sim_detuning, sim_acz, sim_bgrad, sim_c2);
        if (*fit_cmd)
            return run_fit(fit_data, fit_dist, fit_crystal, fit_fix, fit_float,
                           fit_omega0, fit_gamma0, fit_nbar0, fit_maxiter,
                           fit_json, fit_resid);
        if (*synth)
            return run_synth(sy_crystal, sy_modes, sy_drive, sy_kappa, sy_nbar,
                             sy_eta, sy_omega, sy_gamma, sy_dist, sy_tmax,
                             sy_points, sy_shots, sy_seed, sy_out);
        if (*wf_solve)
            return run_waveform_solve(wf_basis, wf_position, wf_freq, wf_angle,
                                      wf_transverse, wf_quartic,
                                      wf_has_quartic, wf_bias, wf_bound,
                                      wf_out);
        if (*wf_sep)
            return run_waveform_separate(wf_basis, wf_duration, wf_steps,
                                         wf_rate, wf_position, wf_freq,
                                         wf_separation, wf_angle, wf_bound,
                                         wf_parallel, wf_out);
        if (*wf_rot)
            return run_waveform_rotate(wf_basis, wf_rot_steps, wf_from_deg,
                                       wf_to_deg, wf_freq, wf_rot_transverse,
                                       wf_rot_position, wf_gap, wf_bound,
                                       wf_parallel, wf_out);
        if (*wf_filter)
            return run_waveform_filter(wf_in, wf_cutoff, wf_inverse, wf_out);
        if (*topology) return run_topology(table, topo_out);
    } catch (const qccd::thermo::CsvParseError& e) {
        std::cerr << "CSV error at row " << e.row() << ": " << e.what()
                  << "\n";
        return kExitValidation;
    } catch (const qccd::trap::ConfigParseError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
