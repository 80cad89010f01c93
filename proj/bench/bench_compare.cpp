// Benchmark: serial reference vs OpenMP execution for the two hot paths,
// sideband-curve evaluation and per-step waveform solves. Both paths must
// produce identical results; the benchmark reports timings and the largest
// observed difference.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qccd/thermometry.hpp"
#include "qccd/waveform.hpp"

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(
               clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& body) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        body();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms,
            double max_diff) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx"
                "   max |diff| %.3g\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                max_diff);
}

void bench_curves() {
    qccd::thermo::FlopModelParams params;
    params.omega_rad_s = 2.0 * M_PI * 250e3;
    params.gamma_per_s = 400.0;
    params.distribution = qccd::Distribution::Thermal;
    params.modes = {"COM", "STR"};
    params.nbar = {{"COM", 8.0}, {"STR", 5.0}};
    params.eta = {{"COM", 0.18}, {"STR", 0.11}};

    std::vector<double> times_s(4000);
    for (std::size_t i = 0; i < times_s.size(); ++i)
        times_s[i] = 1e-6 * static_cast<double>(i + 1) * 0.05;

    std::vector<double> serial_out, parallel_out;
    double serial_ms = time_best_of(3, [&] {
        serial_out = qccd::thermo::evaluate_curve(
            qccd::thermo::Crystal::TwoIonsSameSpecies, params, times_s, 0, +1,
            qccd::Execution::Serial);
    });
    double parallel_ms = time_best_of(3, [&] {
        parallel_out = qccd::thermo::evaluate_curve(
            qccd::thermo::Crystal::TwoIonsSameSpecies, params, times_s, 0, +1,
            qccd::Execution::Parallel);
    });
    double max_diff = 0.0;
    for (std::size_t i = 0; i < serial_out.size(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(serial_out[i] - parallel_out[i]));
    report("two-ion BSB curve (4000 t)", serial_ms, parallel_ms, max_diff);
}

void bench_ramp() {
    auto basis = qccd::wave::ElectrodeBasis::synthetic_default();
    double mass = qccd::constants::mass_be9;
    double curvature =
        qccd::wave::PotentialConstraints::curvature_from_frequency(3.6e6,
                                                                   mass);
    qccd::wave::PotentialConstraints from;
    from.well_position_um = {0.0, -610.0};
    from.axial_curvature_target_v_per_m2 = curvature;
    from.quartic_target_v_per_m4 = 0.0;

    qccd::wave::PotentialConstraints to = from;
    double c2_end = -curvature / 2.0;
    double half_sep = 170e-6;
    to.axial_curvature_target_v_per_m2 = c2_end;
    to.quartic_target_v_per_m4 = -6.0 * c2_end / (half_sep * half_sep);

    const std::size_t steps = 256;
    qccd::wave::Waveform w_serial, w_parallel;
    double serial_ms = time_best_of(3, [&] {
        w_serial = qccd::wave::separation_ramp(basis, from, to, steps, mass,
                                               qccd::Execution::Serial);
    });
    double parallel_ms = time_best_of(3, [&] {
        w_parallel = qccd::wave::separation_ramp(basis, from, to, steps, mass,
                                                 qccd::Execution::Parallel);
    });
    double max_diff = 0.0;
    for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t e = 0; e < w_serial.samples[k].size(); ++e)
            max_diff = std::max(max_diff,
                                std::abs(w_serial.samples[k][e] -
                                         w_parallel.samples[k][e]));
    report("separation ramp (256 steps)", serial_ms, parallel_ms, max_diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not available; 'parallel' runs serially\n");
#endif
    bench_curves();
    bench_ramp();
    return 0;
}
