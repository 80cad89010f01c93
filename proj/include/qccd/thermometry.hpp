#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qccd/distribution.hpp"
#include "qccd/execution.hpp"

namespace qccd::thermo {

// Which physical system a sideband-flopping curve describes.
//   OneIonOneMode      — one ion, one motional mode (basic thermometry).
//   OneIonTwoModes     — one ion driven on mode 1 while mode 2 contributes
//                        Debye-Waller-type coupling fluctuations.
//   TwoIonsSameSpecies — two equal ions sharing COM/STR modes; fluorescence
//                        averages many driven three-level ladders.
enum class Crystal { OneIonOneMode, OneIonTwoModes, TwoIonsSameSpecies };

std::string to_string(Crystal c);
Crystal crystal_from_string(const std::string& s);

// Forward-model parameters shared by all flop models. Modes are identified
// by label; `modes` fixes the model order (drive index 0 or 1 refers into
// it; it is also the deterministic parameter-packing order used by fits).
struct FlopModelParams {
    double omega_rad_s = 0.0;  // carrier Rabi rate (rad/s)
    double gamma_per_s = 0.0;  // phenomenological decay of oscillating terms
    Distribution distribution = Distribution::Thermal;
    std::vector<std::string> modes;         // size 1 or 2, model order
    std::map<std::string, double> nbar;     // mode label -> mean occupation
    std::map<std::string, double> eta;      // mode label -> Lamb-Dicke param
    std::map<std::string, int> truncation;  // mode label -> max Fock index;
                                            // missing or <=0 means automatic

    std::size_t mode_count() const { return modes.size(); }
    double nbar_of(std::size_t mode_index) const;
    double eta_of(std::size_t mode_index) const;
    // Explicit truncation when set (>0), otherwise auto_truncation().
    int truncation_of(std::size_t mode_index) const;

    // Throws std::invalid_argument on hard violations: omega <= 0,
    // gamma < 0, nbar < 0, eta outside [0,1), missing per-mode entries,
    // mode count not 1 or 2.
    void validate() const;
    // Soft advisories: eta above 0.5 (Lamb-Dicke expansion marginal),
    // explicit truncation whose neglected tail is >= 1e-8.
    std::vector<std::string> warnings() const;
};

// Thermal (geometric) Fock-state weight p_n = nbar^n / (nbar+1)^(n+1).
double thermal_population(double nbar, int n);
// Coherent-state (Poissonian) weight e^(-nbar) nbar^n / n!.
double coherent_population(double nbar, int n);
// Weight under either distribution.
double population_weight(Distribution d, double nbar, int n);

// Smallest max-Fock-index N (with a small floor) such that the neglected
// tail sum_{n>N} p_n is below 1e-8 for the given distribution.
int auto_truncation(double nbar, Distribution d);

// Sideband Rabi rate magnitude |Omega_{n,kappa}| =
//   omega * e^(-eta^2/2) * sqrt(n_<! / n_>!) * eta^|kappa| *
//   L_{n_<}^{|kappa|}(eta^2)
// with n_< = min(n, n+kappa), n_> = max(n, n+kappa) and L a generalized
// Laguerre polynomial. Throws std::domain_error when n+kappa < 0 and
// std::invalid_argument for |kappa| > 1 (higher sidebands out of scope).
double rabi_frequency(int n, int kappa, double eta, double omega);

// Couplings of one driven three-level ladder in a same-species two-ion
// crystal: g1 drives the first rung starting from both ions bright with
// motional occupation (n, m), g2 the second rung from (n+kappa, m+lambda);
// g_c = sqrt(g1^2 + g2^2). c0_sq/c1_sq are the decay-modified populations
// of the initial state and the single-flipped symmetric state.
struct ThreeLevelCoefficients {
    double g1 = 0.0;
    double g2 = 0.0;
    double gc = 0.0;
    double c0_sq(double t_s, double gamma_per_s) const;
    double c1_sq(double t_s, double gamma_per_s) const;
};

ThreeLevelCoefficients three_level_coefficients(int n, int m, int kappa,
                                                int lambda, double eta1,
                                                double eta2, double omega);

// Probability of remaining in the initial (bright) state after driving the
// blue (kappa=+1) or red (kappa=-1) sideband for t seconds. The red-sideband
// ground-state term enters as a non-evolving spectator. Single mode.
double single_ion_flop(const FlopModelParams& params, double t_s, int kappa);

// Same, with a second (undriven) mode whose thermal occupation modulates the
// coupling: Omega_{nm,kappa,0} = omega * D(n,kappa,eta1) * D(m,0,eta2).
// which_mode selects the driven mode (0 or 1); the other spectates.
double two_mode_flop(const FlopModelParams& params, double t_s,
                     int which_mode, int kappa);

// Mean fluorescence fraction of a same-species two-ion crystal driven on one
// shared mode: averages |c0|^2 + 1/2 |c1|^2 of the three-level ladder over
// the initial Fock distribution of both modes.
double two_ion_flop(const FlopModelParams& params, double t_s, int which_mode,
                    int kappa);

// Dispatch to the model for `crystal`.
double flop_population(Crystal crystal, const FlopModelParams& params,
                       double t_s, int which_mode, int kappa);

// Evaluate a whole curve. Serial and Parallel produce bit-identical results;
// Parallel distributes time points across OpenMP threads.
std::vector<double> evaluate_curve(Crystal crystal,
                                   const FlopModelParams& params,
                                   const std::vector<double>& times_s,
                                   int which_mode, int kappa,
                                   Execution exec = Execution::Serial);

// ---------------------------------------------------------------------------
// Datasets

struct SidebandPoint {
    double t_us = 0.0;        // pulse duration, microseconds
    double population = 0.0;  // observed bright fraction, in [0,1]
    long shots = 1;           // experimental repetitions
};

class CsvParseError : public std::runtime_error {
  public:
    CsvParseError(const std::string& message, std::size_t row)
        : std::runtime_error(message), row_(row) {}
    // 1-based row number in the CSV file (row 1 is the header).
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};

// One measured (or synthesized) sideband-flopping curve plus the metadata
// needed to evaluate a forward model against it.
struct SidebandDataset {
    Crystal crystal = Crystal::OneIonOneMode;
    std::vector<std::string> modes;    // mode labels in model order
    std::string mode_label;            // the driven mode (must be in modes)
    int kappa = +1;                    // +1 blue sideband, -1 red sideband
    std::map<std::string, double> eta; // known Lamb-Dicke parameters
    std::vector<SidebandPoint> points;

    // Index of mode_label within modes.
    int mode_index() const;
    // Throws std::invalid_argument on violations: durations < 0, population
    // outside [0,1], shots < 1, kappa not in {-1,+1}, label/mode mismatch,
    // crystal/mode-count mismatch.
    void validate() const;
};

// CSV body with header "t_us,population,shots"; numbers use shortest
// round-trip formatting so output is byte-deterministic.
std::string dataset_to_csv(const SidebandDataset& ds);
// JSON sidecar carrying everything the CSV does not (crystal, modes, driven
// mode, sideband sign, eta values).
std::string dataset_sidecar_json(const SidebandDataset& ds);
// Parse a CSV body plus its sidecar. Throws CsvParseError (with row number)
// for malformed CSV and std::invalid_argument for bad sidecar contents.
SidebandDataset dataset_from_text(const std::string& csv_text,
                                  const std::string& sidecar_json_text);

// File IO: the sidecar lives next to the CSV at "<csv_path>.json".
void save_dataset(const SidebandDataset& ds, const std::string& csv_path);
SidebandDataset load_dataset(const std::string& csv_path);

// Draw a synthetic dataset from the forward model: at each time the bright
// population is sampled as a binomial fraction over `shots` repetitions
// (deterministic in `seed`). shots == 0 selects the analytic infinite-shot
// limit: exact model values, recorded with a 1e9 nominal shot count.
SidebandDataset synthesize_dataset(const FlopModelParams& params,
                                   Crystal crystal,
                                   const std::string& mode_label, int kappa,
                                   const std::vector<double>& times_us,
                                   long shots, std::uint64_t seed);

}  // namespace qccd::thermo
