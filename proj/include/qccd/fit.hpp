#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qccd/thermometry.hpp"

namespace qccd::thermo {

// Binomial standard error of an observed bright fraction over `shots`
// repetitions, with a +1/2 success / +1 trial adjustment so weights never
// vanish at populations of exactly 0 or 1.
double binomial_sigma(double population, long shots);

// Deterministic packing order of the model parameters:
//   [omega, gamma, nbar(mode 0), (nbar(mode 1)), eta(mode 0), (eta(mode 1))]
std::vector<double> pack_parameters(const FlopModelParams& params);
// Parameter names in packing order, e.g. "omega", "gamma", "nbar(COM)".
std::vector<std::string> parameter_names(const FlopModelParams& params);
// Rebuild params from a packed vector, keeping template metadata (modes,
// distribution, truncation) unchanged.
FlopModelParams unpack_parameters(const FlopModelParams& templ,
                                  const std::vector<double>& packed);

struct FitOptions {
    // One flag per packed parameter; empty means all free. Fixed parameters
    // keep their initial value.
    std::vector<std::uint8_t> free_mask;
    int max_iterations = 200;
    double relative_step_tolerance = 1e-10;
};

struct FitResult {
    FlopModelParams params;                   // best parameters found
    std::vector<std::string> names;           // packed parameter names
    std::vector<int> free_indices;            // indices into names
    std::vector<std::vector<double>> covariance;  // over free parameters
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    std::size_t point_count = 0;
    bool converged = false;
    int iterations = 0;
    // Weighted residuals (model - data)/sigma per dataset, at the returned
    // parameters.
    std::vector<std::vector<double>> residuals;
    // Diagnostics: degenerate directions, stalls, clipped steps.
    std::vector<std::string> notes;

    // 1-sigma uncertainty of a parameter by name; throws if the parameter is
    // not free.
    double sigma_of(const std::string& name) const;
    std::string to_json_text() const;
};

// Joint weighted nonlinear least squares across all supplied curves with a
// common parameter set. Levenberg-Marquardt on numerically differenced
// Jacobians; converged when the relative step drops below the tolerance,
// reported unconverged (with best-so-far parameters) otherwise. A singular
// Jacobian is reported through `notes` as degenerate parameter directions.
FitResult fit(const std::vector<SidebandDataset>& datasets, Crystal kind,
              const FlopModelParams& initial, const FitOptions& options = {});

// Deterministic starting point: omega from the first minimum of a
// blue-sideband curve, nbar from the red/blue asymmetry ratio, gamma zero.
FlopModelParams initial_guess(const std::vector<SidebandDataset>& datasets,
                              Crystal kind, Distribution distribution);

}  // namespace qccd::thermo
