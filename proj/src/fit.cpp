#include "qccd/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace qccd::thermo {

namespace {

using nlohmann::json;

enum class ParamKind { Omega, Gamma, Nbar, Eta };

struct ParamMeta {
    std::string name;
    ParamKind kind;
    double lower;
    double upper;
    double step_floor;  // absolute floor for finite-difference steps
};

// Eta is capped just below 1 so projected steps keep params valid.
constexpr double kEtaCap = 0.99;

std::vector<ParamMeta> parameter_meta(const FlopModelParams& p) {
    std::vector<ParamMeta> meta;
    meta.push_back({"omega", ParamKind::Omega, 1e-9,
                    std::numeric_limits<double>::infinity(), 1e-2});
    meta.push_back({"gamma", ParamKind::Gamma, 0.0,
                    std::numeric_limits<double>::infinity(), 1e-2});
    for (const auto& label : p.modes)
        meta.push_back({"nbar(" + label + ")", ParamKind::Nbar, 0.0,
                        std::numeric_limits<double>::infinity(), 1e-6});
    for (const auto& label : p.modes)
        meta.push_back({"eta(" + label + ")", ParamKind::Eta, 0.0, kEtaCap,
                        1e-6});
    return meta;
}

std::vector<double> project(const std::vector<ParamMeta>& meta,
                            std::vector<double> x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], meta[i].lower, meta[i].upper);
    return x;
}

struct ResidualSplit {
    std::vector<double> flat;                 // all weighted residuals
    std::vector<std::vector<double>> per_ds;  // same, split per dataset
    double chi2 = 0.0;
};

ResidualSplit weighted_residuals(const std::vector<SidebandDataset>& datasets,
                                 Crystal kind, const FlopModelParams& params) {
    ResidualSplit out;
    for (const auto& ds : datasets) {
        std::vector<double> times_s(ds.points.size());
        for (std::size_t i = 0; i < ds.points.size(); ++i)
            times_s[i] = ds.points[i].t_us * 1e-6;
        std::vector<double> model = evaluate_curve(kind, params, times_s,
                                                   ds.mode_index(), ds.kappa);
        std::vector<double> r(ds.points.size());
        for (std::size_t i = 0; i < ds.points.size(); ++i) {
            double sigma =
                binomial_sigma(ds.points[i].population, ds.points[i].shots);
            r[i] = (model[i] - ds.points[i].population) / sigma;
            out.flat.push_back(r[i]);
            out.chi2 += r[i] * r[i];
        }
        out.per_ds.push_back(std::move(r));
    }
    return out;
}

}  // namespace

double binomial_sigma(double population, long shots) {
    if (shots < 1) throw std::invalid_argument("shots must be at least 1");
    double s = static_cast<double>(shots);
    double successes = population * s;
    double p_adj = (successes + 0.5) / (s + 1.0);
    return std::sqrt(p_adj * (1.0 - p_adj) / (s + 1.0));
}

std::vector<double> pack_parameters(const FlopModelParams& params) {
    std::vector<double> x;
    x.push_back(params.omega_rad_s);
    x.push_back(params.gamma_per_s);
    for (std::size_t i = 0; i < params.modes.size(); ++i)
        x.push_back(params.nbar_of(i));
    for (std::size_t i = 0; i < params.modes.size(); ++i)
        x.push_back(params.eta_of(i));
    return x;
}

std::vector<std::string> parameter_names(const FlopModelParams& params) {
    std::vector<std::string> names;
    for (const auto& m : parameter_meta(params)) names.push_back(m.name);
    return names;
}

FlopModelParams unpack_parameters(const FlopModelParams& templ,
                                  const std::vector<double>& packed) {
    std::size_t expect = 2 + 2 * templ.modes.size();
    if (packed.size() != expect)
        throw std::invalid_argument("packed parameter vector has wrong size");
    FlopModelParams p = templ;
    p.omega_rad_s = packed[0];
    p.gamma_per_s = packed[1];
    for (std::size_t i = 0; i < templ.modes.size(); ++i) {
        p.nbar[templ.modes[i]] = packed[2 + i];
        p.eta[templ.modes[i]] = packed[2 + templ.modes.size() + i];
    }
    return p;
}

double FitResult::sigma_of(const std::string& name) const {
    for (std::size_t k = 0; k < free_indices.size(); ++k)
        if (names.at(static_cast<std::size_t>(free_indices[k])) == name)
            return std::sqrt(std::max(0.0, covariance[k][k]));
    throw std::invalid_argument("parameter '" + name +
                                "' is not free in this fit");
}

std::string FitResult::to_json_text() const {
    json j;
    j["format"] = "qccd-fit-result";
    j["version"] = 1;
    json p;
    p["omega_rad_s"] = params.omega_rad_s;
    p["gamma_per_s"] = params.gamma_per_s;
    p["distribution"] = to_string(params.distribution);
    p["modes"] = params.modes;
    json nbar = json::object(), eta = json::object(), trunc = json::object();
    for (std::size_t i = 0; i < params.modes.size(); ++i) {
        nbar[params.modes[i]] = params.nbar_of(i);
        eta[params.modes[i]] = params.eta_of(i);
        trunc[params.modes[i]] = params.truncation_of(i);
    }
    p["nbar"] = nbar;
    p["eta"] = eta;
    p["truncation"] = trunc;
    j["params"] = p;
    json free_names = json::array();
    json sigma = json::object();
    for (std::size_t k = 0; k < free_indices.size(); ++k) {
        const std::string& name =
            names.at(static_cast<std::size_t>(free_indices[k]));
        free_names.push_back(name);
        sigma[name] = std::sqrt(std::max(0.0, covariance[k][k]));
    }
    j["free"] = free_names;
    j["sigma"] = sigma;
    j["covariance"] = covariance;
    j["chi2"] = chi2;
    j["reduced_chi2"] = reduced_chi2;
    j["points"] = point_count;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["notes"] = notes;
    return j.dump(2) + "\n";
}

FitResult fit(const std::vector<SidebandDataset>& datasets, Crystal kind,
              const FlopModelParams& initial, const FitOptions& options) {
    if (datasets.empty())
        throw std::invalid_argument("fit needs at least one dataset");
    initial.validate();
    for (const auto& ds : datasets) {
        ds.validate();
        if (ds.crystal != kind)
            throw std::invalid_argument(
                "dataset crystal kind does not match the requested model");
        if (ds.modes != initial.modes)
            throw std::invalid_argument(
                "dataset mode labels do not match the initial parameters");
    }

    const std::vector<ParamMeta> meta = parameter_meta(initial);
    const std::size_t np = meta.size();
    std::vector<std::uint8_t> mask = options.free_mask;
    if (mask.empty()) mask.assign(np, 1);
    if (mask.size() != np)
        throw std::invalid_argument("free_mask size must be " +
                                    std::to_string(np));

    FitResult result;
    result.names = parameter_names(initial);
    for (std::size_t i = 0; i < np; ++i)
        if (mask[i]) result.free_indices.push_back(static_cast<int>(i));
    const std::size_t nfree = result.free_indices.size();

    std::vector<double> x = project(meta, pack_parameters(initial));
    auto eval = [&](const std::vector<double>& packed) {
        return weighted_residuals(datasets, kind,
                                  unpack_parameters(initial, packed));
    };

    ResidualSplit current = eval(x);
    const std::size_t npts = current.flat.size();
    result.point_count = npts;

    auto fd_step = [&](std::size_t i) {
        return std::max(1e-6 * std::abs(x[i]), meta[i].step_floor);
    };

    // Jacobian of the weighted residual vector over the free parameters,
    // by bounds-respecting central differences.
    auto jacobian = [&](Eigen::MatrixXd& J) {
        J.resize(static_cast<Eigen::Index>(npts),
                 static_cast<Eigen::Index>(nfree));
        for (std::size_t k = 0; k < nfree; ++k) {
            std::size_t i = static_cast<std::size_t>(result.free_indices[k]);
            double h = fd_step(i);
            double a = std::max(meta[i].lower, x[i] - h);
            double b = std::min(meta[i].upper, x[i] + h);
            std::vector<double> xa = x, xb = x;
            xa[i] = a;
            xb[i] = b;
            ResidualSplit ra = eval(xa);
            ResidualSplit rb = eval(xb);
            double denom = b - a;
            for (std::size_t r = 0; r < npts; ++r)
                J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                    denom > 0.0 ? (rb.flat[r] - ra.flat[r]) / denom : 0.0;
        }
    };

    bool degenerate_noted = false;
    if (nfree == 0) {
        result.converged = true;
    } else {
        double lambda = 1e-3;
        Eigen::MatrixXd J;
        for (int iter = 1; iter <= options.max_iterations; ++iter) {
            result.iterations = iter;
            jacobian(J);
            Eigen::MatrixXd A = J.transpose() * J;
            Eigen::VectorXd rv =
                Eigen::Map<const Eigen::VectorXd>(current.flat.data(),
                                                  static_cast<Eigen::Index>(npts));
            Eigen::VectorXd g = J.transpose() * rv;

            if (!degenerate_noted) {
                // Judge singularity on the scale-normalized normal matrix so
                // unit differences between parameters (rad/s vs. quanta)
                // cannot masquerade as degeneracy.
                Eigen::VectorXd d(static_cast<Eigen::Index>(nfree));
                for (std::size_t k = 0; k < nfree; ++k) {
                    Eigen::Index kk = static_cast<Eigen::Index>(k);
                    d(kk) = A(kk, kk) > 0.0 ? std::sqrt(A(kk, kk)) : 1.0;
                }
                Eigen::MatrixXd An =
                    d.cwiseInverse().asDiagonal() * A *
                    d.cwiseInverse().asDiagonal();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(An);
                double ev_max = es.eigenvalues().maxCoeff();
                double ev_min = es.eigenvalues().minCoeff();
                if (ev_max <= 0.0 || ev_min < 1e-12 * ev_max) {
                    std::ostringstream note;
                    note << "near-singular Jacobian; degenerate direction:";
                    // Map the flat eigenvector back to parameter space.
                    Eigen::VectorXd v =
                        d.cwiseInverse().asDiagonal() * es.eigenvectors().col(0);
                    v /= v.norm();
                    for (std::size_t k = 0; k < nfree; ++k)
                        note << ' '
                             << result.names[static_cast<std::size_t>(
                                    result.free_indices[k])]
                             << '=' << v(static_cast<Eigen::Index>(k));
                    result.notes.push_back(note.str());
                    degenerate_noted = true;
                }
            }

            bool accepted = false;
            double rel_step = 0.0;
            for (int trial = 0; trial < 12 && !accepted; ++trial) {
                Eigen::MatrixXd M = A;
                for (std::size_t k = 0; k < nfree; ++k) {
                    Eigen::Index kk = static_cast<Eigen::Index>(k);
                    M(kk, kk) += lambda * std::max(A(kk, kk), 1e-30);
                }
                Eigen::VectorXd delta = M.ldlt().solve(-g);
                std::vector<double> x_new = x;
                for (std::size_t k = 0; k < nfree; ++k)
                    x_new[static_cast<std::size_t>(result.free_indices[k])] +=
                        delta(static_cast<Eigen::Index>(k));
                x_new = project(meta, x_new);
                ResidualSplit next = eval(x_new);
                if (next.chi2 <= current.chi2) {
                    rel_step = 0.0;
                    for (std::size_t i = 0; i < np; ++i)
                        rel_step = std::max(
                            rel_step, std::abs(x_new[i] - x[i]) /
                                          std::max(std::abs(x[i]), 1.0));
                    x = std::move(x_new);
                    current = std::move(next);
                    lambda = std::max(lambda / 3.0, 1e-14);
                    accepted = true;
                } else {
                    lambda *= 10.0;
                    if (lambda > 1e14) break;
                }
            }
            if (!accepted) {
                result.notes.push_back(
                    "stalled: no damped step reduced chi2 at iteration " +
                    std::to_string(iter));
                break;
            }
            if (rel_step < options.relative_step_tolerance) {
                result.converged = true;
                break;
            }
        }

        // Covariance from the weighted normal equations at the solution,
        // inverted in scale-normalized form: A = D An D, so
        // A^-1 = D^-1 pinv(An) D^-1 with the singular-value cut applied to
        // the unitless An (scale-invariant).
        jacobian(J);
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd d(static_cast<Eigen::Index>(nfree));
        for (std::size_t k = 0; k < nfree; ++k) {
            Eigen::Index kk = static_cast<Eigen::Index>(k);
            d(kk) = A(kk, kk) > 0.0 ? std::sqrt(A(kk, kk)) : 1.0;
        }
        Eigen::MatrixXd An = d.cwiseInverse().asDiagonal() * A *
                             d.cwiseInverse().asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(An);
        double ev_max = std::max(es.eigenvalues().maxCoeff(), 0.0);
        Eigen::MatrixXd cov_n = Eigen::MatrixXd::Zero(
            static_cast<Eigen::Index>(nfree), static_cast<Eigen::Index>(nfree));
        bool dropped = false;
        for (std::size_t k = 0; k < nfree; ++k) {
            double ev = es.eigenvalues()(static_cast<Eigen::Index>(k));
            if (ev > 1e-12 * std::max(ev_max, 1e-300)) {
                Eigen::VectorXd v =
                    es.eigenvectors().col(static_cast<Eigen::Index>(k));
                cov_n += (v * v.transpose()) / ev;
            } else {
                dropped = true;
            }
        }
        if (dropped)
            result.notes.push_back(
                "covariance: dropped singular directions (pseudo-inverse)");
        Eigen::MatrixXd cov = d.cwiseInverse().asDiagonal() * cov_n *
                              d.cwiseInverse().asDiagonal();
        result.covariance.assign(nfree, std::vector<double>(nfree, 0.0));
        for (std::size_t a = 0; a < nfree; ++a)
            for (std::size_t b = 0; b < nfree; ++b)
                result.covariance[a][b] = cov(static_cast<Eigen::Index>(a),
                                              static_cast<Eigen::Index>(b));
    }

    result.params = unpack_parameters(initial, x);
    result.chi2 = current.chi2;
    std::size_t dof = npts > nfree ? npts - nfree : 1;
    result.reduced_chi2 = current.chi2 / static_cast<double>(dof);
    result.residuals = current.per_ds;
    if (nfree == 0) result.covariance.clear();
    return result;
}

FlopModelParams initial_guess(const std::vector<SidebandDataset>& datasets,
                              Crystal kind, Distribution distribution) {
    (void)kind;  // the guess depends only on the datasets' mode metadata
    if (datasets.empty())
        throw std::invalid_argument("initial_guess needs at least one dataset");
    for (const auto& ds : datasets) ds.validate();

    FlopModelParams g;
    g.distribution = distribution;
    g.modes = datasets[0].modes;
    g.eta = datasets[0].eta;
    g.gamma_per_s = 0.0;

    // Omega from the first minimum of a blue-sideband curve: the ground-state
    // term dominates early, so the first dip sits near t = pi / Omega_{0,+1}.
    const SidebandDataset* omega_src = nullptr;
    for (const auto& ds : datasets)
        if (ds.kappa == +1 && !ds.points.empty()) {
            omega_src = &ds;
            break;
        }
    if (!omega_src)
        for (const auto& ds : datasets)
            if (!ds.points.empty()) {
                omega_src = &ds;
                break;
            }
    if (!omega_src) throw std::invalid_argument("datasets contain no points");

    double eta_drive =
        omega_src->eta.at(omega_src->mode_label);
    // |kappa|=1 coupling out of the lowest participating state; identical
    // for n=0 blue and n=1 red transitions.
    double d0 = rabi_frequency(0, +1, eta_drive, 1.0);
    double t_min_us = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : omega_src->points)
        if (p.t_us > 0.0 && p.population < best) {
            best = p.population;
            t_min_us = p.t_us;
        }
    if (t_min_us <= 0.0 || d0 <= 0.0) {
        double t_last = omega_src->points.back().t_us;
        g.omega_rad_s = M_PI / (std::max(t_last, 1.0) * 1e-6 *
                                std::max(d0, 0.1));
    } else {
        g.omega_rad_s = M_PI / (t_min_us * 1e-6 * d0);
    }

    // nbar per mode from the red/blue contrast ratio of curves driving that
    // mode: for a thermal state the red-sideband dip scales with
    // nbar/(nbar+1) relative to the blue.
    for (const auto& label : g.modes) {
        double red_dip = 0.0, blue_dip = 0.0;
        for (const auto& ds : datasets) {
            if (ds.mode_label != label) continue;
            double acc = 0.0;
            for (const auto& p : ds.points) acc += 1.0 - p.population;
            if (ds.kappa == -1)
                red_dip += acc;
            else
                blue_dip += acc;
        }
        double nb = 0.5;
        if (blue_dip > 1e-9) {
            double ratio = std::clamp(red_dip / blue_dip, 0.0, 0.95);
            nb = ratio / (1.0 - ratio);
        }
        g.nbar[label] = nb;
    }
    g.validate();
    return g;
}

}  // namespace qccd::thermo
