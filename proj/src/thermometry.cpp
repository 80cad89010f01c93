#include "qccd/thermometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "format_detail.hpp"

namespace qccd::thermo {

namespace {

using nlohmann::json;

constexpr double kTailTarget = 1e-8;
constexpr int kMinTruncation = 4;
constexpr int kMaxTruncation = 100000;

// Generalized Laguerre polynomial L_k^alpha(x) by the three-term recurrence.
double laguerre(int k, int alpha, double x) {
    if (k <= 0) return 1.0;
    double prev = 1.0;
    double cur = 1.0 + alpha - x;
    for (int j = 2; j <= k; ++j) {
        double next = ((2.0 * j - 1.0 + alpha - x) * cur -
                       (j - 1.0 + alpha) * prev) /
                      j;
        prev = cur;
        cur = next;
    }
    return cur;
}

// Dimensionless sideband coupling factor D(n, kappa, eta); the Rabi rate of
// the |n> -> |n+kappa> transition is omega * D. Zero below the bottom of the
// Fock ladder, which lets sums treat non-existent transitions uniformly.
double d_factor(int n, int kappa, double eta) {
    if (n < 0 || n + kappa < 0) return 0.0;
    int ak = std::abs(kappa);
    if (eta == 0.0) return ak == 0 ? 1.0 : 0.0;
    int lo = std::min(n, n + kappa);
    int hi = std::max(n, n + kappa);
    double x = eta * eta;
    double log_fact = -0.5 * x + 0.5 * (std::lgamma(lo + 1.0) -
                                        std::lgamma(hi + 1.0));
    double val = std::exp(log_fact) * std::pow(eta, ak) * laguerre(lo, ak, x);
    return std::abs(val);
}

// D(n, kappa, eta) tabulated for n = 0..max_n.
std::vector<double> d_table(int max_n, int kappa, double eta) {
    std::vector<double> t(static_cast<std::size_t>(max_n) + 1);
    for (int n = 0; n <= max_n; ++n) t[static_cast<std::size_t>(n)] = d_factor(n, kappa, eta);
    return t;
}

// D(n+kappa, kappa, eta) tabulated for n = 0..max_n (the second rung of the
// three-level ladder).
std::vector<double> d_table_shifted(int max_n, int kappa, double eta) {
    std::vector<double> t(static_cast<std::size_t>(max_n) + 1);
    for (int n = 0; n <= max_n; ++n)
        t[static_cast<std::size_t>(n)] = d_factor(n + kappa, kappa, eta);
    return t;
}

std::vector<double> weight_table(Distribution d, double nbar, int max_n) {
    std::vector<double> t(static_cast<std::size_t>(max_n) + 1);
    for (int n = 0; n <= max_n; ++n)
        t[static_cast<std::size_t>(n)] = population_weight(d, nbar, n);
    return t;
}

// Precomputed per-curve state: everything except the time dependence.
struct Kernel {
    Crystal crystal = Crystal::OneIonOneMode;
    int kappa = +1;
    double omega = 0.0;
    double gamma = 0.0;
    int n_max = 0;  // driven-mode truncation
    int m_max = 0;  // spectator-mode truncation (when present)
    std::vector<double> wd;   // driven-mode Fock weights
    std::vector<double> dd;   // D(n, kappa) on the driven mode
    std::vector<double> ddk;  // D(n+kappa, kappa) on the driven mode
    std::vector<double> ws;   // spectator weights
    std::vector<double> ds;   // D(m, 0) on the spectator mode

    double eval(double t_s) const;
};

Kernel make_kernel(Crystal crystal, const FlopModelParams& params,
                   int which_mode, int kappa) {
    params.validate();
    if (kappa != 1 && kappa != -1)
        throw std::invalid_argument("kappa must be +1 or -1");
    std::size_t need_modes = crystal == Crystal::OneIonOneMode ? 1 : 2;
    if (params.mode_count() != need_modes)
        throw std::invalid_argument("model expects " +
                                    std::to_string(need_modes) +
                                    " mode(s), params carry " +
                                    std::to_string(params.mode_count()));
    if (which_mode < 0 ||
        static_cast<std::size_t>(which_mode) >= params.mode_count())
        throw std::invalid_argument("driven mode index out of range");

    Kernel k;
    k.crystal = crystal;
    k.kappa = kappa;
    k.omega = params.omega_rad_s;
    k.gamma = params.gamma_per_s;

    std::size_t di = static_cast<std::size_t>(which_mode);
    k.n_max = params.truncation_of(di);
    k.wd = weight_table(params.distribution, params.nbar_of(di), k.n_max);
    k.dd = d_table(k.n_max, kappa, params.eta_of(di));
    if (crystal == Crystal::TwoIonsSameSpecies)
        k.ddk = d_table_shifted(k.n_max, kappa, params.eta_of(di));

    if (need_modes == 2) {
        std::size_t si = 1 - di;
        k.m_max = params.truncation_of(si);
        k.ws = weight_table(params.distribution, params.nbar_of(si), k.m_max);
        k.ds = d_table(k.m_max, 0, params.eta_of(si));
    }
    return k;
}

double Kernel::eval(double t_s) const {
    const double decay = std::exp(-gamma * t_s);
    auto osc = [&](double rate) {
        return 0.5 * (1.0 + std::cos(rate * t_s) * decay);
    };

    switch (crystal) {
        case Crystal::OneIonOneMode: {
            double acc = 0.0;
            if (kappa > 0) {
                for (int n = 0; n < n_max; ++n)
                    acc += wd[static_cast<std::size_t>(n)] *
                           osc(omega * dd[static_cast<std::size_t>(n)]);
            } else {
                acc = wd[0];  // ground state cannot emit a red sideband
                for (int n = 1; n <= n_max; ++n)
                    acc += wd[static_cast<std::size_t>(n)] *
                           osc(omega * dd[static_cast<std::size_t>(n)]);
            }
            return acc;
        }
        case Crystal::OneIonTwoModes: {
            double acc = 0.0;
            for (int m = 0; m <= m_max; ++m) {
                double dm = ds[static_cast<std::size_t>(m)];
                double inner;
                if (kappa > 0) {
                    inner = 0.0;
                    for (int n = 0; n < n_max; ++n)
                        inner += wd[static_cast<std::size_t>(n)] *
                                 osc(omega * dd[static_cast<std::size_t>(n)] * dm);
                } else {
                    inner = wd[0];
                    for (int n = 1; n <= n_max; ++n)
                        inner += wd[static_cast<std::size_t>(n)] *
                                 osc(omega * dd[static_cast<std::size_t>(n)] * dm);
                }
                acc += ws[static_cast<std::size_t>(m)] * inner;
            }
            return acc;
        }
        case Crystal::TwoIonsSameSpecies: {
            const double s2h = std::sqrt(2.0) / 2.0;
            // On the blue sideband the top rung n = n_max is dropped, like
            // the single-ion sum; on the red sideband n = 0 contributes an
            // inert term through g_c = 0.
            const int n_hi = kappa > 0 ? n_max - 1 : n_max;
            double acc = 0.0;
            for (int m = 0; m <= m_max; ++m) {
                double dm = ds[static_cast<std::size_t>(m)];
                double inner = 0.0;
                for (int n = 0; n <= n_hi; ++n) {
                    double g1 = s2h * omega * dd[static_cast<std::size_t>(n)] * dm;
                    double g2 = s2h * omega * ddk[static_cast<std::size_t>(n)] * dm;
                    double gc2 = g1 * g1 + g2 * g2;
                    double term;
                    if (gc2 == 0.0) {
                        term = 1.0;  // uncoupled: stays bright
                    } else {
                        double gc = std::sqrt(gc2);
                        double c1 = std::cos(gc * t_s);
                        double c2 = std::cos(2.0 * gc * t_s);
                        double g1s = g1 * g1;
                        double g2s = g2 * g2;
                        double c0_sq =
                            (0.5 * g1s * g1s + 0.5 * g1s * g1s * c2 * decay +
                             2.0 * g1s * g2s * c1 * decay + g2s * g2s) /
                            (gc2 * gc2);
                        double c1_sq = (g1s / gc2) * 0.5 * (1.0 - c2 * decay);
                        term = c0_sq + 0.5 * c1_sq;
                    }
                    inner += wd[static_cast<std::size_t>(n)] * term;
                }
                acc += ws[static_cast<std::size_t>(m)] * inner;
            }
            return acc;
        }
    }
    return 0.0;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::string to_string(Crystal c) {
    switch (c) {
        case Crystal::OneIonOneMode: return "one_ion_one_mode";
        case Crystal::OneIonTwoModes: return "one_ion_two_modes";
        case Crystal::TwoIonsSameSpecies: return "two_ions_same_species";
    }
    return "one_ion_one_mode";
}

Crystal crystal_from_string(const std::string& s) {
    if (s == "one_ion_one_mode") return Crystal::OneIonOneMode;
    if (s == "one_ion_two_modes") return Crystal::OneIonTwoModes;
    if (s == "two_ions_same_species") return Crystal::TwoIonsSameSpecies;
    throw std::invalid_argument("unknown crystal kind '" + s + "'");
}

double FlopModelParams::nbar_of(std::size_t mode_index) const {
    auto it = nbar.find(modes.at(mode_index));
    if (it == nbar.end())
        throw std::invalid_argument("missing nbar for mode '" +
                                    modes.at(mode_index) + "'");
    return it->second;
}

double FlopModelParams::eta_of(std::size_t mode_index) const {
    auto it = eta.find(modes.at(mode_index));
    if (it == eta.end())
        throw std::invalid_argument("missing eta for mode '" +
                                    modes.at(mode_index) + "'");
    return it->second;
}

int FlopModelParams::truncation_of(std::size_t mode_index) const {
    auto it = truncation.find(modes.at(mode_index));
    if (it != truncation.end() && it->second > 0) return it->second;
    return auto_truncation(nbar_of(mode_index), distribution);
}

void FlopModelParams::validate() const {
    if (!(omega_rad_s > 0.0))
        throw std::invalid_argument("omega must be positive");
    if (gamma_per_s < 0.0)
        throw std::invalid_argument("gamma must be non-negative");
    if (modes.empty() || modes.size() > 2)
        throw std::invalid_argument("model supports 1 or 2 modes, got " +
                                    std::to_string(modes.size()));
    for (std::size_t i = 0; i < modes.size(); ++i) {
        for (std::size_t j = i + 1; j < modes.size(); ++j)
            if (modes[i] == modes[j])
                throw std::invalid_argument("duplicate mode label '" +
                                            modes[i] + "'");
        double nb = nbar_of(i);
        double et = eta_of(i);
        if (nb < 0.0)
            throw std::invalid_argument("nbar for mode '" + modes[i] +
                                        "' must be non-negative");
        if (et < 0.0 || et >= 1.0)
            throw std::invalid_argument("eta for mode '" + modes[i] +
                                        "' must lie in [0,1)");
    }
}

std::vector<std::string> FlopModelParams::warnings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (eta_of(i) > 0.5)
            out.push_back("eta for mode '" + modes[i] +
                          "' exceeds 0.5; Lamb-Dicke expansion is marginal");
        auto it = truncation.find(modes[i]);
        if (it != truncation.end() && it->second > 0) {
            double cum = 0.0;
            for (int n = 0; n <= it->second; ++n)
                cum += population_weight(distribution, nbar_of(i), n);
            if (1.0 - cum >= kTailTarget)
                out.push_back("explicit truncation " +
                              std::to_string(it->second) + " for mode '" +
                              modes[i] + "' neglects tail population >= 1e-8");
        }
    }
    return out;
}

double thermal_population(double nbar, int n) {
    if (nbar < 0.0) throw std::invalid_argument("nbar must be non-negative");
    if (n < 0) throw std::invalid_argument("Fock index must be non-negative");
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(n * std::log(nbar) - (n + 1.0) * std::log(nbar + 1.0));
}

double coherent_population(double nbar, int n) {
    if (nbar < 0.0) throw std::invalid_argument("nbar must be non-negative");
    if (n < 0) throw std::invalid_argument("Fock index must be non-negative");
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-nbar + n * std::log(nbar) - std::lgamma(n + 1.0));
}

double population_weight(Distribution d, double nbar, int n) {
    return d == Distribution::Thermal ? thermal_population(nbar, n)
                                      : coherent_population(nbar, n);
}

int auto_truncation(double nbar, Distribution d) {
    if (nbar < 0.0) throw std::invalid_argument("nbar must be non-negative");
    double cum = 0.0;
    int n = 0;
    for (; n < kMaxTruncation; ++n) {
        cum += population_weight(d, nbar, n);
        if (1.0 - cum < kTailTarget) break;
    }
    // One extra level so sums that stop at N-1 keep the same tail bound.
    return std::max(kMinTruncation, n + 1);
}

double rabi_frequency(int n, int kappa, double eta, double omega) {
    if (n < 0 || n + kappa < 0)
        throw std::domain_error("transition below the Fock ladder: n=" +
                                std::to_string(n) +
                                ", kappa=" + std::to_string(kappa));
    if (std::abs(kappa) > 1)
        throw std::invalid_argument(
            "only carrier and first sidebands are supported");
    return omega * d_factor(n, kappa, eta);
}

double ThreeLevelCoefficients::c0_sq(double t_s, double gamma_per_s) const {
    double gc2 = gc * gc;
    if (gc2 == 0.0) return 1.0;
    double decay = std::exp(-gamma_per_s * t_s);
    double g1s = g1 * g1;
    double g2s = g2 * g2;
    return (0.5 * g1s * g1s + 0.5 * g1s * g1s * std::cos(2.0 * gc * t_s) * decay +
            2.0 * g1s * g2s * std::cos(gc * t_s) * decay + g2s * g2s) /
           (gc2 * gc2);
}

double ThreeLevelCoefficients::c1_sq(double t_s, double gamma_per_s) const {
    double gc2 = gc * gc;
    if (gc2 == 0.0) return 0.0;
    double decay = std::exp(-gamma_per_s * t_s);
    return (g1 * g1 / gc2) * 0.5 * (1.0 - std::cos(2.0 * gc * t_s) * decay);
}

ThreeLevelCoefficients three_level_coefficients(int n, int m, int kappa,
                                                int lambda, double eta1,
                                                double eta2, double omega) {
    const double s2h = std::sqrt(2.0) / 2.0;
    ThreeLevelCoefficients c;
    c.g1 = s2h * omega * d_factor(n, kappa, eta1) * d_factor(m, lambda, eta2);
    c.g2 = s2h * omega * d_factor(n + kappa, kappa, eta1) *
           d_factor(m + lambda, lambda, eta2);
    c.gc = std::hypot(c.g1, c.g2);
    return c;
}

double single_ion_flop(const FlopModelParams& params, double t_s, int kappa) {
    return make_kernel(Crystal::OneIonOneMode, params, 0, kappa).eval(t_s);
}

double two_mode_flop(const FlopModelParams& params, double t_s, int which_mode,
                     int kappa) {
    return make_kernel(Crystal::OneIonTwoModes, params, which_mode, kappa)
        .eval(t_s);
}

double two_ion_flop(const FlopModelParams& params, double t_s, int which_mode,
                    int kappa) {
    return make_kernel(Crystal::TwoIonsSameSpecies, params, which_mode, kappa)
        .eval(t_s);
}

double flop_population(Crystal crystal, const FlopModelParams& params,
                       double t_s, int which_mode, int kappa) {
    return make_kernel(crystal, params, which_mode, kappa).eval(t_s);
}

std::vector<double> evaluate_curve(Crystal crystal,
                                   const FlopModelParams& params,
                                   const std::vector<double>& times_s,
                                   int which_mode, int kappa, Execution exec) {
    Kernel kernel = make_kernel(crystal, params, which_mode, kappa);
    std::vector<double> out(times_s.size());
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(times_s.size());
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] =
                kernel.eval(times_s[static_cast<std::size_t>(i)]);
    } else {
        for (std::ptrdiff_t i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] =
                kernel.eval(times_s[static_cast<std::size_t>(i)]);
    }
    return out;
}

int SidebandDataset::mode_index() const {
    for (std::size_t i = 0; i < modes.size(); ++i)
        if (modes[i] == mode_label) return static_cast<int>(i);
    throw std::invalid_argument("driven mode '" + mode_label +
                                "' is not among the dataset modes");
}

void SidebandDataset::validate() const {
    std::size_t need_modes = crystal == Crystal::OneIonOneMode ? 1 : 2;
    if (modes.size() != need_modes)
        throw std::invalid_argument("dataset crystal kind expects " +
                                    std::to_string(need_modes) + " mode(s)");
    mode_index();  // throws when the label is absent
    if (kappa != 1 && kappa != -1)
        throw std::invalid_argument("kappa must be +1 or -1");
    for (const auto& label : modes)
        if (!eta.count(label))
            throw std::invalid_argument("missing eta for mode '" + label +
                                        "'");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (p.t_us < 0.0)
            throw std::invalid_argument("point " + std::to_string(i) +
                                        ": negative duration");
        if (p.population < 0.0 || p.population > 1.0)
            throw std::invalid_argument("point " + std::to_string(i) +
                                        ": population outside [0,1]");
        if (p.shots < 1)
            throw std::invalid_argument("point " + std::to_string(i) +
                                        ": shots must be at least 1");
    }
}

std::string dataset_to_csv(const SidebandDataset& ds) {
    std::string out = "t_us,population,shots\n";
    for (const auto& p : ds.points) {
        out += detail::format_double(p.t_us);
        out += ',';
        out += detail::format_double(p.population);
        out += ',';
        out += std::to_string(p.shots);
        out += '\n';
    }
    return out;
}

std::string dataset_sidecar_json(const SidebandDataset& ds) {
    json j;
    j["format"] = "qccd-sideband-dataset";
    j["version"] = 1;
    j["crystal"] = to_string(ds.crystal);
    j["modes"] = ds.modes;
    j["driven_mode"] = ds.mode_label;
    j["kappa"] = ds.kappa;
    json etas = json::object();
    for (const auto& [label, value] : ds.eta) etas[label] = value;
    j["eta"] = etas;
    return j.dump(2) + "\n";
}

SidebandDataset dataset_from_text(const std::string& csv_text,
                                  const std::string& sidecar_json_text) {
    SidebandDataset ds;
    json j = json::parse(sidecar_json_text);
    if (j.value("format", "") != "qccd-sideband-dataset")
        throw std::invalid_argument("sidecar is not a sideband dataset");
    ds.crystal = crystal_from_string(j.at("crystal").get<std::string>());
    ds.modes = j.at("modes").get<std::vector<std::string>>();
    ds.mode_label = j.at("driven_mode").get<std::string>();
    ds.kappa = j.at("kappa").get<int>();
    for (const auto& [label, value] : j.at("eta").items())
        ds.eta[label] = value.get<double>();

    std::istringstream in(csv_text);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (row == 1) {
            if (t != "t_us,population,shots")
                throw CsvParseError(
                    "expected header 't_us,population,shots', got '" + t + "'",
                    row);
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = t.find(',', start);
            fields.push_back(trim(t.substr(
                start, comma == std::string::npos ? comma : comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 3)
            throw CsvParseError("expected 3 comma-separated fields, got " +
                                    std::to_string(fields.size()),
                                row);
        SidebandPoint p;
        try {
            std::size_t used = 0;
            p.t_us = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("");
            p.population = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("");
            p.shots = std::stol(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw CsvParseError("malformed numeric field in '" + t + "'", row);
        }
        ds.points.push_back(p);
    }
    if (row == 0) throw CsvParseError("empty CSV", 1);
    ds.validate();
    return ds;
}

void save_dataset(const SidebandDataset& ds, const std::string& csv_path) {
    ds.validate();
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
    csv << dataset_to_csv(ds);
    std::string sidecar_path = csv_path + ".json";
    std::ofstream sidecar(sidecar_path);
    if (!sidecar)
        throw std::runtime_error("cannot write '" + sidecar_path + "'");
    sidecar << dataset_sidecar_json(ds);
}

SidebandDataset load_dataset(const std::string& csv_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot read '" + csv_path + "'");
    std::stringstream csv_text;
    csv_text << csv.rdbuf();
    std::string sidecar_path = csv_path + ".json";
    std::ifstream sidecar(sidecar_path);
    if (!sidecar)
        throw std::runtime_error("cannot read '" + sidecar_path + "'");
    std::stringstream sidecar_text;
    sidecar_text << sidecar.rdbuf();
    return dataset_from_text(csv_text.str(), sidecar_text.str());
}

SidebandDataset synthesize_dataset(const FlopModelParams& params,
                                   Crystal crystal,
                                   const std::string& mode_label, int kappa,
                                   const std::vector<double>& times_us,
                                   long shots, std::uint64_t seed) {
    if (shots < 0) throw std::invalid_argument("shots must be >= 0");
    SidebandDataset ds;
    ds.crystal = crystal;
    ds.modes = params.modes;
    ds.mode_label = mode_label;
    ds.kappa = kappa;
    for (const auto& label : params.modes) ds.eta[label] = params.eta.at(label);

    int which_mode = ds.mode_index();
    std::vector<double> times_s(times_us.size());
    for (std::size_t i = 0; i < times_us.size(); ++i)
        times_s[i] = times_us[i] * 1e-6;
    std::vector<double> model =
        evaluate_curve(crystal, params, times_s, which_mode, kappa);

    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };

    ds.points.resize(times_us.size());
    for (std::size_t i = 0; i < times_us.size(); ++i) {
        SidebandPoint& p = ds.points[i];
        p.t_us = times_us[i];
        double prob = std::clamp(model[i], 0.0, 1.0);
        if (shots == 0) {
            // Infinite-shot limit: the noiseless model curve.
            p.population = prob;
            p.shots = 1000000000L;
        } else {
            long bright = 0;
            for (long s = 0; s < shots; ++s)
                if (uniform() < prob) ++bright;
            p.population = static_cast<double>(bright) /
                           static_cast<double>(shots);
            p.shots = shots;
        }
    }
    ds.validate();
    return ds;
}

}  // namespace qccd::thermo
