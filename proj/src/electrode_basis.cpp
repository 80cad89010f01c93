#include "qccd/electrode_basis.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace qccd::wave {

namespace {

using nlohmann::json;

// d^n/du^n of exp(-u^2 / (2 sigma^2)) via probabilists' Hermite polynomials:
// the n-th derivative is (-1/sigma)^n He_n(u/sigma) times the Gaussian.
double gaussian_derivative(double u_m, double sigma_m, int order) {
    double y = u_m / sigma_m;
    double he_prev = 1.0;  // He_0
    double he = y;         // He_1
    double he_n;
    if (order == 0) {
        he_n = 1.0;
    } else if (order == 1) {
        he_n = y;
    } else {
        for (int n = 1; n < order; ++n) {
            double next = y * he - n * he_prev;
            he_prev = he;
            he = next;
        }
        he_n = he;
    }
    double sign_scale = std::pow(-1.0 / sigma_m, order);
    return sign_scale * he_n * std::exp(-0.5 * y * y);
}

double kernel_derivative(const GaussianKernel& k,
                         std::array<double, 2> point_um, int dx, int dz) {
    double sigma_m = k.width_um * 1e-6;
    double ux = (point_um[0] - k.center_um[0]) * 1e-6;
    double uz = (point_um[1] - k.center_um[1]) * 1e-6;
    return k.amplitude * gaussian_derivative(ux, sigma_m, dx) *
           gaussian_derivative(uz, sigma_m, dz);
}

void check_order(int dx, int dz) {
    if (dx < 0 || dz < 0 || dx + dz > 4)
        throw std::out_of_range("derivative order must satisfy 0 <= dx+dz <= 4");
}

json kernel_to_json(const GaussianKernel& k) {
    json j;
    j["center_um"] = {k.center_um[0], k.center_um[1]};
    j["width_um"] = k.width_um;
    j["amplitude"] = k.amplitude;
    return j;
}

GaussianKernel kernel_from_json(const json& j) {
    GaussianKernel k;
    auto c = j.at("center_um");
    k.center_um = {c.at(0).get<double>(), c.at(1).get<double>()};
    k.width_um = j.at("width_um").get<double>();
    k.amplitude = j.at("amplitude").get<double>();
    if (!(k.width_um > 0.0))
        throw std::invalid_argument("kernel width must be positive");
    return k;
}

std::vector<GaussianKernel> default_e2_bumps() {
    // Four pseudopotential bumps flanking the junction center.
    const double kBumpE2 = 5e9;     // (V/m)^2 at unit drive amplitude
    const double kBumpWidth = 25.0; // um
    std::vector<GaussianKernel> bumps;
    for (auto [bx, bz] : {std::pair{60.0, 0.0}, std::pair{-60.0, 0.0},
                          std::pair{0.0, 60.0}, std::pair{0.0, -60.0}})
        bumps.push_back(GaussianKernel{{bx, bz}, kBumpWidth, kBumpE2});
    return bumps;
}

const double kPi = 3.14159265358979323846;

}  // namespace

ElectrodeBasis::ElectrodeBasis(std::vector<Electrode> electrodes, RfModel rf)
    : electrodes_(std::move(electrodes)), rf_(std::move(rf)) {
    for (const auto& e : electrodes_) {
        if (e.name.empty())
            throw std::invalid_argument("electrode without a name");
        for (const auto& k : e.kernels)
            if (!(k.width_um > 0.0))
                throw std::invalid_argument("electrode '" + e.name +
                                            "' has a non-positive kernel width");
    }
    if (!(rf_.frequency_hz > 0.0))
        throw std::invalid_argument("RF frequency must be positive");
    for (const auto& b : rf_.e2_bumps)
        if (b.amplitude < 0.0)
            throw std::invalid_argument(
                "RF |E|^2 bump amplitudes must be non-negative");
}

ElectrodeBasis ElectrodeBasis::synthetic_default() {
    const double kWidth = 59.0;  // um
    const double kSpacing = 55.0;  // um
    const double kAmp = 0.2;       // volts at kernel center per applied volt
    std::vector<Electrode> electrodes;
    auto add = [&](const std::string& name, double x, double z) {
        electrodes.push_back(
            Electrode{name, {GaussianKernel{{x, z}, kWidth, kAmp}}});
    };
    auto pad2 = [](int i) {
        return (i < 10 ? "0" : "") + std::to_string(i);
    };
    // Four arms around the junction: the experiment column runs along -z
    // (long), the opposite arm along +z, and two transverse arms along +-x.
    for (int i = 0; i < 18; ++i) add("S" + pad2(i), 0.0, -110.0 - kSpacing * i);
    for (int i = 0; i < 9; ++i) add("H" + pad2(i), 0.0, 110.0 + kSpacing * i);
    for (int i = 0; i < 6; ++i) add("V" + pad2(i), 110.0 + kSpacing * i, 0.0);
    for (int i = 0; i < 6; ++i) add("W" + pad2(i), -110.0 - kSpacing * i, 0.0);
    add("J00", 0.0, 0.0);
    // Diagonal rotation electrodes in the junction corners: the only
    // elements with a non-zero d2/dxdz response at the center, needed to
    // rotate a well's principal axes.
    add("D00", 78.0, 78.0);
    add("D01", -78.0, 78.0);
    add("D02", -78.0, -78.0);
    add("D03", 78.0, -78.0);

    RfModel rf;
    rf.amplitude_v = 1.0;
    rf.frequency_hz = 82.0e6;
    rf.e2_bumps = default_e2_bumps();
    return ElectrodeBasis(std::move(electrodes), std::move(rf));
}

ElectrodeBasis ElectrodeBasis::from_json_text(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format", "") != "qccd-electrode-basis")
        throw std::invalid_argument("not an electrode-basis document");
    std::vector<Electrode> electrodes;
    for (const auto& je : j.at("electrodes")) {
        Electrode e;
        e.name = je.at("name").get<std::string>();
        for (const auto& jk : je.at("kernels"))
            e.kernels.push_back(kernel_from_json(jk));
        electrodes.push_back(std::move(e));
    }
    RfModel rf;
    const auto& jr = j.at("rf");
    rf.amplitude_v = jr.at("amplitude_v").get<double>();
    rf.frequency_hz = jr.at("frequency_hz").get<double>();
    for (const auto& jb : jr.at("e2_bumps"))
        rf.e2_bumps.push_back(kernel_from_json(jb));
    return ElectrodeBasis(std::move(electrodes), std::move(rf));
}

std::string ElectrodeBasis::to_json_text() const {
    json j;
    j["format"] = "qccd-electrode-basis";
    j["version"] = 1;
    json jes = json::array();
    for (const auto& e : electrodes_) {
        json je;
        je["name"] = e.name;
        json jks = json::array();
        for (const auto& k : e.kernels) jks.push_back(kernel_to_json(k));
        je["kernels"] = jks;
        jes.push_back(je);
    }
    j["electrodes"] = jes;
    json jr;
    jr["amplitude_v"] = rf_.amplitude_v;
    jr["frequency_hz"] = rf_.frequency_hz;
    json jbs = json::array();
    for (const auto& b : rf_.e2_bumps) jbs.push_back(kernel_to_json(b));
    jr["e2_bumps"] = jbs;
    j["rf"] = jr;
    return j.dump(2) + "\n";
}

double ElectrodeBasis::electrode_derivative(std::size_t e,
                                            std::array<double, 2> point_um,
                                            int dx, int dz) const {
    check_order(dx, dz);
    if (e >= electrodes_.size())
        throw std::out_of_range("electrode index out of range");
    double acc = 0.0;
    for (const auto& k : electrodes_[e].kernels)
        acc += kernel_derivative(k, point_um, dx, dz);
    return acc;
}

double ElectrodeBasis::pseudo_derivative(std::array<double, 2> point_um,
                                         int dx, int dz,
                                         double mass_kg) const {
    check_order(dx, dz);
    if (!(mass_kg > 0.0))
        throw std::invalid_argument("mass must be positive");
    double omega_rf = 2.0 * kPi * rf_.frequency_hz;
    // q |E|^2 / (4 m Omega^2): pseudopotential energy per unit charge.
    double prefactor = constants::elementary_charge *
                       rf_.amplitude_v * rf_.amplitude_v /
                       (4.0 * mass_kg * omega_rf * omega_rf);
    double acc = 0.0;
    for (const auto& b : rf_.e2_bumps)
        acc += kernel_derivative(b, point_um, dx, dz);
    return prefactor * acc;
}

double Moments::d(int dx, int dz) const {
    check_order(dx, dz);
    return d_[static_cast<std::size_t>(dx * 5 + dz)];
}

double& Moments::d(int dx, int dz) {
    check_order(dx, dz);
    return d_[static_cast<std::size_t>(dx * 5 + dz)];
}

double Moments::directional(int order, double angle_rad) const {
    if (order < 0 || order > 4)
        throw std::out_of_range("directional order must be 0..4");
    static const double binom[5][5] = {{1, 0, 0, 0, 0},
                                       {1, 1, 0, 0, 0},
                                       {1, 2, 1, 0, 0},
                                       {1, 3, 3, 1, 0},
                                       {1, 4, 6, 4, 1}};
    double ux = std::sin(angle_rad);
    double uz = std::cos(angle_rad);
    double acc = 0.0;
    for (int k = 0; k <= order; ++k)
        acc += binom[order][k] * std::pow(ux, k) * std::pow(uz, order - k) *
               d(k, order - k);
    return acc;
}

double Moments::cross_curvature(double angle_rad) const {
    double s = std::sin(angle_rad);
    double c = std::cos(angle_rad);
    // u = (s, c), v = (c, -s): sum_{ij} u_i v_j d2/dri drj.
    return s * c * (d(2, 0) - d(0, 2)) + (c * c - s * s) * d(1, 1);
}

Moments moments_at(const ElectrodeBasis& basis, std::array<double, 2> point_um,
                   const std::vector<double>& voltages, double mass_kg) {
    if (voltages.size() != basis.size())
        throw std::invalid_argument("expected " + std::to_string(basis.size()) +
                                    " voltages, got " +
                                    std::to_string(voltages.size()));
    Moments m;
    for (int dx = 0; dx <= 4; ++dx)
        for (int dz = 0; dz + dx <= 4; ++dz) {
            double acc = basis.pseudo_derivative(point_um, dx, dz, mass_kg);
            for (std::size_t e = 0; e < basis.size(); ++e)
                acc += voltages[e] * basis.electrode_derivative(e, point_um,
                                                                dx, dz);
            m.d(dx, dz) = acc;
        }
    return m;
}

double pseudopotential(std::array<double, 2> point_um, double rf_amplitude_v,
                       double rf_frequency_hz, double mass_kg) {
    if (!(rf_frequency_hz > 0.0))
        throw std::invalid_argument("RF frequency must be positive");
    if (!(mass_kg > 0.0))
        throw std::invalid_argument("mass must be positive");
    double e2 = 0.0;
    for (const auto& b : default_e2_bumps())
        e2 += kernel_derivative(b, point_um, 0, 0);
    e2 *= rf_amplitude_v * rf_amplitude_v;
    double omega_rf = 2.0 * kPi * rf_frequency_hz;
    double q = constants::elementary_charge;
    return q * q * e2 / (4.0 * mass_kg * omega_rf * omega_rf);
}

}  // namespace qccd::wave
