#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qccd/thermometry.hpp"
#include "test_util.hpp"

using namespace qccd;
using namespace qccd::thermo;

namespace {

// ---------------------------------------------------------------------------
// Independent oracles. Nothing here shares code with the library: matrix
// elements come from diagonalizing the position operator, Fock weights from
// direct ratio formulas, and the two-ion ladder from Runge-Kutta integration.

// |<to| exp(i eta (a + a^dag)) |from>| via eigendecomposition of a + a^dag.
class DisplacementOracle {
  public:
    DisplacementOracle(double eta, int dim) : abs_u_(dim, dim) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i + 1 < dim; ++i)
            x(i, i + 1) = x(i + 1, i) = std::sqrt(i + 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
        const auto& v = es.eigenvectors();
        Eigen::VectorXcd phases(dim);
        for (int i = 0; i < dim; ++i)
            phases(i) = std::exp(std::complex<double>(0.0, eta) *
                                 es.eigenvalues()(i));
        Eigen::MatrixXcd u =
            v * phases.asDiagonal() * v.transpose();
        abs_u_ = u.cwiseAbs();
    }

    // Magnitude of the |from> -> |to> matrix element; zero below the ladder.
    double element(int to, int from) const {
        if (to < 0 || from < 0) return 0.0;
        return abs_u_(to, from);
    }

  private:
    Eigen::MatrixXd abs_u_;
};

double oracle_thermal_weight(double nbar, int n) {
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::pow(nbar / (nbar + 1.0), n) / (nbar + 1.0);
}

std::vector<double> oracle_weights(Distribution d, double nbar, int max_n) {
    std::vector<double> w(static_cast<std::size_t>(max_n) + 1);
    if (d == Distribution::Thermal) {
        for (int n = 0; n <= max_n; ++n)
            w[static_cast<std::size_t>(n)] = oracle_thermal_weight(nbar, n);
    } else {
        double cur = std::exp(-nbar);  // Poisson, built by recurrence
        for (int n = 0; n <= max_n; ++n) {
            w[static_cast<std::size_t>(n)] = cur;
            cur *= nbar / (n + 1.0);
        }
    }
    return w;
}

// Brute-force single-ion sideband sum: bright-state survival probability.
double oracle_single_ion(const DisplacementOracle& u, Distribution dist,
                         double nbar, int trunc, double omega, double gamma,
                         int kappa, double t) {
    auto w = oracle_weights(dist, nbar, trunc);
    const double decay = std::exp(-gamma * t);
    double acc = 0.0;
    if (kappa > 0) {
        for (int n = 0; n < trunc; ++n)
            acc += w[static_cast<std::size_t>(n)] * 0.5 *
                   (1.0 + std::cos(omega * u.element(n + 1, n) * t) * decay);
    } else {
        acc = w[0];  // the ground state cannot emit
        for (int n = 1; n <= trunc; ++n)
            acc += w[static_cast<std::size_t>(n)] * 0.5 *
                   (1.0 + std::cos(omega * u.element(n - 1, n) * t) * decay);
    }
    return acc;
}

// Same with an undriven spectator mode scaling the coupling by its carrier
// matrix element.
double oracle_two_mode(const DisplacementOracle& ud,
                       const DisplacementOracle& us, Distribution dist,
                       double nbar_d, double nbar_s, int trunc_d, int trunc_s,
                       double omega, double gamma, int kappa, double t) {
    auto wd = oracle_weights(dist, nbar_d, trunc_d);
    auto ws = oracle_weights(dist, nbar_s, trunc_s);
    const double decay = std::exp(-gamma * t);
    double acc = 0.0;
    for (int m = 0; m <= trunc_s; ++m) {
        const double dm = us.element(m, m);
        double inner = 0.0;
        if (kappa > 0) {
            for (int n = 0; n < trunc_d; ++n)
                inner += wd[static_cast<std::size_t>(n)] * 0.5 *
                         (1.0 +
                          std::cos(omega * ud.element(n + 1, n) * dm * t) *
                              decay);
        } else {
            inner = wd[0];
            for (int n = 1; n <= trunc_d; ++n)
                inner += wd[static_cast<std::size_t>(n)] * 0.5 *
                         (1.0 +
                          std::cos(omega * ud.element(n - 1, n) * dm * t) *
                              decay);
        }
        acc += ws[static_cast<std::size_t>(m)] * inner;
    }
    return acc;
}

// Bright-state observable of one three-level ladder integrated numerically:
// H = [[0,g1,0],[g1,0,g2],[0,g2,0]], psi(0) = (1,0,0), value
// |psi0|^2 + |psi1|^2 / 2. Decay multiplies the oscillating part only, so
// the damped value is reconstructed around the infinite-time average.
double oracle_ladder(double g1, double g2, double gamma, double t) {
    const double gc2 = g1 * g1 + g2 * g2;
    if (gc2 == 0.0) return 1.0;

    using C = std::complex<double>;
    std::array<C, 3> psi{C(1.0), C(0.0), C(0.0)};
    auto deriv = [&](const std::array<C, 3>& p) {
        const C mi(0.0, -1.0);
        return std::array<C, 3>{mi * (g1 * p[1]),
                                mi * (g1 * p[0] + g2 * p[2]),
                                mi * (g2 * p[1])};
    };
    const double gc = std::sqrt(gc2);
    const int steps = std::max(2000, static_cast<int>(80.0 * gc * t));
    const double h = t / steps;
    for (int s = 0; s < steps; ++s) {
        auto k1 = deriv(psi);
        std::array<C, 3> tmp;
        for (int i = 0; i < 3; ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
        auto k2 = deriv(tmp);
        for (int i = 0; i < 3; ++i) tmp[i] = psi[i] + 0.5 * h * k2[i];
        auto k3 = deriv(tmp);
        for (int i = 0; i < 3; ++i) tmp[i] = psi[i] + h * k3[i];
        auto k4 = deriv(tmp);
        for (int i = 0; i < 3; ++i)
            psi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    const double oscillating =
        std::norm(psi[0]) + 0.5 * std::norm(psi[1]);
    if (gamma == 0.0) return oscillating;

    const double g1s = g1 * g1;
    const double g2s = g2 * g2;
    const double dc =
        (0.5 * g1s * g1s + g2s * g2s) / (gc2 * gc2) + 0.5 * g1s / (2.0 * gc2);
    return dc + (oscillating - dc) * std::exp(-gamma * t);
}

// Brute-force two-ion average over both modes' Fock distributions.
double oracle_two_ion(const DisplacementOracle& ud,
                      const DisplacementOracle& us, Distribution dist,
                      double nbar_d, double nbar_s, int trunc_d, int trunc_s,
                      double omega, double gamma, int kappa, double t) {
    auto wd = oracle_weights(dist, nbar_d, trunc_d);
    auto ws = oracle_weights(dist, nbar_s, trunc_s);
    const double s2h = std::sqrt(2.0) / 2.0;
    const int n_hi = kappa > 0 ? trunc_d - 1 : trunc_d;
    double acc = 0.0;
    for (int m = 0; m <= trunc_s; ++m) {
        const double dm = us.element(m, m);
        double inner = 0.0;
        for (int n = 0; n <= n_hi; ++n) {
            const double g1 = s2h * omega * ud.element(n + kappa, n) * dm;
            const double g2 =
                s2h * omega * ud.element(n + 2 * kappa, n + kappa) * dm;
            inner += wd[static_cast<std::size_t>(n)] *
                     oracle_ladder(g1, g2, gamma, t);
        }
        acc += ws[static_cast<std::size_t>(m)] * inner;
    }
    return acc;
}

FlopModelParams one_mode_params(double omega, double gamma, double nbar,
                                double eta, int trunc,
                                Distribution dist = Distribution::Thermal) {
    FlopModelParams p;
    p.omega_rad_s = omega;
    p.gamma_per_s = gamma;
    p.distribution = dist;
    p.modes = {"axial"};
    p.nbar["axial"] = nbar;
    p.eta["axial"] = eta;
    if (trunc > 0) p.truncation["axial"] = trunc;
    return p;
}

FlopModelParams two_mode_params(double omega, double gamma, double nbar_0,
                                double nbar_1, double eta_0, double eta_1,
                                int trunc_0, int trunc_1,
                                Distribution dist = Distribution::Thermal) {
    FlopModelParams p;
    p.omega_rad_s = omega;
    p.gamma_per_s = gamma;
    p.distribution = dist;
    p.modes = {"COM", "STR"};
    p.nbar["COM"] = nbar_0;
    p.nbar["STR"] = nbar_1;
    p.eta["COM"] = eta_0;
    p.eta["STR"] = eta_1;
    if (trunc_0 > 0) p.truncation["COM"] = trunc_0;
    if (trunc_1 > 0) p.truncation["STR"] = trunc_1;
    return p;
}

constexpr double kOmegaRef = 2.0 * 3.14159265358979323846 * 250.0e3;

}  // namespace

TEST_CASE("Fock-state weights match their defining formulas") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        double nbar = testutil::uniform(rng, 0.0, 8.0);
        int n = testutil::uniform_int(rng, 0, 40);
        CHECK(thermal_population(nbar, n) ==
              doctest::Approx(oracle_thermal_weight(nbar, n))
                  .epsilon(1e-12));
        double poisson = std::exp(-nbar) * std::pow(nbar, n) /
                         std::tgamma(n + 1.0);
        CHECK(coherent_population(nbar, n) ==
              doctest::Approx(poisson).epsilon(1e-10));
    }

    // Geometric ratio between successive thermal weights.
    for (int n = 0; n < 20; ++n)
        CHECK(thermal_population(1.7, n + 1) /
                  thermal_population(1.7, n) ==
              doctest::Approx(1.7 / 2.7).epsilon(1e-12));

    // Normalization.
    for (double nbar : {0.0, 0.2, 1.0, 4.0}) {
        double st = 0.0, sc = 0.0;
        for (int n = 0; n < 400; ++n) {
            st += thermal_population(nbar, n);
            sc += coherent_population(nbar, n);
        }
        CHECK(st == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(sc == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Ground state is certain at nbar = 0.
    CHECK(thermal_population(0.0, 0) == 1.0);
    CHECK(thermal_population(0.0, 3) == 0.0);
    CHECK(coherent_population(0.0, 0) == 1.0);
    CHECK(coherent_population(0.0, 2) == 0.0);

    CHECK(population_weight(Distribution::Thermal, 0.5, 2) ==
          thermal_population(0.5, 2));
    CHECK(population_weight(Distribution::Coherent, 0.5, 2) ==
          coherent_population(0.5, 2));

    CHECK_THROWS_AS(thermal_population(-0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(thermal_population(0.1, -1), std::invalid_argument);
    CHECK_THROWS_AS(coherent_population(-0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(coherent_population(0.1, -1), std::invalid_argument);
}

TEST_CASE("automatic truncation keeps the neglected tail below 1e-8") {
    for (Distribution d : {Distribution::Thermal, Distribution::Coherent}) {
        for (double nbar : {0.0, 0.05, 0.43, 1.1, 1.7, 5.0, 20.0}) {
            int trunc = auto_truncation(nbar, d);
            CHECK(trunc >= 4);
            double cum = 0.0;
            for (int n = 0; n < trunc; ++n)
                cum += population_weight(d, nbar, n);
            CHECK(1.0 - cum < 1e-8);
        }
    }
    // Large occupations need deep ladders; the bound is tight-ish.
    int deep = auto_truncation(20.0, Distribution::Thermal);
    CHECK(deep > 300);
    double cum = 0.0;
    for (int n = 0; n + 1 < deep; ++n)
        cum += thermal_population(20.0, n);
    CHECK(1.0 - cum >= 1e-8);  // one level less would not have sufficed
    CHECK_THROWS_AS(auto_truncation(-1.0, Distribution::Thermal),
                    std::invalid_argument);
}

TEST_CASE("sideband coupling factors match the displacement operator") {
    for (double eta : {0.05, 0.11, 0.18, 0.3, 0.45, 0.6}) {
        DisplacementOracle oracle(eta, 140);
        for (int n = 0; n <= 30; ++n) {
            for (int kappa : {-1, 0, 1}) {
                if (n + kappa < 0) continue;
                CAPTURE(eta);
                CAPTURE(n);
                CAPTURE(kappa);
                double lib = rabi_frequency(n, kappa, eta, 1.0);
                double want = oracle.element(n + kappa, n);
                CHECK(std::abs(lib - want) < 1e-9);
            }
        }
    }

    // eta = 0: carrier only.
    CHECK(rabi_frequency(3, 0, 0.0, 2.0) == doctest::Approx(2.0));
    CHECK(rabi_frequency(3, 1, 0.0, 2.0) == 0.0);
    CHECK(rabi_frequency(3, -1, 0.0, 2.0) == 0.0);

    // The overall drive strength scales linearly.
    CHECK(rabi_frequency(2, 1, 0.2, 3.0) ==
          doctest::Approx(3.0 * rabi_frequency(2, 1, 0.2, 1.0))
              .epsilon(1e-12));

    CHECK_THROWS_AS(rabi_frequency(0, -1, 0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(rabi_frequency(-1, 0, 0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(rabi_frequency(1, 2, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(rabi_frequency(5, -2, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("three-level ladder coefficients") {
    auto c = three_level_coefficients(2, 1, 1, 0, 0.18, 0.11, kOmegaRef);
    CHECK(c.gc == doctest::Approx(std::hypot(c.g1, c.g2)).epsilon(1e-12));
    CHECK(c.g1 > 0.0);
    CHECK(c.g2 > 0.0);

    // At t = 0 the initial state is certain.
    CHECK(c.c0_sq(0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.c1_sq(0.0, 0.0) == doctest::Approx(0.0));

    // Populations stay inside [0, 1] and sum below 1, decayed or not.
    std::mt19937_64 rng(55);
    for (int i = 0; i < 200; ++i) {
        double t = testutil::uniform(rng, 0.0, 40e-6);
        double gamma = testutil::coin(rng) ? 0.0
                                           : testutil::uniform(rng, 0.0, 5e4);
        double p0 = c.c0_sq(t, gamma);
        double p1 = c.c1_sq(t, gamma);
        CHECK(p0 >= -1e-12);
        CHECK(p1 >= -1e-12);
        CHECK(p0 + p1 <= 1.0 + 1e-12);
    }

    // Closed form against direct integration of the ladder.
    for (int i = 0; i < 25; ++i) {
        double g1 = testutil::uniform(rng, 0.0, 1.5e6);
        double g2 = testutil::uniform(rng, 0.0, 1.5e6);
        double t = testutil::uniform(rng, 0.0, 25e-6);
        double gamma = testutil::coin(rng) ? 0.0
                                           : testutil::uniform(rng, 0.0, 5e4);
        ThreeLevelCoefficients k;
        k.g1 = g1;
        k.g2 = g2;
        k.gc = std::hypot(g1, g2);
        double closed = k.c0_sq(t, gamma) + 0.5 * k.c1_sq(t, gamma);
        double integrated = oracle_ladder(g1, g2, gamma, t);
        CAPTURE(g1);
        CAPTURE(g2);
        CAPTURE(t);
        CAPTURE(gamma);
        CHECK(std::abs(closed - integrated) < 1e-6);
    }

    // A fully uncoupled ladder never evolves.
    auto inert = three_level_coefficients(0, 0, -1, 0, 0.2, 0.1, kOmegaRef);
    CHECK(inert.gc == 0.0);
    CHECK(inert.c0_sq(1e-5, 0.0) == 1.0);
    CHECK(inert.c1_sq(1e-5, 0.0) == 0.0);
}

TEST_CASE("single-ion model matches the brute-force oracle") {
    std::mt19937_64 rng(2101);
    for (int trial = 0; trial < 40; ++trial) {
        double eta = testutil::uniform(rng, 0.03, 0.45);
        double nbar = testutil::uniform(rng, 0.0, 3.0);
        double omega = testutil::uniform(rng, 2e5, 2e6);
        double gamma = testutil::coin(rng) ? 0.0
                                           : testutil::uniform(rng, 0.0, 4e4);
        int trunc = testutil::uniform_int(rng, 4, 12);
        int kappa = testutil::coin(rng) ? 1 : -1;
        Distribution dist = testutil::coin(rng) ? Distribution::Thermal
                                                : Distribution::Coherent;
        double t = testutil::uniform(rng, 0.0, 30e-6);

        auto params = one_mode_params(omega, gamma, nbar, eta, trunc, dist);
        DisplacementOracle oracle(eta, trunc + 60);
        double lib = single_ion_flop(params, t, kappa);
        double want = oracle_single_ion(oracle, dist, nbar, trunc, omega,
                                        gamma, kappa, t);
        CAPTURE(trial);
        CHECK(std::abs(lib - want) < 1e-9);
    }

    // Ground state on the red sideband never leaves bright.
    auto cold = one_mode_params(kOmegaRef, 0.0, 0.0, 0.2, 0);
    for (double t_us : {0.0, 3.0, 11.0, 47.0})
        CHECK(single_ion_flop(cold, t_us * 1e-6, -1) ==
              doctest::Approx(1.0).epsilon(1e-12));

    // Ground state on the blue sideband flops at the first sideband rate.
    double d01 = rabi_frequency(0, 1, 0.2, kOmegaRef);
    for (double t_us : {1.0, 5.0, 9.0}) {
        double t = t_us * 1e-6;
        CHECK(single_ion_flop(cold, t, +1) ==
              doctest::Approx(0.5 * (1.0 + std::cos(d01 * t)))
                  .epsilon(1e-9));
    }

    // Decay pulls the curve toward one half.
    auto damped = one_mode_params(kOmegaRef, 3e5, 0.0, 0.2, 0);
    CHECK(single_ion_flop(damped, 60e-6, +1) ==
          doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("two-mode model matches the brute-force oracle") {
    std::mt19937_64 rng(2202);
    for (int trial = 0; trial < 30; ++trial) {
        double eta0 = testutil::uniform(rng, 0.03, 0.4);
        double eta1 = testutil::uniform(rng, 0.03, 0.4);
        double nbar0 = testutil::uniform(rng, 0.0, 2.5);
        double nbar1 = testutil::uniform(rng, 0.0, 2.5);
        double omega = testutil::uniform(rng, 2e5, 2e6);
        double gamma = testutil::coin(rng) ? 0.0
                                           : testutil::uniform(rng, 0.0, 4e4);
        int t0 = testutil::uniform_int(rng, 4, 10);
        int t1 = testutil::uniform_int(rng, 4, 10);
        int kappa = testutil::coin(rng) ? 1 : -1;
        int which = testutil::coin(rng) ? 0 : 1;
        Distribution dist = testutil::coin(rng) ? Distribution::Thermal
                                                : Distribution::Coherent;
        double t = testutil::uniform(rng, 0.0, 30e-6);

        auto params = two_mode_params(omega, gamma, nbar0, nbar1, eta0, eta1,
                                      t0, t1, dist);
        double lib = two_mode_flop(params, t, which, kappa);

        // Swap roles so index 0 is always the driven mode in the oracle.
        double nd = which == 0 ? nbar0 : nbar1;
        double ns = which == 0 ? nbar1 : nbar0;
        double ed = which == 0 ? eta0 : eta1;
        double es = which == 0 ? eta1 : eta0;
        int td = which == 0 ? t0 : t1;
        int ts = which == 0 ? t1 : t0;
        DisplacementOracle ud(ed, td + 60);
        DisplacementOracle us(es, ts + 60);
        double want = oracle_two_mode(ud, us, dist, nd, ns, td, ts, omega,
                                      gamma, kappa, t);
        CAPTURE(trial);
        CHECK(std::abs(lib - want) < 1e-9);
    }

    // A ground-state zero-eta spectator leaves the single-mode physics
    // untouched exactly; a hot zero-eta spectator only up to its own
    // truncation tail (weights are not renormalized).
    auto alone = one_mode_params(kOmegaRef, 1e4, 0.7, 0.18, 8);
    auto coupled = two_mode_params(kOmegaRef, 1e4, 0.7, 0.0, 0.18, 0.0, 8, 5);
    auto hot = two_mode_params(kOmegaRef, 1e4, 0.7, 2.0, 0.18, 0.0, 8, 0);
    for (double t_us : {2.0, 7.0, 19.0}) {
        double t = t_us * 1e-6;
        double solo = single_ion_flop(alone, t, +1);
        CHECK(two_mode_flop(coupled, t, 0, +1) ==
              doctest::Approx(solo).epsilon(1e-12));
        CHECK(std::abs(two_mode_flop(hot, t, 0, +1) - solo) < 1e-7);
    }
}

TEST_CASE("two-ion model matches the integrated three-level oracle") {
    std::mt19937_64 rng(2303);
    for (int trial = 0; trial < 25; ++trial) {
        double eta0 = testutil::uniform(rng, 0.05, 0.3);
        double eta1 = testutil::uniform(rng, 0.05, 0.3);
        double nbar0 = testutil::uniform(rng, 0.0, 2.0);
        double nbar1 = testutil::uniform(rng, 0.0, 2.0);
        double omega = testutil::uniform(rng, 2e5, 1.2e6);
        double gamma = testutil::coin(rng) ? 0.0
                                           : testutil::uniform(rng, 0.0, 4e4);
        int t0 = testutil::uniform_int(rng, 4, 8);
        int t1 = testutil::uniform_int(rng, 4, 8);
        int kappa = testutil::coin(rng) ? 1 : -1;
        int which = testutil::coin(rng) ? 0 : 1;
        Distribution dist = testutil::coin(rng) ? Distribution::Thermal
                                                : Distribution::Coherent;
        double t = testutil::uniform(rng, 0.0, 20e-6);

        auto params = two_mode_params(omega, gamma, nbar0, nbar1, eta0, eta1,
                                      t0, t1, dist);
        double lib = two_ion_flop(params, t, which, kappa);

        double nd = which == 0 ? nbar0 : nbar1;
        double ns = which == 0 ? nbar1 : nbar0;
        double ed = which == 0 ? eta0 : eta1;
        double es = which == 0 ? eta1 : eta0;
        int td = which == 0 ? t0 : t1;
        int ts = which == 0 ? t1 : t0;
        DisplacementOracle ud(ed, td + 60);
        DisplacementOracle us(es, ts + 60);
        double want = oracle_two_ion(ud, us, dist, nd, ns, td, ts, omega,
                                     gamma, kappa, t);
        CAPTURE(trial);
        CHECK(std::abs(lib - want) < 1e-6);
    }

    // Both modes in the ground state: red sideband drives nothing.
    auto cold = two_mode_params(kOmegaRef, 0.0, 0.0, 0.0, 0.18, 0.11, 0, 0);
    CHECK(two_ion_flop(cold, 13e-6, 0, -1) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // The blue sideband does, and the closed form describes it.
    auto k = three_level_coefficients(0, 0, 1, 0, 0.18, 0.11, kOmegaRef);
    double t = 9e-6;
    CHECK(two_ion_flop(cold, t, 0, +1) ==
          doctest::Approx(k.c0_sq(t, 0.0) + 0.5 * k.c1_sq(t, 0.0))
              .epsilon(1e-7));
}

TEST_CASE("crystal dispatch and argument screening") {
    auto p1 = one_mode_params(kOmegaRef, 0.0, 0.5, 0.2, 6);
    auto p2 = two_mode_params(kOmegaRef, 0.0, 0.5, 0.3, 0.2, 0.1, 6, 6);
    double t = 8e-6;

    CHECK(flop_population(Crystal::OneIonOneMode, p1, t, 0, +1) ==
          single_ion_flop(p1, t, +1));
    CHECK(flop_population(Crystal::OneIonTwoModes, p2, t, 1, -1) ==
          two_mode_flop(p2, t, 1, -1));
    CHECK(flop_population(Crystal::TwoIonsSameSpecies, p2, t, 0, +1) ==
          two_ion_flop(p2, t, 0, +1));

    // kappa must be a first sideband.
    CHECK_THROWS_AS(single_ion_flop(p1, t, 0), std::invalid_argument);
    CHECK_THROWS_AS(single_ion_flop(p1, t, 2), std::invalid_argument);
    // Mode counts must match the crystal kind.
    CHECK_THROWS_AS(single_ion_flop(p2, t, +1), std::invalid_argument);
    CHECK_THROWS_AS(two_mode_flop(p1, t, 0, +1), std::invalid_argument);
    CHECK_THROWS_AS(two_ion_flop(p1, t, 0, +1), std::invalid_argument);
    // Drive index must be in range.
    CHECK_THROWS_AS(two_mode_flop(p2, t, 2, +1), std::invalid_argument);
    CHECK_THROWS_AS(two_mode_flop(p2, t, -1, +1), std::invalid_argument);

    CHECK(to_string(Crystal::TwoIonsSameSpecies) == "two_ions_same_species");
    for (Crystal c : {Crystal::OneIonOneMode, Crystal::OneIonTwoModes,
                      Crystal::TwoIonsSameSpecies})
        CHECK(crystal_from_string(to_string(c)) == c);
    CHECK_THROWS_AS(crystal_from_string("three_ions"), std::invalid_argument);
}

TEST_CASE("parameter validation and advisories") {
    auto good = one_mode_params(kOmegaRef, 0.0, 0.5, 0.2, 0);
    CHECK_NOTHROW(good.validate());
    CHECK(good.warnings().empty());

    auto bad = good;
    bad.omega_rad_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.gamma_per_s = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.nbar["axial"] = -0.2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.eta["axial"] = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.modes = {};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.modes = {"axial", "axial"};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.modes = {"a", "b", "c"};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = good;
    bad.modes = {"missing"};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    // Soft advisories do not throw.
    auto marginal = one_mode_params(kOmegaRef, 0.0, 0.5, 0.55, 0);
    CHECK_NOTHROW(marginal.validate());
    auto w1 = marginal.warnings();
    REQUIRE(w1.size() == 1);
    CHECK(w1[0].find("0.5") != std::string::npos);

    auto clipped = one_mode_params(kOmegaRef, 0.0, 2.0, 0.2, 3);
    auto w2 = clipped.warnings();
    REQUIRE(w2.size() == 1);
    CHECK(w2[0].find("truncation") != std::string::npos);
    // The same explicit truncation is fine for a cold mode.
    auto fine = one_mode_params(kOmegaRef, 0.0, 0.0, 0.2, 3);
    CHECK(fine.warnings().empty());
}

TEST_CASE("deeper truncation does not change converged curves") {
    auto base = one_mode_params(kOmegaRef, 0.0, 1.3, 0.18, 0);
    int autoN = auto_truncation(1.3, Distribution::Thermal);
    auto deeper = one_mode_params(kOmegaRef, 0.0, 1.3, 0.18, autoN + 10);
    for (double t_us : {1.0, 6.0, 17.0, 28.0}) {
        double t = t_us * 1e-6;
        for (int kappa : {-1, +1})
            CHECK(std::abs(single_ion_flop(base, t, kappa) -
                           single_ion_flop(deeper, t, kappa)) < 1e-6);
    }

    auto base2 = two_mode_params(kOmegaRef, 0.0, 0.8, 0.6, 0.18, 0.11, 0, 0);
    auto deep2 = two_mode_params(kOmegaRef, 0.0, 0.8, 0.6, 0.18, 0.11,
                                 auto_truncation(0.8, Distribution::Thermal) +
                                     10,
                                 auto_truncation(0.6, Distribution::Thermal) +
                                     10);
    for (double t_us : {2.0, 9.0, 21.0}) {
        double t = t_us * 1e-6;
        CHECK(std::abs(two_mode_flop(base2, t, 0, +1) -
                       two_mode_flop(deep2, t, 0, +1)) < 1e-6);
        CHECK(std::abs(two_ion_flop(base2, t, 1, -1) -
                       two_ion_flop(deep2, t, 1, -1)) < 1e-6);
    }
}

TEST_CASE("curves stay inside [0, 1] and run identically in parallel") {
    std::mt19937_64 rng(31415);
    std::vector<double> times;
    for (int i = 0; i < 200; ++i)
        times.push_back(testutil::uniform(rng, 0.0, 60e-6));

    for (int rep = 0; rep < 6; ++rep) {
        Crystal crystal = rep % 3 == 0   ? Crystal::OneIonOneMode
                          : rep % 3 == 1 ? Crystal::OneIonTwoModes
                                         : Crystal::TwoIonsSameSpecies;
        FlopModelParams params =
            crystal == Crystal::OneIonOneMode
                ? one_mode_params(testutil::uniform(rng, 2e5, 2e6),
                                  testutil::uniform(rng, 0.0, 3e4),
                                  testutil::uniform(rng, 0.0, 2.0),
                                  testutil::uniform(rng, 0.05, 0.4), 0)
                : two_mode_params(testutil::uniform(rng, 2e5, 2e6),
                                  testutil::uniform(rng, 0.0, 3e4),
                                  testutil::uniform(rng, 0.0, 2.0),
                                  testutil::uniform(rng, 0.0, 2.0),
                                  testutil::uniform(rng, 0.05, 0.4),
                                  testutil::uniform(rng, 0.05, 0.4), 0, 0);
        int which = crystal == Crystal::OneIonOneMode ? 0 : rep % 2;
        int kappa = testutil::coin(rng) ? 1 : -1;

        auto serial = evaluate_curve(crystal, params, times, which, kappa,
                                     Execution::Serial);
        auto parallel = evaluate_curve(crystal, params, times, which, kappa,
                                       Execution::Parallel);
        REQUIRE(serial.size() == times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            CHECK(serial[i] == parallel[i]);  // bit-identical
            CHECK(serial[i] >= 0.0);
            CHECK(serial[i] <= 1.0 + 1e-12);
            // And the curve agrees with the scalar entry point.
            if (i % 50 == 0)
                CHECK(serial[i] ==
                      flop_population(crystal, params, times[i], which,
                                      kappa));
        }
    }
}

TEST_CASE("datasets serialize, parse, and report malformed rows") {
    SidebandDataset ds;
    ds.crystal = Crystal::TwoIonsSameSpecies;
    ds.modes = {"COM", "STR"};
    ds.mode_label = "STR";
    ds.kappa = -1;
    ds.eta["COM"] = 0.18;
    ds.eta["STR"] = 0.11;
    ds.points = {{0.0, 1.0, 250}, {2.5, 0.84, 250}, {5.0, 0.52, 250}};
    CHECK_NOTHROW(ds.validate());
    CHECK(ds.mode_index() == 1);

    std::string csv = dataset_to_csv(ds);
    std::string sidecar = dataset_sidecar_json(ds);
    CHECK(csv.substr(0, 22) == "t_us,population,shots\n");

    SidebandDataset back = dataset_from_text(csv, sidecar);
    CHECK(dataset_to_csv(back) == csv);
    CHECK(dataset_sidecar_json(back) == sidecar);
    CHECK(back.crystal == ds.crystal);
    CHECK(back.modes == ds.modes);
    CHECK(back.mode_label == ds.mode_label);
    CHECK(back.kappa == ds.kappa);
    CHECK(back.eta == ds.eta);
    REQUIRE(back.points.size() == 3);
    CHECK(back.points[1].t_us == 2.5);
    CHECK(back.points[1].population == 0.84);
    CHECK(back.points[1].shots == 250);

    SUBCASE("file round trip") {
        testutil::ScratchDir dir;
        std::string path = dir.file("curve.csv");
        save_dataset(ds, path);
        SidebandDataset loaded = load_dataset(path);
        CHECK(dataset_to_csv(loaded) == csv);
        CHECK_THROWS_AS(load_dataset(dir.file("absent.csv")),
                        std::runtime_error);
    }

    SUBCASE("CSV errors carry 1-based row numbers") {
        auto row_of = [&](const std::string& text) -> std::size_t {
            try {
                (void)dataset_from_text(text, sidecar);
            } catch (const CsvParseError& e) {
                return e.row();
            }
            return 0;
        };
        CHECK(row_of("wrong,header\n1,0.5,10\n") == 1);
        CHECK(row_of("t_us,population,shots\n1,0.5\n") == 2);
        CHECK(row_of("t_us,population,shots\n1,0.5,10\n2,oops,10\n") == 3);
        CHECK(row_of("t_us,population,shots\n1,0.5,10x\n") == 2);
        CHECK(row_of("") == 1);
        // Blank separator lines are fine.
        CHECK_NOTHROW(
            dataset_from_text("t_us,population,shots\n\n1,0.5,10\n",
                              sidecar));
    }

    SUBCASE("sidecar and dataset validation") {
        CHECK_THROWS_AS(dataset_from_text(csv, "{\"format\":\"nope\"}"),
                        std::invalid_argument);
        SidebandDataset bad = ds;
        bad.points[0].population = 1.5;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.points[0].shots = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.points[0].t_us = -1.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.kappa = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.mode_label = "axial";
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.modes = {"COM"};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = ds;
        bad.eta.erase("COM");
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("synthesized datasets are deterministic in the seed") {
    auto params = one_mode_params(kOmegaRef, 500.0, 0.43, 0.3, 0);
    std::vector<double> times;
    for (int i = 0; i < 40; ++i) times.push_back(i * 1.5);

    auto a = synthesize_dataset(params, Crystal::OneIonOneMode, "axial", +1,
                                times, 250, 99);
    auto b = synthesize_dataset(params, Crystal::OneIonOneMode, "axial", +1,
                                times, 250, 99);
    auto c = synthesize_dataset(params, Crystal::OneIonOneMode, "axial", +1,
                                times, 250, 100);

    CHECK(dataset_to_csv(a) == dataset_to_csv(b));
    CHECK(dataset_to_csv(a) != dataset_to_csv(c));
    CHECK_NOTHROW(a.validate());
    REQUIRE(a.points.size() == times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(a.points[i].t_us == times[i]);
        CHECK(a.points[i].shots == 250);
        // Counted fractions live on the shot grid.
        double grid = a.points[i].population * 250.0;
        CHECK(std::abs(grid - std::round(grid)) < 1e-9);
    }
    CHECK(a.eta.at("axial") == 0.3);
    CHECK(a.mode_label == "axial");

    // Zero shots selects the noiseless model curve.
    auto exact = synthesize_dataset(params, Crystal::OneIonOneMode, "axial",
                                    +1, times, 0, 7);
    std::vector<double> times_s;
    for (double t : times) times_s.push_back(t * 1e-6);
    auto model = evaluate_curve(Crystal::OneIonOneMode, params, times_s, 0,
                                +1, Execution::Serial);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(exact.points[i].population == model[i]);
        CHECK(exact.points[i].shots == 1000000000L);
    }

    // With many shots the sample tracks the model closely.
    auto dense = synthesize_dataset(params, Crystal::OneIonOneMode, "axial",
                                    +1, times, 20000, 3);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        worst = std::max(worst,
                         std::abs(dense.points[i].population - model[i]));
    CHECK(worst < 0.02);

    CHECK_THROWS_AS(synthesize_dataset(params, Crystal::OneIonOneMode,
                                       "axial", +1, times, -1, 1),
                    std::invalid_argument);
}
