#pragma once

#include <cmath>

namespace qccd {

// A measured or derived scalar with a 1-sigma uncertainty. Independent
// uncertainties combine in quadrature.
struct Quantity {
    double value = 0.0;
    double sigma = 0.0;

    Quantity() = default;
    Quantity(double v, double s = 0.0) : value(v), sigma(s) {}

    Quantity operator+(const Quantity& o) const {
        return {value + o.value, std::hypot(sigma, o.sigma)};
    }
    Quantity operator-(const Quantity& o) const {
        return {value - o.value, std::hypot(sigma, o.sigma)};
    }
    Quantity& operator+=(const Quantity& o) {
        *this = *this + o;
        return *this;
    }
    // Scaling by an exact constant scales the uncertainty linearly.
    Quantity scaled(double k) const { return {value * k, std::abs(k) * sigma}; }
};

}  // namespace qccd
