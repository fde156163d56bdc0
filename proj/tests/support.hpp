// Shared helpers for the unit tests.

#pragma once

#include "omsync/model.hpp"

#include <algorithm>
#include <array>
#include <complex>
#include <random>

namespace omsync::testing {

inline std::mt19937_64& rng() {
    static std::mt19937_64 r(20240611);
    return r;
}

inline double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline cplx random_cplx(double scale = 1.0) {
    return {uniform(-scale, scale), uniform(-scale, scale)};
}

// Roots of a monic cubic z^3 + c2 z^2 + c1 z + c0 by Durand-Kerner iteration.
inline std::array<cplx, 3> cubic_roots(cplx c2, cplx c1, cplx c0) {
    std::array<cplx, 3> z{cplx(0.4, 0.9), cplx(0.4, 0.9) * cplx(0.4, 0.9),
                          cplx(0.4, 0.9) * cplx(0.4, 0.9) * cplx(0.4, 0.9)};
    auto p = [&](cplx x) { return ((x + c2) * x + c1) * x + c0; };
    for (int it = 0; it < 500; ++it) {
        for (int i = 0; i < 3; ++i) {
            cplx den = 1.0;
            for (int j = 0; j < 3; ++j) {
                if (j != i) den *= z[i] - z[j];
            }
            z[i] -= p(z[i]) / den;
        }
    }
    return z;
}

// Largest distance from any element of a to its nearest element of b.
inline double set_distance(const std::array<cplx, 3>& a, const std::array<cplx, 3>& b) {
    double worst = 0.0;
    for (const auto& x : a) {
        double best = 1e300;
        for (const auto& y : b) best = std::min(best, std::abs(x - y));
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace omsync::testing
