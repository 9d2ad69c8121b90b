#pragma once

// Test-only oracle: 64-bit central finite differences against analytic
// backward rules. Stays deliberately independent of the graph machinery, so
// it can judge each op (and the loss gradient) on its own.

#include <algorithm>
#include <cmath>
#include <random>

#include "polarseg/tensor.hpp"

namespace gradcheck {

using polarseg::TensorT;

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / denom;
}

inline void fill_uniform(TensorT<double>& t, std::mt19937& rng, double lo = -1.0,
                         double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
}

// Keeps values away from a non-smooth point at zero (relu kink).
inline void fill_uniform_away_from_zero(TensorT<double>& t, std::mt19937& rng,
                                        double margin = 0.05) {
    fill_uniform(t, rng);
    for (double& v : t.data) v += v >= 0.0 ? margin : -margin;
}

inline double weighted_sum(const TensorT<double>& out, const TensorT<double>& cotangent) {
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out.data[i] * cotangent.data[i];
    return acc;
}

// Max relative error between the analytic gradient of sum(cotangent * f())
// w.r.t. `x` and central differences with step h. `forward` reads x by
// reference; `analytic` must return the full gradient tensor for x.
template <typename Forward>
double max_rel_err(TensorT<double>& x, Forward forward, const TensorT<double>& analytic,
                   const TensorT<double>& cotangent, double h = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double up = weighted_sum(forward(), cotangent);
        x.data[i] = keep - h;
        const double down = weighted_sum(forward(), cotangent);
        x.data[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic.data[i], numeric));
    }
    return worst;
}

}  // namespace gradcheck
