#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cnnqoe/series.hpp"

namespace testsupport {

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f() with respect to one mutable slot.
template <typename F>
double finite_difference(F&& f, double& slot, double h = 1e-6) {
    const double original = slot;
    slot = original + h;
    const double up = f();
    slot = original - h;
    const double down = f();
    slot = original;
    return (up - down) / (2.0 * h);
}

inline cnnqoe::Series random_series(int channels, int length, std::mt19937_64& rng,
                                    double scale = 1.0) {
    cnnqoe::Series s(channels, length);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& v : s.values()) v = dist(rng);
    return s;
}

inline cnnqoe::Kernel random_kernel(int out_channels, int in_channels, int width,
                                    std::mt19937_64& rng, double scale = 1.0) {
    cnnqoe::Kernel k = cnnqoe::Kernel::zeros(out_channels, in_channels, width);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& w : k.weights) w = dist(rng);
    for (double& b : k.bias) b = dist(rng);
    return k;
}

}  // namespace testsupport
