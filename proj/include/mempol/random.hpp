#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>

namespace mempol {

/// Seeded engine used everywhere. mt19937_64 output is fully specified by the
/// standard, and the helpers below avoid the implementation-defined
/// distribution classes, so results are bit-identical across toolchains.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Inverse-CDF draw from an unnormalized nonnegative weight vector.
template <class Vec>
std::size_t sample_categorical(Rng& rng, const Vec& weights) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(weights.size()); ++i) total += weights[i];
    double u = uniform01(rng) * total;
    Eigen::Index last_positive = 0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(weights.size()); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = i;
        if (u < weights[i]) return static_cast<std::size_t>(i);
        u -= weights[i];
    }
    return static_cast<std::size_t>(last_positive);
}

/// Flat Dirichlet(1, ..., 1) sample of length n.
inline Eigen::VectorXd random_simplex_point(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = -std::log(1.0 - uniform01(rng));
    return v / v.sum();
}

}  // namespace mempol
