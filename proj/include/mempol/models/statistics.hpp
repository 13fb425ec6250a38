#pragma once

#include <mempol/error.hpp>
#include <mempol/pomdp.hpp>

#include <Eigen/LU>

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace mempol {

/// Feature vectors F(s, a) stored column-wise: features.col(s * n_action + a).
struct SufficientStatistics {
    std::size_t n_sensor = 0;
    std::size_t n_action = 0;
    Matrix features;  // d x (n_sensor * n_action)

    std::size_t dimension() const { return static_cast<std::size_t>(features.rows()); }
    Index pair_index(std::size_t s, std::size_t a) const { return static_cast<Index>(s * n_action + a); }
    auto column(std::size_t s, std::size_t a) const { return features.col(pair_index(s, a)); }
};

/// Number of bits needed to index `count` items (at least one).
inline unsigned bits_for(std::uint64_t count) {
    if (count <= 1) return 1;
    return static_cast<unsigned>(std::bit_width(count - 1));
}

/// Parity feature prod_{i in subset} (-1)^{x_i}.
inline double parity(std::uint64_t code, std::uint64_t subset) {
    return (std::popcount(code & subset) % 2 == 0) ? 1.0 : -1.0;
}

/// All bit subsets of {0..n-1} with 1 <= size <= k, ordered by size, then
/// lexicographically by member list.
inline std::vector<std::uint64_t> interaction_subsets(unsigned n, unsigned k) {
    std::vector<std::uint64_t> out;
    for (unsigned size = 1; size <= k; ++size) {
        std::vector<unsigned> idx(size);
        for (unsigned i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            std::uint64_t mask = 0;
            for (unsigned i : idx) mask |= std::uint64_t{1} << i;
            out.push_back(mask);
            int pos = static_cast<int>(size) - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - size + static_cast<unsigned>(pos)) --pos;
            if (pos < 0) break;
            ++idx[static_cast<std::size_t>(pos)];
            for (auto i = static_cast<std::size_t>(pos) + 1; i < size; ++i) idx[i] = idx[i - 1] + 1;
        }
    }
    return out;
}

namespace detail {

/// Drops feature rows that are, restricted to the used pairs, linear
/// combinations of earlier rows plus per-sensor constants. Such rows cancel in
/// every conditional softmax, so the family is unchanged and the surviving row
/// count is the model dimension.
inline Matrix independent_modulo_sensor(const Matrix& candidates, std::size_t n_sensor, std::size_t n_action) {
    const Index N = static_cast<Index>(n_sensor * n_action);
    Matrix basis(static_cast<Index>(n_sensor), N);
    basis.setZero();
    for (std::size_t s = 0; s < n_sensor; ++s) {
        basis.block(static_cast<Index>(s), static_cast<Index>(s * n_action), 1, static_cast<Index>(n_action)).setOnes();
    }
    std::vector<Index> kept;
    Index rank = static_cast<Index>(n_sensor);
    for (Index r = 0; r < candidates.rows(); ++r) {
        Matrix trial(basis.rows() + 1, N);
        trial << basis, candidates.row(r);
        Eigen::FullPivLU<Matrix> lu(trial);
        lu.setThreshold(1e-9);
        if (lu.rank() > rank) {
            basis = std::move(trial);
            ++rank;
            kept.push_back(r);
        }
    }
    Matrix out(static_cast<Index>(kept.size()), N);
    for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Index>(i)) = candidates.row(kept[i]);
    return out;
}

}  // namespace detail

/// Result of the k-interaction construction with its intermediate counts.
struct KInteractionInfo {
    unsigned n_bits = 0;
    std::size_t candidate_count = 0;  // subsets with 1 <= |lambda| <= k
    std::size_t after_pruning = 0;    // those not constant in a for every s
    std::vector<std::uint64_t> subsets;  // bit masks of the surviving subsets
};

/// k-interaction statistics. Pair (s, a) is encoded as the n-bit binary
/// representation of s * |A| + a (sensor in the high-order part), n =
/// ceil(log2(|S||A|)); only the first |S||A| codewords are used. Subsets whose
/// parity is constant in a for every s are removed, then subsets dependent on
/// earlier ones modulo per-sensor constants.
inline SufficientStatistics k_interaction_statistics(std::size_t n_sensor, std::size_t n_action, unsigned k,
                                                     KInteractionInfo* info = nullptr) {
    if (n_sensor == 0 || n_action == 0) throw InvalidArgument("empty sensor or action set");
    const std::uint64_t pairs = n_sensor * n_action;
    const unsigned n = bits_for(pairs);
    if (k < 1 || k > n) {
        throw InvalidArgument("interaction order k=" + std::to_string(k) + " outside [1," + std::to_string(n) + "]");
    }
    const auto subsets = interaction_subsets(n, k);
    std::vector<std::uint64_t> varying;
    for (auto mask : subsets) {
        bool constant_everywhere = true;
        for (std::uint64_t s = 0; s < n_sensor && constant_everywhere; ++s) {
            const double first = parity(s * n_action, mask);
            for (std::uint64_t a = 1; a < n_action; ++a) {
                if (parity(s * n_action + a, mask) != first) {
                    constant_everywhere = false;
                    break;
                }
            }
        }
        if (!constant_everywhere) varying.push_back(mask);
    }
    Matrix candidates(static_cast<Index>(varying.size()), static_cast<Index>(pairs));
    for (std::size_t r = 0; r < varying.size(); ++r) {
        for (std::uint64_t i = 0; i < pairs; ++i) {
            candidates(static_cast<Index>(r), static_cast<Index>(i)) = parity(i, varying[r]);
        }
    }
    SufficientStatistics out{n_sensor, n_action, detail::independent_modulo_sensor(candidates, n_sensor, n_action)};
    if (info) {
        info->n_bits = n;
        info->candidate_count = subsets.size();
        info->after_pruning = varying.size();
        info->subsets.clear();
        // Recover which masks survived by matching rows.
        for (Index r = 0; r < out.features.rows(); ++r) {
            for (std::size_t c = 0; c < varying.size(); ++c) {
                if (candidates.row(static_cast<Index>(c)) == out.features.row(r)) {
                    info->subsets.push_back(varying[c]);
                    break;
                }
            }
        }
    }
    return out;
}

/// Moment-curve statistics: the pair with index i = s * |A| + a gets
/// x(t) = (t, t^2, ..., t^d) at t = i + 1.
inline SufficientStatistics cyclic_statistics(std::size_t n_sensor, std::size_t n_action, std::size_t d) {
    const std::size_t pairs = n_sensor * n_action;
    if (d < 2 || d % 2 != 0) throw InvalidArgument("cyclic dimension must be even and at least 2");
    if (d >= pairs) {
        throw InvalidArgument("cyclic dimension " + std::to_string(d) + " must be below |S||A| = " +
                              std::to_string(pairs));
    }
    Matrix f(static_cast<Index>(d), static_cast<Index>(pairs));
    for (std::size_t i = 0; i < pairs; ++i) {
        double t = static_cast<double>(i + 1);
        double power = t;
        for (std::size_t j = 0; j < d; ++j) {
            f(static_cast<Index>(j), static_cast<Index>(i)) = power;
            power *= t;
        }
    }
    return {n_sensor, n_action, std::move(f)};
}

/// One indicator feature per pair; the unrestricted softmax policy.
inline SufficientStatistics tabular_statistics(std::size_t n_sensor, std::size_t n_action) {
    const auto pairs = static_cast<Index>(n_sensor * n_action);
    return {n_sensor, n_action, Matrix::Identity(pairs, pairs)};
}

/// Per-coordinate z-score of the feature rows (constant rows are only centred).
inline Matrix standardize_rows(const Matrix& f) {
    Matrix out = f;
    for (Index r = 0; r < f.rows(); ++r) {
        const double mean = f.row(r).mean();
        out.row(r).array() -= mean;
        const double sd = std::sqrt(out.row(r).squaredNorm() / static_cast<double>(f.cols()));
        if (sd > 0.0) out.row(r) /= sd;
    }
    return out;
}

inline SufficientStatistics standardized(SufficientStatistics stats) {
    stats.features = standardize_rows(stats.features);
    return stats;
}

}  // namespace mempol
