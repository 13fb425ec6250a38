#pragma once

#include <mempol/models/statistics.hpp>

#include <cstdint>
#include <string>

namespace mempol {

/// Upper bound on |A|^|S| for exhaustive enumeration of deterministic policies.
inline constexpr std::uint64_t kMaxEnumeratedFunctions = std::uint64_t{1} << 20;

/// Number of functions S -> A, or throws GuardExceeded above the enumeration limit.
inline std::uint64_t function_count(std::size_t n_sensor, std::size_t n_action) {
    std::uint64_t count = 1;
    for (std::size_t s = 0; s < n_sensor; ++s) {
        count *= n_action;
        if (count > kMaxEnumeratedFunctions) {
            throw GuardExceeded("|A|^|S| exceeds the enumeration limit of 2^20 functions");
        }
    }
    return count;
}

/// Function f: S -> A indexed in mixed radix, f(s) = (index / |A|^s) mod |A|.
inline std::size_t function_value(std::uint64_t index, std::size_t s, std::size_t n_action) {
    for (std::size_t i = 0; i < s; ++i) index /= n_action;
    return static_cast<std::size_t>(index % n_action);
}

/// Parity features over the binary codes of the function indices (length
/// n >= ceil(log2 |A|^|S|)), orders 1..k. Features constant over all used
/// codewords are dropped. Returns d x |A|^|S|.
inline Matrix function_k_interaction_statistics(std::size_t n_sensor, std::size_t n_action, unsigned k) {
    const std::uint64_t count = function_count(n_sensor, n_action);
    const unsigned n = bits_for(count);
    if (k < 1 || k > n) throw InvalidArgument("interaction order outside [1," + std::to_string(n) + "]");
    std::vector<Vector> rows;
    for (auto mask : interaction_subsets(n, k)) {
        Vector row(static_cast<Index>(count));
        for (std::uint64_t f = 0; f < count; ++f) row[static_cast<Index>(f)] = parity(f, mask);
        if ((row.array() != row[0]).any()) rows.push_back(std::move(row));
    }
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(count));
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = rows[r].transpose();
    return out;
}

/// Standardized moment-curve features t, ..., t^d at t = index + 1.
inline Matrix function_cyclic_statistics(std::size_t n_sensor, std::size_t n_action, std::size_t d) {
    const std::uint64_t count = function_count(n_sensor, n_action);
    if (d < 2 || d % 2 != 0) throw InvalidArgument("cyclic dimension must be even and at least 2");
    if (d >= count) throw InvalidArgument("cyclic dimension must be below |A|^|S|");
    Matrix f(static_cast<Index>(d), static_cast<Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        // Scale t into [0, 1] first; powers of large t overflow the z-score otherwise.
        const double t = static_cast<double>(i + 1) / static_cast<double>(count);
        double power = t;
        for (std::size_t j = 0; j < d; ++j) {
            f(static_cast<Index>(j), static_cast<Index>(i)) = power;
            power *= t;
        }
    }
    return standardize_rows(f);
}

/// pi(a|s) = sum_f [f(s) = a] p_theta(f), p_theta an exponential family over
/// the deterministic policies f: S -> A.
class MixtureModel {
public:
    MixtureModel() = default;
    MixtureModel(std::size_t n_sensor, std::size_t n_action, Matrix weight_features, Vector theta)
        : n_sensor_(n_sensor), n_action_(n_action), weight_features_(std::move(weight_features)), theta_(std::move(theta)) {
        count_ = function_count(n_sensor_, n_action_);
        if (weight_features_.cols() != static_cast<Index>(count_)) {
            throw DimensionMismatch("weight statistics need one column per function S -> A");
        }
        if (theta_.size() != weight_features_.rows()) throw DimensionMismatch("parameter length does not match dimension");
        if (!theta_.allFinite()) throw InvalidArgument("parameters must be finite");
        Vector logits = weight_features_.transpose() * theta_;
        logits.array() -= logits.maxCoeff();
        weights_ = logits.array().exp();
        weights_ /= weights_.sum();
        mean_feature_ = weight_features_ * weights_;
    }
    MixtureModel(std::size_t n_sensor, std::size_t n_action, Matrix weight_features)
        : MixtureModel(n_sensor, n_action, weight_features, Vector::Zero(weight_features.rows())) {}

    std::size_t n_sensor() const { return n_sensor_; }
    std::size_t n_action() const { return n_action_; }
    std::size_t dimension() const { return static_cast<std::size_t>(theta_.size()); }
    const Vector& parameters() const { return theta_; }
    const Matrix& weight_features() const { return weight_features_; }
    /// p_theta(f) over all enumerated functions.
    const Vector& function_weights() const { return weights_; }

    MixtureModel with_parameters(Vector theta) const {
        return {n_sensor_, n_action_, weight_features_, std::move(theta)};
    }

    Policy policy() const {
        Matrix probs = Matrix::Zero(static_cast<Index>(n_sensor_), static_cast<Index>(n_action_));
        for (std::uint64_t f = 0; f < count_; ++f) {
            std::uint64_t code = f;
            for (std::size_t s = 0; s < n_sensor_; ++s) {
                probs(static_cast<Index>(s), static_cast<Index>(code % n_action_)) += weights_[static_cast<Index>(f)];
                code /= n_action_;
            }
        }
        return Policy(std::move(probs));
    }

    /// grad log pi(a|s) = E[G(f) - E G | f(s) = a].
    Vector score(std::size_t s, std::size_t a) const {
        Vector acc = Vector::Zero(theta_.size());
        double mass = 0.0;
        for (std::uint64_t f = 0; f < count_; ++f) {
            if (function_value(f, s, n_action_) != a) continue;
            const double w = weights_[static_cast<Index>(f)];
            mass += w;
            acc += w * weight_features_.col(static_cast<Index>(f));
        }
        if (mass <= 0.0) return Vector::Zero(theta_.size());
        return acc / mass - mean_feature_;
    }

private:
    std::size_t n_sensor_ = 0;
    std::size_t n_action_ = 0;
    std::uint64_t count_ = 0;
    Matrix weight_features_;
    Vector theta_;
    Vector weights_;
    Vector mean_feature_;
};

inline Policy mixture_policy(const MixtureModel& model) { return model.policy(); }

}  // namespace mempol
