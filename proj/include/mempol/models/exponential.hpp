#pragma once

#include <mempol/models/statistics.hpp>

#include <string>

namespace mempol {

/// Conditional exponential family pi(a|s) proportional to exp(theta . F(s,a)).
class ExponentialPolicyModel {
public:
    ExponentialPolicyModel() = default;
    ExponentialPolicyModel(SufficientStatistics stats, Vector theta) : stats_(std::move(stats)), theta_(std::move(theta)) {
        if (theta_.size() != static_cast<Index>(stats_.dimension())) {
            throw DimensionMismatch("parameter length " + std::to_string(theta_.size()) + " does not match dimension " +
                                    std::to_string(stats_.dimension()));
        }
        if (!theta_.allFinite()) throw InvalidArgument("parameters must be finite");
    }
    explicit ExponentialPolicyModel(SufficientStatistics stats)
        : ExponentialPolicyModel(stats, Vector::Zero(static_cast<Index>(stats.dimension()))) {}

    std::size_t n_sensor() const { return stats_.n_sensor; }
    std::size_t n_action() const { return stats_.n_action; }
    std::size_t dimension() const { return stats_.dimension(); }
    const Vector& parameters() const { return theta_; }
    const SufficientStatistics& statistics() const { return stats_; }

    ExponentialPolicyModel with_parameters(Vector theta) const { return {stats_, std::move(theta)}; }

    /// pi_theta(.|s) with the row maximum subtracted before exponentiation.
    Vector action_probabilities(std::size_t s) const {
        const auto A = static_cast<Index>(stats_.n_action);
        Vector logits(A);
        for (Index a = 0; a < A; ++a) logits[a] = theta_.dot(stats_.column(s, static_cast<std::size_t>(a)));
        logits.array() -= logits.maxCoeff();
        Vector p = logits.array().exp();
        return p / p.sum();
    }

    Policy policy() const {
        Matrix probs(static_cast<Index>(stats_.n_sensor), static_cast<Index>(stats_.n_action));
        for (std::size_t s = 0; s < stats_.n_sensor; ++s) probs.row(static_cast<Index>(s)) = action_probabilities(s);
        return Policy(std::move(probs));
    }

    /// Score F(s,a) - sum_a' pi(a'|s) F(s,a').
    Vector score(std::size_t s, std::size_t a) const {
        const Vector p = action_probabilities(s);
        Vector mean = Vector::Zero(theta_.size());
        for (Index b = 0; b < p.size(); ++b) mean += p[b] * stats_.column(s, static_cast<std::size_t>(b));
        return stats_.column(s, a) - mean;
    }

private:
    SufficientStatistics stats_;
    Vector theta_;
};

inline Policy softmax_policy(const ExponentialPolicyModel& model) { return model.policy(); }

inline Vector log_policy_gradient(const ExponentialPolicyModel& model, std::size_t s, std::size_t a) {
    return model.score(s, a);
}

}  // namespace mempol
