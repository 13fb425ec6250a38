#pragma once

#include <mempol/models/crbm.hpp>
#include <mempol/models/exponential.hpp>
#include <mempol/models/mixture.hpp>

#include <concepts>
#include <variant>

namespace mempol {

/// A differentiable parameterization theta -> pi_theta with a log-policy score.
template <class M>
concept PolicyModel = requires(const M& m, std::size_t s, std::size_t a, Vector theta) {
    { m.n_sensor() } -> std::convertible_to<std::size_t>;
    { m.n_action() } -> std::convertible_to<std::size_t>;
    { m.dimension() } -> std::convertible_to<std::size_t>;
    { m.parameters() } -> std::convertible_to<Vector>;
    { m.with_parameters(theta) } -> std::convertible_to<M>;
    { m.policy() } -> std::same_as<Policy>;
    { m.score(s, a) } -> std::convertible_to<Vector>;
};

/// Scores for every pair, indexed s * |A| + a.
template <PolicyModel M>
std::vector<Vector> score_table(const M& model) {
    std::vector<Vector> out;
    out.reserve(model.n_sensor() * model.n_action());
    for (std::size_t s = 0; s < model.n_sensor(); ++s)
        for (std::size_t a = 0; a < model.n_action(); ++a) out.push_back(model.score(s, a));
    return out;
}

/// Runtime-selected model family, used where the family comes from a file.
class AnyModel {
public:
    using Variant = std::variant<ExponentialPolicyModel, MixtureModel, CrbmModel>;

    AnyModel() = default;
    template <class M>
        requires std::constructible_from<Variant, M>
    AnyModel(M model) : model_(std::move(model)) {}

    const Variant& variant() const { return model_; }

    std::size_t n_sensor() const { return std::visit([](const auto& m) { return m.n_sensor(); }, model_); }
    std::size_t n_action() const { return std::visit([](const auto& m) { return m.n_action(); }, model_); }
    std::size_t dimension() const { return std::visit([](const auto& m) { return m.dimension(); }, model_); }
    Vector parameters() const { return std::visit([](const auto& m) { return Vector(m.parameters()); }, model_); }
    AnyModel with_parameters(Vector theta) const {
        return std::visit([&](const auto& m) { return AnyModel(m.with_parameters(std::move(theta))); }, model_);
    }
    Policy policy() const { return std::visit([](const auto& m) { return m.policy(); }, model_); }
    Vector score(std::size_t s, std::size_t a) const {
        return std::visit([&](const auto& m) { return Vector(m.score(s, a)); }, model_);
    }

private:
    Variant model_;
};

static_assert(PolicyModel<ExponentialPolicyModel>);
static_assert(PolicyModel<MixtureModel>);
static_assert(PolicyModel<CrbmModel>);
static_assert(PolicyModel<AnyModel>);

/// Entries above this count as nonzero in stochasticity_degree.
inline constexpr double kDegreeThreshold = 1e-9;

/// nnz(pi) - |S|, floored at zero: the dimension of the smallest face of the
/// policy polytope containing pi.
inline std::size_t stochasticity_degree(const Policy& p, double threshold = kDegreeThreshold) {
    const auto nnz = static_cast<std::size_t>((p.probs.array() > threshold).count());
    return nnz > p.n_sensor() ? nnz - p.n_sensor() : 0;
}

/// Sum over sensors of KL(target(.|s) || model(.|s)).
inline double policy_kl(const Policy& target, const Policy& model) {
    double kl = 0.0;
    for (Index s = 0; s < target.probs.rows(); ++s) {
        for (Index a = 0; a < target.probs.cols(); ++a) {
            const double t = target.probs(s, a);
            if (t > 0.0) kl += t * std::log(t / std::max(model.probs(s, a), 1e-300));
        }
    }
    return kl;
}

struct FitOptions {
    std::size_t max_iterations = 20000;
    double kl_tolerance = 1e-12;
    /// Closure points are approached with bounded parameters.
    double max_parameter_norm = 1e4;
};

struct FitResult {
    Vector theta;
    double kl = 0.0;
    std::size_t iterations = 0;
};

/// Maximum-likelihood projection of a target policy onto the model: gradient
/// ascent on sum_s sum_a target(a|s) log pi_theta(a|s), with an adaptive step
/// accepted only when the divergence decreases.
template <PolicyModel M>
FitResult fit_to_policy(const M& start, const Policy& target, const FitOptions& options = {}) {
    Vector theta = start.parameters();
    double kl = policy_kl(target, start.with_parameters(theta).policy());
    double step = 1.0;
    FitResult out;
    std::size_t it = 0;
    for (; it < options.max_iterations && kl > options.kl_tolerance; ++it) {
        const M model = start.with_parameters(theta);
        Vector grad = Vector::Zero(theta.size());
        for (std::size_t s = 0; s < model.n_sensor(); ++s) {
            for (std::size_t a = 0; a < model.n_action(); ++a) {
                const double t = target(s, a);
                if (t > 0.0) grad += t * model.score(s, a);
            }
        }
        const double gnorm2 = grad.squaredNorm();
        if (gnorm2 < 1e-30) break;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            Vector trial = theta + step * grad;
            if (trial.norm() > options.max_parameter_norm) trial *= options.max_parameter_norm / trial.norm();
            const double trial_kl = policy_kl(target, start.with_parameters(trial).policy());
            if (trial_kl <= kl - 1e-4 * step * gnorm2 || (trial_kl < kl && tries > 40)) {
                theta = std::move(trial);
                kl = trial_kl;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    out.theta = std::move(theta);
    out.kl = kl;
    out.iterations = it;
    return out;
}

}  // namespace mempol
