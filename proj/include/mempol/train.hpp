#pragma once

#include <mempol/gradient.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace mempol {

enum class WindowMode { uniform, fixed };
enum class GradientMode { gpomdp, exact };

struct TrainConfig {
    double learning_rate = 1.0;
    std::size_t iterations = 10000;
    /// Maximum window length; windows are drawn from {1, ..., horizon} in
    /// uniform mode and equal horizon in fixed mode.
    std::size_t horizon = 100;
    double trace_discount = 0.95;
    std::size_t repetitions = 1;
    std::uint64_t seed = 0;
    WindowMode window_mode = WindowMode::uniform;
    GradientMode gradient_mode = GradientMode::gpomdp;
    /// Restart the world state from mu every iteration instead of continuing.
    bool reset_each_iteration = false;
    double init_range = 0.1;
    std::size_t running_window = 100;
    double divergence_limit = 1e6;
};

inline void validate(const TrainConfig& c) {
    if (c.iterations < 1) throw ValidationError("iterations must be at least 1");
    if (c.horizon < 1) throw ValidationError("horizon must be positive");
    if (c.repetitions < 1) throw ValidationError("repetitions must be at least 1");
    if (!(c.trace_discount >= 0.0 && c.trace_discount < 1.0)) throw ValidationError("trace_discount must lie in [0,1)");
    if (!std::isfinite(c.learning_rate)) throw ValidationError("learning_rate must be finite");
    if (c.running_window < 1) throw ValidationError("running_window must be positive");
}

struct RepetitionCurve {
    std::vector<double> reward;
    std::vector<double> running;
    Vector final_theta;
    Policy final_policy;
};

/// Curves averaged over repetitions; the final policy is the mean of the
/// repetitions' final policies.
struct LearningCurve {
    std::vector<double> reward;
    std::vector<double> running;
    Policy final_policy;
    std::vector<RepetitionCurve> repetitions;
};

/// Thrown when |theta|_inf exceeds the limit. Carries everything recorded
/// up to and including the offending iteration.
class TrainingDiverged : public Divergence {
public:
    TrainingDiverged(const std::string& what, LearningCurve partial)
        : Divergence(what), partial_(std::move(partial)) {}
    const LearningCurve& partial() const { return partial_; }

private:
    LearningCurve partial_;
};

namespace detail {

inline std::vector<double> trailing_mean(const std::vector<double>& xs, std::size_t window) {
    std::vector<double> out(xs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += xs[i];
        if (i >= window) sum -= xs[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

inline LearningCurve average_curves(std::vector<RepetitionCurve> reps) {
    LearningCurve out;
    const std::size_t n = reps.front().reward.size();
    out.reward.assign(n, 0.0);
    out.running.assign(n, 0.0);
    out.final_policy.probs = Matrix::Zero(reps.front().final_policy.probs.rows(), reps.front().final_policy.probs.cols());
    for (const auto& r : reps) {
        for (std::size_t i = 0; i < n && i < r.reward.size(); ++i) {
            out.reward[i] += r.reward[i];
            out.running[i] += r.running[i];
        }
        out.final_policy.probs += r.final_policy.probs;
    }
    const auto k = static_cast<double>(reps.size());
    for (std::size_t i = 0; i < n; ++i) {
        out.reward[i] /= k;
        out.running[i] /= k;
    }
    out.final_policy.probs /= k;
    out.repetitions = std::move(reps);
    return out;
}

struct RepetitionOutcome {
    RepetitionCurve curve;
    bool diverged = false;
    std::size_t diverged_at = 0;
};

template <PolicyModel M>
RepetitionOutcome run_repetition(const Pomdp& m, const M& model, const TrainConfig& c, std::uint64_t seed,
                                 const std::optional<Vector>& mu) {
    Rng rng(seed);
    Vector theta(static_cast<Index>(model.dimension()));
    for (Index i = 0; i < theta.size(); ++i) theta[i] = uniform(rng, -c.init_range, c.init_range);

    RepetitionOutcome out;
    out.curve.reward.reserve(c.iterations);
    std::size_t world = draw_start(m, mu, rng);
    std::vector<Step> window;
    for (std::size_t it = 0; it < c.iterations; ++it) {
        const M current = model.with_parameters(theta);
        const Policy policy = current.policy();
        Vector grad;
        double estimate = 0.0;
        if (c.gradient_mode == GradientMode::exact) {
            grad = exact_gradient(m, current, theta);
            estimate = average_reward(m, policy);
        } else {
            const std::size_t len =
                c.window_mode == WindowMode::uniform ? uniform_index(rng, c.horizon) + 1 : c.horizon;
            if (c.reset_each_iteration) world = draw_start(m, mu, rng);
            window.clear();
            for (std::size_t t = 0; t < len; ++t) window.push_back(advance(m, policy, world, rng));
            grad = gpomdp_estimate(window, score_table(current), current.n_sensor(), current.n_action(),
                                   c.trace_discount);
            for (const auto& st : window) estimate += st.reward;
            estimate /= static_cast<double>(len);
        }
        out.curve.reward.push_back(estimate);
        theta += c.learning_rate * grad;
        if (!theta.allFinite() || theta.lpNorm<Eigen::Infinity>() > c.divergence_limit) {
            out.diverged = true;
            out.diverged_at = it;
            break;
        }
    }
    out.curve.running = trailing_mean(out.curve.reward, c.running_window);
    out.curve.final_theta = theta;
    if (out.diverged) {
        out.curve.final_policy = Policy(Matrix::Constant(static_cast<Index>(model.n_sensor()),
                                                         static_cast<Index>(model.n_action()),
                                                         std::nan("")));
    } else {
        out.curve.final_policy = model.with_parameters(theta).policy();
    }
    return out;
}

}  // namespace detail

/// Stochastic gradient ascent on the average reward from random
/// initializations. Repetition r uses seed + r, so results are reproducible
/// and repetitions are independent.
template <PolicyModel M>
LearningCurve train(const Pomdp& m, const M& model, const TrainConfig& c,
                    const std::optional<Vector>& mu = std::nullopt) {
    validate(c);
    require_valid(m);
    if (model.n_sensor() != m.n_sensor || model.n_action() != m.n_action) {
        throw DimensionMismatch("model sensor/action sizes do not match the POMDP");
    }
    std::vector<RepetitionCurve> reps;
    reps.reserve(c.repetitions);
    for (std::size_t r = 0; r < c.repetitions; ++r) {
        auto outcome = detail::run_repetition(m, model, c, c.seed + r, mu);
        reps.push_back(std::move(outcome.curve));
        if (outcome.diverged) {
            throw TrainingDiverged("parameters exceeded the divergence limit in repetition " + std::to_string(r) +
                                       " at iteration " + std::to_string(outcome.diverged_at),
                                   detail::average_curves(std::move(reps)));
        }
    }
    return detail::average_curves(std::move(reps));
}

/// Total variation between the most different pair of rows.
inline double max_row_divergence(const Policy& p) {
    double worst = 0.0;
    for (Index i = 0; i < p.probs.rows(); ++i)
        for (Index j = i + 1; j < p.probs.rows(); ++j)
            worst = std::max(worst, 0.5 * (p.probs.row(i) - p.probs.row(j)).cwiseAbs().sum());
    return worst;
}

}  // namespace mempol
