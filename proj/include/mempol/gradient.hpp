#pragma once

#include <mempol/models/model.hpp>
#include <mempol/pomdp.hpp>
#include <mempol/random.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace mempol {

struct Step {
    std::size_t world = 0;
    std::size_t sensor = 0;
    std::size_t action = 0;
    double reward = 0.0;
};

struct Trajectory {
    std::vector<Step> steps;
    std::uint64_t seed = 0;
};

/// Samples one (sensor, action, reward) at `world` and advances `world`.
inline Step advance(const Pomdp& m, const Policy& p, std::size_t& world, Rng& rng) {
    Step step;
    step.world = world;
    step.sensor = sample_categorical(rng, m.beta.row(static_cast<Index>(world)));
    step.action = sample_categorical(rng, p.probs.row(static_cast<Index>(step.sensor)));
    step.reward = m.reward(static_cast<Index>(world), static_cast<Index>(step.action));
    world = sample_categorical(rng, m.alpha[world].row(static_cast<Index>(step.action)));
    return step;
}

inline std::size_t draw_start(const Pomdp& m, const std::optional<Vector>& mu, Rng& rng) {
    if (!mu) return uniform_index(rng, m.n_world);
    if (mu->size() != static_cast<Index>(m.n_world)) throw DimensionMismatch("start distribution has wrong length");
    return sample_categorical(rng, *mu);
}

/// Length-T rollout from w_0 ~ mu (uniform when absent). Same inputs and seed
/// give the same trajectory.
inline Trajectory simulate(const Pomdp& m, const Policy& p, std::size_t T, std::uint64_t seed,
                           const std::optional<Vector>& mu = std::nullopt) {
    require_shape(m, p);
    Rng rng(seed);
    Trajectory out;
    out.seed = seed;
    out.steps.reserve(T);
    std::size_t world = draw_start(m, mu, rng);
    for (std::size_t t = 0; t < T; ++t) out.steps.push_back(advance(m, p, world, rng));
    return out;
}

/// Checks that every step is possible under the POMDP's supports. Returns the
/// index of the first impossible step, or nullopt.
inline std::optional<std::size_t> first_inconsistent_step(const Pomdp& m, const Trajectory& traj) {
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& st = traj.steps[t];
        if (st.world >= m.n_world || st.sensor >= m.n_sensor || st.action >= m.n_action) return t;
        if (m.beta(static_cast<Index>(st.world), static_cast<Index>(st.sensor)) <= 0.0) return t;
        if (st.reward != m.reward(static_cast<Index>(st.world), static_cast<Index>(st.action))) return t;
        if (t + 1 < traj.steps.size() && m.transition(st.world, st.action, traj.steps[t + 1].world) <= 0.0) return t;
    }
    return std::nullopt;
}

/// GPOMDP estimate (1/T) sum_t z_t r_t with z_t = beta z_{t-1} + score(a_t|s_t),
/// z_{-1} = 0. `scores` is indexed s * n_action + a.
inline Vector gpomdp_estimate(const std::vector<Step>& steps, const std::vector<Vector>& scores, std::size_t n_sensor,
                              std::size_t n_action, double trace_discount) {
    if (scores.empty()) throw DimensionMismatch("empty score table");
    const Index d = scores.front().size();
    Vector trace = Vector::Zero(d);
    Vector acc = Vector::Zero(d);
    for (const auto& st : steps) {
        if (st.sensor >= n_sensor || st.action >= n_action) {
            throw DimensionMismatch("trajectory step outside the model's sensor/action range");
        }
        trace = trace_discount * trace + scores[st.sensor * n_action + st.action];
        if (st.reward != 0.0) acc += st.reward * trace;
    }
    if (!steps.empty()) acc /= static_cast<double>(steps.size());
    return acc;
}

template <PolicyModel M>
Vector gpomdp_gradient(const Trajectory& traj, const M& model, double trace_discount) {
    if (!(trace_discount >= 0.0 && trace_discount < 1.0)) throw InvalidArgument("trace discount must lie in [0,1)");
    return gpomdp_estimate(traj.steps, score_table(model), model.n_sensor(), model.n_action(), trace_discount);
}

inline constexpr double kFiniteDifferenceStep = 1e-6;

/// Central finite differences of the average reward in parameter space.
template <PolicyModel M>
Vector exact_gradient(const Pomdp& m, const M& model, const Vector& theta, double h = kFiniteDifferenceStep) {
    Vector grad(theta.size());
    Vector probe = theta;
    for (Index i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + h;
        const double up = average_reward(m, model.with_parameters(probe).policy());
        probe[i] = theta[i] - h;
        const double down = average_reward(m, model.with_parameters(probe).policy());
        probe[i] = theta[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// Differential (bias) values h with (I - P) h = r - eta 1 and p.h = 0.
inline Vector differential_values(const Matrix& P, const Vector& stationary, const Vector& r) {
    const Index n = P.rows();
    const double eta = stationary.dot(r);
    Matrix A(n + 1, n);
    A.topRows(n) = Matrix::Identity(n, n) - P;
    A.row(n) = stationary.transpose();
    Vector b(n + 1);
    b.head(n) = r.array() - eta;
    b[n] = 0.0;
    return A.colPivHouseholderQr().solve(b);
}

/// Analytic gradient of the average reward in the ambient policy coordinates,
///   d R / d pi(a|s) = sum_w p(w) beta(s|w) [R(w,a) + sum_w' alpha(w'|w,a) h(w')].
/// Only its component tangent to the policy polytope is meaningful.
inline Matrix policy_gradient(const Pomdp& m, const Policy& p) {
    const auto cond = effective_world_policy(m, p);
    const Matrix P = world_transition_matrix(m, cond);
    const Vector stationary = stationary_distribution(P);
    const Vector h = differential_values(P, stationary, expected_reward_per_state(m, cond));
    const auto W = static_cast<Index>(m.n_world);
    Matrix qtilde(W, static_cast<Index>(m.n_action));
    for (Index w = 0; w < W; ++w) qtilde.row(w) = m.reward.row(w) + (m.alpha[static_cast<std::size_t>(w)] * h).transpose();
    // grad(s, a) = sum_w p(w) beta(w, s) qtilde(w, a)
    return m.beta.transpose() * stationary.asDiagonal() * qtilde;
}

/// Removes each row's mean: projection onto the tangent space of the polytope.
inline Matrix project_to_tangent(Matrix g) {
    for (Index s = 0; s < g.rows(); ++s) g.row(s).array() -= g.row(s).mean();
    return g;
}

/// Central finite differences of the average reward along the tangent
/// directions e_(s,a) - (1/|A|) sum_b e_(s,b). Equals the tangent projection of
/// the gradient; the policy must stay inside the polytope for +-h.
inline Matrix exact_policy_gradient(const Pomdp& m, const Policy& p, double h = kFiniteDifferenceStep) {
    require_shape(m, p);
    const auto A = static_cast<Index>(m.n_action);
    Matrix out(p.probs.rows(), A);
    for (Index s = 0; s < p.probs.rows(); ++s) {
        for (Index a = 0; a < A; ++a) {
            Policy up = p;
            Policy down = p;
            up.probs.row(s).array() -= h / static_cast<double>(A);
            down.probs.row(s).array() += h / static_cast<double>(A);
            up.probs(s, a) += h;
            down.probs(s, a) -= h;
            out(s, a) = (average_reward(m, up) - average_reward(m, down)) / (2.0 * h);
        }
    }
    return out;
}

}  // namespace mempol
