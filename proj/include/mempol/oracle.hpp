#pragma once

#include <mempol/gradient.hpp>
#include <mempol/models/model.hpp>
#include <mempol/random.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mempol {

struct OracleOptions {
    /// Gradient-ascent starts: the uniform policy, the best deterministic
    /// policy, then random interior points.
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 5000;
    /// Candidates whose rewards differ by at most this much count as tied; the
    /// one with the smaller stochasticity degree wins.
    double tie_tolerance = 1e-9;
};

struct OracleResult {
    Policy policy;
    double reward = 0.0;
    std::size_t deterministic_evaluated = 0;
    std::size_t skipped = 0;
    std::vector<std::string> log;
};

inline constexpr std::size_t kMaxDeterministicPolicies = std::size_t{1} << 20;

/// Euclidean projection of each row onto the probability simplex.
inline Matrix project_rows_to_simplex(Matrix x) {
    for (Index s = 0; s < x.rows(); ++s) {
        std::vector<double> u(static_cast<std::size_t>(x.cols()));
        for (Index a = 0; a < x.cols(); ++a) u[static_cast<std::size_t>(a)] = x(s, a);
        std::sort(u.begin(), u.end(), std::greater<>());
        double cumulative = 0.0, shift = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            cumulative += u[j];
            const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
            if (u[j] - candidate > 0.0) shift = candidate;
        }
        for (Index a = 0; a < x.cols(); ++a) x(s, a) = std::max(x(s, a) - shift, 0.0);
    }
    return x;
}

namespace detail {

inline std::optional<double> try_reward(const Pomdp& m, const Policy& p) {
    try {
        return average_reward(m, p);
    } catch (const NonUniqueStationary&) {
        return std::nullopt;
    }
}

/// Projected gradient ascent with step doubling on success and halving on
/// failure. Stops when no step improves the reward.
inline std::optional<std::pair<Policy, double>> projected_ascent(const Pomdp& m, Policy p, std::size_t max_iterations) {
    auto current = try_reward(m, p);
    if (!current) return std::nullopt;
    double step = 1.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        Matrix g;
        try {
            g = policy_gradient(m, p);
        } catch (const NonUniqueStationary&) {
            return std::nullopt;
        }
        bool moved = false;
        for (int tries = 0; tries < 60; ++tries) {
            Policy next(project_rows_to_simplex(p.probs + step * g));
            const auto r = try_reward(m, next);
            if (r && *r > *current) {
                p = std::move(next);
                current = r;
                step = std::min(step * 2.0, 1e8);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return std::make_pair(std::move(p), *current);
}

}  // namespace detail

/// Best memoryless policy found by exhaustive evaluation of the deterministic
/// policies and multistart projected gradient ascent. Sensors that are never
/// emitted are fixed to action 0. Candidates without a unique stationary
/// distribution are skipped and logged.
inline OracleResult brute_force_optimal_policy(const Pomdp& m, const OracleOptions& options = {}) {
    require_valid(m);
    const std::size_t S = m.n_sensor, A = m.n_action;
    std::vector<bool> observed(S, false);
    for (std::size_t s = 0; s < S; ++s) observed[s] = !sensor_support(m, s).empty();

    OracleResult out;
    bool have = false;
    auto consider = [&](const Policy& p, double r) {
        const std::size_t degree = stochasticity_degree(p);
        if (!have || r > out.reward + options.tie_tolerance ||
            (r >= out.reward - options.tie_tolerance &&
             (degree < stochasticity_degree(out.policy) ||
              (degree == stochasticity_degree(out.policy) && r > out.reward)))) {
            out.policy = p;
            out.reward = r;
            have = true;
        }
    };

    std::size_t count = 1;
    for (std::size_t s = 0; s < S; ++s) {
        if (!observed[s]) continue;
        if (count > kMaxDeterministicPolicies / A) {
            throw GuardExceeded("oracle enumerates at most " + std::to_string(kMaxDeterministicPolicies) +
                                " deterministic policies");
        }
        count *= A;
    }
    std::optional<Policy> best_deterministic;
    double best_deterministic_reward = 0.0;
    std::vector<std::size_t> choice(S, 0);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t code = k;
        for (std::size_t s = 0; s < S; ++s) {
            if (!observed[s]) continue;
            choice[s] = code % A;
            code /= A;
        }
        const Policy p = Policy::deterministic(choice, A);
        const auto r = detail::try_reward(m, p);
        ++out.deterministic_evaluated;
        if (!r) {
            ++out.skipped;
            out.log.push_back("deterministic policy " + std::to_string(k) + ": no unique stationary distribution");
            continue;
        }
        if (!best_deterministic || *r > best_deterministic_reward) {
            best_deterministic = p;
            best_deterministic_reward = *r;
        }
        consider(p, *r);
    }

    Rng rng(options.seed);
    for (std::size_t start = 0; start < options.restarts; ++start) {
        Policy init;
        if (start == 0) {
            init = Policy::uniform(S, A);
        } else if (start == 1 && best_deterministic) {
            init = *best_deterministic;
        } else {
            init = Policy::uniform(S, A);
            for (std::size_t s = 0; s < S; ++s)
                if (observed[s]) init.probs.row(static_cast<Index>(s)) = random_simplex_point(rng, static_cast<Index>(A));
        }
        const auto result = detail::projected_ascent(m, init, options.max_iterations);
        if (!result) {
            ++out.skipped;
            out.log.push_back("ascent start " + std::to_string(start) + ": no unique stationary distribution");
            continue;
        }
        consider(result->first, result->second);
    }
    if (!have) throw NonUniqueStationary("no candidate policy has a unique stationary distribution");
    return out;
}

struct StochasticityReport {
    Policy oracle_policy;
    double oracle_reward = 0.0;
    Policy truncated_policy;
    double truncated_reward = 0.0;
    std::size_t degree = 0;
    std::size_t bound = 0;
    double reward_loss = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string note;
};

/// Zeroes entries below the tolerance and renormalizes each row.
inline Policy truncate_policy(const Policy& p, double tolerance) {
    Policy out = p;
    for (Index s = 0; s < out.probs.rows(); ++s) {
        auto row = out.probs.row(s);
        for (Index a = 0; a < row.size(); ++a)
            if (row[a] < tolerance) row[a] = 0.0;
        if (row.sum() <= 0.0) {  // keep the largest entry
            Index best = 0;
            p.probs.row(s).maxCoeff(&best);
            row[best] = 1.0;
        }
        row /= row.sum();
    }
    return out;
}

/// Runs the oracle, truncates near-zero entries and checks the degree bound
/// |U|(|A|-1) together with the reward loss.
inline StochasticityReport verify_stochasticity_bound(const Pomdp& m, double tolerance = 1e-3,
                                                      const OracleOptions& options = {}) {
    StochasticityReport report;
    report.tolerance = tolerance;
    const auto oracle = brute_force_optimal_policy(m, options);
    report.oracle_policy = oracle.policy;
    report.oracle_reward = oracle.reward;
    report.bound = ambiguous_sensor_set(m).size() * (m.n_action - 1);
    report.truncated_policy = truncate_policy(oracle.policy, tolerance);
    report.degree = stochasticity_degree(report.truncated_policy);
    const auto r = detail::try_reward(m, report.truncated_policy);
    if (!r) {
        report.note = "truncated policy has no unique stationary distribution";
        return report;
    }
    report.truncated_reward = *r;
    report.reward_loss = report.oracle_reward - report.truncated_reward;
    report.passed = report.degree <= report.bound && report.reward_loss <= tolerance;
    return report;
}

}  // namespace mempol
