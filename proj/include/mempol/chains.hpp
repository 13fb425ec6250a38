#pragma once

#include <mempol/error.hpp>
#include <mempol/pomdp.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace mempol {

/// U sensor groups of K chained states each. t[j][i] is the probability that
/// the one advancing action of step i in group j actually advances.
struct ChainSpec {
    std::size_t n_groups = 1;
    std::size_t n_actions = 1;
    std::vector<std::vector<double>> success;

    static ChainSpec uniform(std::size_t groups, std::size_t actions) {
        return {groups, actions, std::vector<std::vector<double>>(groups, std::vector<double>(actions, 1.0))};
    }
    static ChainSpec single(std::vector<double> t) {
        const std::size_t K = t.size();
        return {1, K, {std::move(t)}};
    }
    double t(std::size_t j, std::size_t i) const { return success[j][i]; }
};

inline void validate(const ChainSpec& spec) {
    if (spec.n_groups < 1 || spec.n_actions < 1) throw ValidationError("chain needs U >= 1 and K >= 1");
    if (spec.success.size() != spec.n_groups) throw ValidationError("success table needs one row per group");
    for (std::size_t j = 0; j < spec.n_groups; ++j) {
        if (spec.success[j].size() != spec.n_actions) {
            throw ValidationError("success row " + std::to_string(j) + " needs " + std::to_string(spec.n_actions) +
                                  " entries");
        }
        for (std::size_t i = 0; i < spec.n_actions; ++i) {
            const double t = spec.success[j][i];
            if (!(t > 0.0 && t <= 1.0)) {
                throw ValidationError("success probability t[" + std::to_string(j) + "][" + std::to_string(i) +
                                      "] = " + std::to_string(t) + " is outside (0,1]");
            }
        }
    }
}

struct ChainSolution {
    /// policy[j](i): probability of action i at the sensor of group j.
    std::vector<Vector> policy;
    std::vector<double> root_constants;
    double reward = 0.0;
    std::size_t sweeps = 0;
    double max_residual = 0.0;
};

inline constexpr double kRootResidual = 1e-12;

/// Root in (0, 1] of an increasing function with f(0) < 0 <= f(1), by
/// bisection. Stops once |f| <= 1e-12 or the bracket cannot shrink further.
inline double unique_positive_root(const std::function<double(double)>& f) {
    double lo = 0.0;
    double hi = 1.0;
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if (!(f_lo < 0.0) || !(f_hi >= 0.0)) {
        throw ConvergenceFailure("no sign change on [0,1]: f(0) = " + std::to_string(f_lo) +
                                 ", f(1) = " + std::to_string(f_hi));
    }
    if (f_hi <= kRootResidual) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double value = f(mid);
        if (std::abs(value) <= kRootResidual) return mid;
        (value < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

/// Group-j policy from its constant: pi_1 = c d, pi_i = pi_{i-1} + c e prod_{l<i} t_l pi_l.
inline Vector chain_group_policy(double c, double d, double e, const std::vector<double>& t) {
    const std::size_t K = t.size();
    Vector pi(static_cast<Index>(K));
    pi[0] = c * d;
    double prefix = 1.0;
    for (std::size_t i = 1; i < K; ++i) {
        prefix *= t[i - 1] * pi[static_cast<Index>(i) - 1];
        pi[static_cast<Index>(i)] = pi[static_cast<Index>(i) - 1] + c * e * prefix;
    }
    return pi;
}

}  // namespace detail

/// Closed-form average reward: the stationary mass of the terminal state,
/// prod / (1 + sum of the running products), over all groups in order.
inline double chain_reward(const std::vector<Vector>& policy, const ChainSpec& spec) {
    validate(spec);
    if (policy.size() != spec.n_groups) throw DimensionMismatch("chain policy needs one row per group");
    double product = 1.0;
    double denominator = 1.0;
    for (std::size_t j = 0; j < spec.n_groups; ++j) {
        if (policy[j].size() != static_cast<Index>(spec.n_actions)) {
            throw DimensionMismatch("chain policy row " + std::to_string(j) + " has the wrong length");
        }
        for (std::size_t i = 0; i < spec.n_actions; ++i) {
            product *= spec.t(j, i) * policy[j][static_cast<Index>(i)];
            denominator += product;
        }
    }
    return product / denominator;
}

/// Optimal memoryless policy of the multi-group chain. Each group's constant
/// solves its own normalization given the earlier groups, so Gauss-Seidel
/// sweeps over j settle after one pass; the loop re-checks every residual.
inline ChainSolution multichain_optimal(const ChainSpec& spec, double tolerance = 1e-10,
                                        std::size_t max_sweeps = 10000) {
    validate(spec);
    const std::size_t U = spec.n_groups;
    ChainSolution out;
    out.policy.assign(U, Vector::Constant(static_cast<Index>(spec.n_actions), 1.0 / static_cast<double>(spec.n_actions)));
    out.root_constants.assign(U, 0.0);

    auto prefix_terms = [&](std::size_t j, double& d, double& e) {
        d = 1.0;
        e = 1.0;
        for (std::size_t g = 0; g < j; ++g) {
            for (std::size_t i = 0; i < spec.n_actions; ++i) {
                e *= spec.t(g, i) * out.policy[g][static_cast<Index>(i)];
                d += e;
            }
        }
    };

    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        for (std::size_t j = 0; j < U; ++j) {
            double d = 0.0;
            double e = 0.0;
            prefix_terms(j, d, e);
            const double c = unique_positive_root(
                [&](double x) { return detail::chain_group_policy(x, d, e, spec.success[j]).sum() - 1.0; });
            out.root_constants[j] = c;
            out.policy[j] = detail::chain_group_policy(c, d, e, spec.success[j]);
        }
        double residual = 0.0;
        for (std::size_t j = 0; j < U; ++j) {
            double d = 0.0;
            double e = 0.0;
            prefix_terms(j, d, e);
            const Vector again = detail::chain_group_policy(out.root_constants[j], d, e, spec.success[j]);
            residual = std::max(residual, std::abs(again.sum() - 1.0));
            residual = std::max(residual, (again - out.policy[j]).cwiseAbs().maxCoeff());
        }
        out.sweeps = sweep;
        out.max_residual = residual;
        if (residual <= tolerance) {
            out.reward = chain_reward(out.policy, spec);
            return out;
        }
    }
    throw ConvergenceFailure("chain constants did not settle after " + std::to_string(max_sweeps) + " sweeps");
}

inline ChainSolution chain_optimal_t(const std::vector<double>& t) {
    if (t.empty()) throw InvalidArgument("chain needs at least one action");
    return multichain_optimal(ChainSpec::single(t));
}

inline ChainSolution chain_optimal(std::size_t K) {
    if (K < 1) throw InvalidArgument("chain needs at least one action");
    return chain_optimal_t(std::vector<double>(K, 1.0));
}

/// Chain policy rows as a Policy matrix (one row per group sensor).
inline Policy chain_policy_matrix(const std::vector<Vector>& rows) {
    if (rows.empty()) throw DimensionMismatch("empty chain policy");
    Matrix probs(static_cast<Index>(rows.size()), rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j) probs.row(static_cast<Index>(j)) = rows[j].transpose();
    return Policy(std::move(probs));
}

}  // namespace mempol
