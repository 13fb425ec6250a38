#pragma once

#include <mempol/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace mempol {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Row sums of kernels must match 1 to within this.
inline constexpr double kStochasticTolerance = 1e-12;
/// Kernel entries at or below this count as zero when computing supports.
inline constexpr double kSupportThreshold = 1e-12;
/// Singular values at or below this count as zero in the uniqueness test.
inline constexpr double kRankTolerance = 1e-9;

/// Finite POMDP (W, S, A, alpha, beta, R). States, sensors and actions are
/// zero-based indices.
struct Pomdp {
    std::size_t n_world = 0;
    std::size_t n_sensor = 0;
    std::size_t n_action = 0;
    /// alpha[w](a, w') = probability of moving to w' after action a in w.
    std::vector<Matrix> alpha;
    /// beta(w, s) = probability of sensing s in world state w.
    Matrix beta;
    /// reward(w, a).
    Matrix reward;

    Pomdp() = default;
    Pomdp(std::size_t worlds, std::size_t sensors, std::size_t actions)
        : n_world(worlds),
          n_sensor(sensors),
          n_action(actions),
          alpha(worlds, Matrix::Zero(static_cast<Index>(actions), static_cast<Index>(worlds))),
          beta(Matrix::Zero(static_cast<Index>(worlds), static_cast<Index>(sensors))),
          reward(Matrix::Zero(static_cast<Index>(worlds), static_cast<Index>(actions))) {}

    double transition(std::size_t w, std::size_t a, std::size_t next) const {
        return alpha[w](static_cast<Index>(a), static_cast<Index>(next));
    }
    double& transition(std::size_t w, std::size_t a, std::size_t next) {
        return alpha[w](static_cast<Index>(a), static_cast<Index>(next));
    }
};

/// Memoryless stationary policy: probs(s, a) = pi(a | s).
struct Policy {
    Matrix probs;

    Policy() = default;
    explicit Policy(Matrix p) : probs(std::move(p)) {}

    std::size_t n_sensor() const { return static_cast<std::size_t>(probs.rows()); }
    std::size_t n_action() const { return static_cast<std::size_t>(probs.cols()); }
    double operator()(std::size_t s, std::size_t a) const {
        return probs(static_cast<Index>(s), static_cast<Index>(a));
    }

    static Policy uniform(std::size_t sensors, std::size_t actions) {
        return Policy(Matrix::Constant(static_cast<Index>(sensors), static_cast<Index>(actions),
                                       1.0 / static_cast<double>(actions)));
    }
    /// One point mass per sensor state.
    static Policy deterministic(const std::vector<std::size_t>& choice, std::size_t actions) {
        Matrix p = Matrix::Zero(static_cast<Index>(choice.size()), static_cast<Index>(actions));
        for (std::size_t s = 0; s < choice.size(); ++s) p(static_cast<Index>(s), static_cast<Index>(choice[s])) = 1.0;
        return Policy(std::move(p));
    }
};

/// Effective world-state policy p(a | w); probs(w, a).
struct WorldConditional {
    Matrix probs;
};

struct ValueFunctions {
    Vector v;  // over W
    Matrix q;  // W x A
    double gamma = 0.0;
};

/// One violated constraint, with the offending indices.
struct Violation {
    std::string what;
    std::vector<std::size_t> where;
};

namespace detail {

inline void check_row(const Eigen::Ref<const Vector>& row, const std::string& name,
                      std::vector<std::size_t> where, std::vector<Violation>& out) {
    bool negative = false;
    for (Index i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i])) {
            out.push_back({name + " has a non-finite entry", where});
            return;
        }
        negative = negative || row[i] < 0.0;
    }
    if (negative) {
        Index worst = 0;
        row.minCoeff(&worst);
        auto at = where;
        at.push_back(static_cast<std::size_t>(worst));
        out.push_back({name + " has a negative entry", at});
    }
    if (std::abs(row.sum() - 1.0) > kStochasticTolerance) {
        out.push_back({name + " sums to " + std::to_string(row.sum()), std::move(where)});
    }
}

inline std::string index_list(const std::vector<std::size_t>& idx) {
    std::string s = "(";
    for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i]);
    return s + ")";
}

}  // namespace detail

inline std::string to_string(const Violation& v) { return v.what + " at " + detail::index_list(v.where); }

/// Reports every shape or stochasticity violation; empty iff the POMDP is well formed.
inline std::vector<Violation> validate(const Pomdp& m) {
    std::vector<Violation> out;
    const auto W = static_cast<Index>(m.n_world);
    const auto S = static_cast<Index>(m.n_sensor);
    const auto A = static_cast<Index>(m.n_action);
    if (W == 0 || S == 0 || A == 0) out.push_back({"empty state, sensor or action set", {}});
    if (m.alpha.size() != m.n_world) {
        out.push_back({"alpha has " + std::to_string(m.alpha.size()) + " world blocks", {}});
    }
    if (m.beta.rows() != W || m.beta.cols() != S) out.push_back({"beta has wrong shape", {}});
    if (m.reward.rows() != W || m.reward.cols() != A) out.push_back({"reward has wrong shape", {}});
    if (!out.empty()) return out;

    for (Index w = 0; w < W; ++w) {
        const auto& block = m.alpha[static_cast<std::size_t>(w)];
        if (block.rows() != A || block.cols() != W) {
            out.push_back({"alpha block has wrong shape", {static_cast<std::size_t>(w)}});
            continue;
        }
        for (Index a = 0; a < A; ++a) {
            detail::check_row(block.row(a).transpose(), "alpha(.|w,a)",
                              {static_cast<std::size_t>(w), static_cast<std::size_t>(a)}, out);
        }
    }
    for (Index w = 0; w < W; ++w) {
        detail::check_row(m.beta.row(w).transpose(), "beta(.|w)", {static_cast<std::size_t>(w)}, out);
    }
    if (!m.reward.allFinite()) out.push_back({"reward has a non-finite entry", {}});
    return out;
}

/// Reports shape and stochasticity violations of a policy for the given sizes.
inline std::vector<Violation> validate(const Policy& p, std::size_t n_sensor, std::size_t n_action) {
    std::vector<Violation> out;
    if (p.n_sensor() != n_sensor || p.n_action() != n_action) {
        out.push_back({"policy is " + std::to_string(p.n_sensor()) + "x" + std::to_string(p.n_action()) +
                           ", expected " + std::to_string(n_sensor) + "x" + std::to_string(n_action),
                       {}});
        return out;
    }
    for (Index s = 0; s < p.probs.rows(); ++s) {
        detail::check_row(p.probs.row(s).transpose(), "pi(.|s)", {static_cast<std::size_t>(s)}, out);
    }
    return out;
}

inline void require_valid(const Pomdp& m) {
    auto issues = validate(m);
    if (!issues.empty()) throw ValidationError("invalid POMDP: " + to_string(issues.front()));
}

inline void require_shape(const Pomdp& m, const Policy& p) {
    if (p.n_sensor() != m.n_sensor || p.n_action() != m.n_action) {
        throw DimensionMismatch("policy is " + std::to_string(p.n_sensor()) + "x" + std::to_string(p.n_action()) +
                                " but POMDP has " + std::to_string(m.n_sensor) + " sensors and " +
                                std::to_string(m.n_action) + " actions");
    }
}

/// p(a|w) = sum_s beta(s|w) pi(a|s).
inline WorldConditional effective_world_policy(const Pomdp& m, const Policy& p) {
    require_shape(m, p);
    return {m.beta * p.probs};
}

/// P(w, w') = sum_a p(a|w) alpha(w'|w,a).
inline Matrix world_transition_matrix(const Pomdp& m, const WorldConditional& cond) {
    const auto W = static_cast<Index>(m.n_world);
    Matrix P(W, W);
    for (Index w = 0; w < W; ++w) P.row(w) = cond.probs.row(w) * m.alpha[static_cast<std::size_t>(w)];
    return P;
}

inline Matrix world_transition_matrix(const Pomdp& m, const Policy& p) {
    return world_transition_matrix(m, effective_world_policy(m, p));
}

/// Dimension of the left null space of (P - I), from the singular values.
inline Index stationary_space_dimension(const Matrix& P) {
    const Index n = P.rows();
    Matrix M = P.transpose() - Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(M);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) rank += sv[i] > kRankTolerance ? 1 : 0;
    return n - rank;
}

/// Solves (P^T - I) p = 0 with sum(p) = 1 directly. Throws NonUniqueStationary
/// when the stationary space is more than one-dimensional. Uniqueness does not
/// imply convergence from every start (periodic chains pass this test).
inline Vector stationary_distribution(const Matrix& P) {
    const Index n = P.rows();
    if (P.cols() != n || n == 0) throw DimensionMismatch("transition matrix must be square and non-empty");
    if (stationary_space_dimension(P) > 1) {
        throw NonUniqueStationary("stationary distribution is not unique (rank test at " +
                                  std::to_string(kRankTolerance) + ")");
    }
    Matrix A(n + 1, n);
    A.topRows(n) = P.transpose() - Matrix::Identity(n, n);
    A.row(n).setOnes();
    Vector b = Vector::Zero(n + 1);
    b[n] = 1.0;
    Vector p = A.colPivHouseholderQr().solve(b);
    p = p.cwiseMax(0.0);
    return p / p.sum();
}

/// r^pi(w) = sum_a p(a|w) R(w,a).
inline Vector expected_reward_per_state(const Pomdp& m, const WorldConditional& cond) {
    return cond.probs.cwiseProduct(m.reward).rowwise().sum();
}

/// Long-run average reward sum_w p(w) sum_a p(a|w) R(w,a) under the unique
/// stationary distribution.
inline double average_reward(const Pomdp& m, const Policy& p) {
    const auto cond = effective_world_policy(m, p);
    const Vector stationary = stationary_distribution(world_transition_matrix(m, cond));
    return stationary.dot(expected_reward_per_state(m, cond));
}

inline ValueFunctions value_functions(const Pomdp& m, const Policy& p, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("discount must lie in (0,1)");
    const auto cond = effective_world_policy(m, p);
    const Matrix P = world_transition_matrix(m, cond);
    const auto W = static_cast<Index>(m.n_world);
    const Vector r = expected_reward_per_state(m, cond);
    ValueFunctions out;
    out.gamma = gamma;
    out.v = (Matrix::Identity(W, W) - gamma * P).partialPivLu().solve(r);
    out.q.resize(W, static_cast<Index>(m.n_action));
    for (Index w = 0; w < W; ++w) {
        out.q.row(w) = m.reward.row(w) + gamma * (m.alpha[static_cast<std::size_t>(w)] * out.v).transpose();
    }
    return out;
}

/// sum_w mu(w) V(w).
inline double discounted_reward(const Pomdp& m, const Policy& p, double gamma, const Vector& mu) {
    if (mu.size() != static_cast<Index>(m.n_world)) throw DimensionMismatch("start distribution has wrong length");
    return mu.dot(value_functions(m, p, gamma).v);
}

/// World states that can emit sensor s (beta above the support threshold).
inline std::vector<std::size_t> sensor_support(const Pomdp& m, std::size_t s) {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < m.n_world; ++w) {
        if (m.beta(static_cast<Index>(w), static_cast<Index>(s)) > kSupportThreshold) out.push_back(w);
    }
    return out;
}

/// Sensor states emitted by more than one world state.
inline std::vector<std::size_t> ambiguous_sensor_set(const Pomdp& m) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < m.n_sensor; ++s) {
        if (sensor_support(m, s).size() > 1) out.push_back(s);
    }
    return out;
}

/// Greedy improvement on every unambiguous sensor state: the row becomes a point
/// mass on argmax_a Q(w, a) for the single world state w behind that sensor
/// (lowest index wins ties). Ambiguous and never-emitted sensors keep their row.
/// All switched sensors are driven by distinct world states, so the joint update
/// still dominates V componentwise.
inline Policy policy_improvement_step(const Pomdp& m, const Policy& p, double gamma) {
    const auto values = value_functions(m, p, gamma);
    Policy next = p;
    for (std::size_t s = 0; s < m.n_sensor; ++s) {
        const auto support = sensor_support(m, s);
        if (support.size() != 1) continue;
        const auto qrow = values.q.row(static_cast<Index>(support.front()));
        Index best = 0;
        for (Index a = 1; a < qrow.size(); ++a) {
            if (qrow[a] > qrow[best]) best = a;
        }
        next.probs.row(static_cast<Index>(s)).setZero();
        next.probs(static_cast<Index>(s), best) = 1.0;
    }
    return next;
}

/// Reduces a reward R(w, a, w') to R(w, a) = sum_w' alpha(w'|w,a) R(w,a,w').
/// full[w](a, w').
inline Matrix reduce_transition_reward(const Pomdp& m, const std::vector<Matrix>& full) {
    if (full.size() != m.n_world) throw DimensionMismatch("transition reward has wrong number of world blocks");
    Matrix out(static_cast<Index>(m.n_world), static_cast<Index>(m.n_action));
    for (std::size_t w = 0; w < m.n_world; ++w) {
        if (full[w].rows() != m.alpha[w].rows() || full[w].cols() != m.alpha[w].cols()) {
            throw DimensionMismatch("transition reward block has wrong shape");
        }
        out.row(static_cast<Index>(w)) = m.alpha[w].cwiseProduct(full[w]).rowwise().sum().transpose();
    }
    return out;
}

}  // namespace mempol
