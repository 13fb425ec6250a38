#pragma once

// Test-side helpers: random instance generators and independent reference
// computations that share no code paths with the library solvers.

#include <mempol/pomdp.hpp>
#include <mempol/random.hpp>

#include <vector>

namespace testing_support {

using mempol::Index;
using mempol::Matrix;
using mempol::Vector;

/// Row-stochastic matrix with flat-Dirichlet rows; `zero_prob` knocks out
/// entries (keeping at least one per row).
inline Matrix random_stochastic(mempol::Rng& rng, Index rows, Index cols, double zero_prob = 0.0) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        Vector v = mempol::random_simplex_point(rng, cols);
        if (zero_prob > 0.0) {
            for (Index c = 0; c < cols; ++c)
                if (mempol::uniform01(rng) < zero_prob) v[c] = 0.0;
            if (v.sum() <= 0.0) v[static_cast<Index>(mempol::uniform_index(rng, static_cast<std::size_t>(cols)))] = 1.0;
            v /= v.sum();
        }
        m.row(r) = v.transpose();
    }
    return m;
}

inline mempol::Pomdp random_pomdp(mempol::Rng& rng, std::size_t W, std::size_t S, std::size_t A,
                                  double alpha_zero = 0.0, double beta_zero = 0.0) {
    mempol::Pomdp m(W, S, A);
    for (std::size_t w = 0; w < W; ++w) m.alpha[w] = random_stochastic(rng, Index(A), Index(W), alpha_zero);
    m.beta = random_stochastic(rng, Index(W), Index(S), beta_zero);
    for (Index w = 0; w < Index(W); ++w)
        for (Index a = 0; a < Index(A); ++a) m.reward(w, a) = mempol::uniform(rng, -1.0, 1.0);
    return m;
}

inline mempol::Policy random_policy(mempol::Rng& rng, std::size_t S, std::size_t A) {
    return mempol::Policy(random_stochastic(rng, Index(S), Index(A)));
}

/// Stationary vector by repeated squaring of the lazy chain (P + I) / 2, which
/// converges for any chain with a unique stationary vector.
inline Vector power_stationary(const Matrix& P, int squarings = 60) {
    const Index n = P.rows();
    Matrix M = 0.5 * (P + Matrix::Identity(n, n));
    for (int i = 0; i < squarings; ++i) {
        M = M * M;
        for (Index r = 0; r < n; ++r) M.row(r) /= M.row(r).sum();
    }
    return M.row(0).transpose();
}

/// Average reward computed from scratch with explicit loops and the power oracle.
inline double reference_average_reward(const mempol::Pomdp& m, const mempol::Policy& p) {
    const Index W = Index(m.n_world);
    Matrix P = Matrix::Zero(W, W);
    Vector r = Vector::Zero(W);
    for (Index w = 0; w < W; ++w)
        for (Index s = 0; s < Index(m.n_sensor); ++s)
            for (Index a = 0; a < Index(m.n_action); ++a) {
                const double pa = m.beta(w, s) * p.probs(s, a);
                r[w] += pa * m.reward(w, a);
                for (Index v = 0; v < W; ++v) P(w, v) += pa * m.alpha[std::size_t(w)](a, v);
            }
    return power_stationary(P).dot(r);
}

/// V by iterating the Bellman operator to machine precision.
inline Vector reference_values(const mempol::Pomdp& m, const mempol::Policy& p, double gamma) {
    const Index W = Index(m.n_world);
    Vector v = Vector::Zero(W);
    for (int it = 0; it < 2000; ++it) {
        Vector next = Vector::Zero(W);
        for (Index w = 0; w < W; ++w)
            for (Index s = 0; s < Index(m.n_sensor); ++s)
                for (Index a = 0; a < Index(m.n_action); ++a) {
                    const double pa = m.beta(w, s) * p.probs(s, a);
                    next[w] += pa * (m.reward(w, a) + gamma * m.alpha[std::size_t(w)].row(a).dot(v));
                }
        v = next;
    }
    return v;
}

/// Three worlds behind two sensors; the shared sensor needs different actions
/// in its two worlds, so the gradient has a definite direction.
inline mempol::Pomdp three_state_test_pomdp() {
    mempol::Pomdp m(3, 2, 2);
    m.alpha[0] << 0.1, 0.6, 0.3, 0.5, 0.2, 0.3;
    m.alpha[1] << 0.3, 0.3, 0.4, 0.6, 0.1, 0.3;
    m.alpha[2] << 0.4, 0.4, 0.2, 0.2, 0.3, 0.5;
    m.beta << 1, 0, 0.2, 0.8, 0, 1;
    m.reward << 1, 0, 0, 1, 0.5, -0.5;
    return m;
}

}  // namespace testing_support
