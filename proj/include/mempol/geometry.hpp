#pragma once

#include <mempol/pomdp.hpp>
#include <mempol/rational.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace mempol {

/// Joint distribution p(w, a) over W x A.
struct JointWA {
    Matrix table;
};

/// Joint distribution p(w, w') over W x W.
struct JointWW {
    Matrix table;
};

inline void require_joint(const Matrix& t, const char* what) {
    if (!t.allFinite() || t.minCoeff() < 0.0) throw ValidationError(std::string(what) + " has a negative or non-finite entry");
    if (std::abs(t.sum() - 1.0) > kStochasticTolerance) {
        throw ValidationError(std::string(what) + " sums to " + std::to_string(t.sum()));
    }
}

/// Exact vertex list of a polytope.
struct PolytopeVRep {
    std::vector<RationalMatrix> vertices;
    std::string shape;
};

inline constexpr std::size_t kMaxXiWorlds = 7;
inline constexpr std::size_t kMaxJVariables = 12;

/// Vertices of the Kirchhoff polytope: for every nonempty subset of worlds and
/// every cyclic permutation sigma of it, the table with 1/|subset| at (w, sigma(w)).
inline PolytopeVRep xi_vertices(std::size_t n) {
    if (n < 1) throw InvalidArgument("needs at least one world state");
    if (n > kMaxXiWorlds) {
        throw GuardExceeded("Kirchhoff polytope vertices are limited to n <= " + std::to_string(kMaxXiWorlds));
    }
    PolytopeVRep out;
    out.shape = "WxW";
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        std::vector<std::size_t> members;
        for (std::size_t w = 0; w < n; ++w)
            if (mask >> w & 1U) members.push_back(w);
        const Rational weight(1, static_cast<long long>(members.size()));
        // Cyclic orders: keep the first member in place, permute the rest.
        std::vector<std::size_t> order(members.begin() + 1, members.end());
        do {
            RationalMatrix v(n, n);
            std::vector<std::size_t> cycle{members.front()};
            cycle.insert(cycle.end(), order.begin(), order.end());
            for (std::size_t i = 0; i < cycle.size(); ++i) v(cycle[i], cycle[(i + 1) % cycle.size()]) = weight;
            out.vertices.push_back(std::move(v));
        } while (std::next_permutation(order.begin(), order.end()));
    }
    return out;
}

/// Equal row and column sums within 1e-10.
inline bool xi_membership(const JointWW& q) {
    if (q.table.rows() != q.table.cols()) throw DimensionMismatch("joint table over W x W must be square");
    return (q.table.rowwise().sum() - q.table.colwise().sum().transpose()).cwiseAbs().maxCoeff() <= 1e-10;
}

/// Dimension of the affine hull of a vertex list.
inline std::size_t affine_rank(const PolytopeVRep& p) {
    if (p.vertices.size() <= 1) return 0;
    const auto& base = p.vertices.front();
    RationalMatrix diffs(p.vertices.size() - 1, base.data.size());
    for (std::size_t i = 1; i < p.vertices.size(); ++i)
        for (std::size_t k = 0; k < base.data.size(); ++k) diffs(i - 1, k) = p.vertices[i].data[k] - base.data[k];
    return exact_rank(std::move(diffs));
}

/// Exact transition kernel alpha[w](a, w').
struct RationalTransition {
    std::size_t n_world = 0;
    std::size_t n_action = 0;
    std::vector<RationalMatrix> alpha;
};

/// Rationalizes the kernel of a POMDP. Rows are rescaled by their exact sum so
/// that they are exactly stochastic.
inline RationalTransition rational_transition(const Pomdp& m) {
    RationalTransition out{m.n_world, m.n_action, {}};
    for (std::size_t w = 0; w < m.n_world; ++w) {
        RationalMatrix block = rationalize(m.alpha[w]);
        for (std::size_t a = 0; a < m.n_action; ++a) {
            Rational total = 0;
            for (std::size_t v = 0; v < m.n_world; ++v) total += block(a, v);
            if (total == 0) throw ValidationError("transition row has zero mass");
            if (total != 1)
                for (std::size_t v = 0; v < m.n_world; ++v) block(a, v) /= total;
        }
        out.alpha.push_back(std::move(block));
    }
    return out;
}

/// p(w, w') = sum_a p(w, a) alpha(w'|w, a).
inline JointWW f_alpha_map(const Pomdp& m, const JointWA& p) {
    if (p.table.rows() != static_cast<Index>(m.n_world) || p.table.cols() != static_cast<Index>(m.n_action)) {
        throw DimensionMismatch("joint table must be |W| x |A|");
    }
    JointWW out{Matrix(p.table.rows(), p.table.rows())};
    for (Index w = 0; w < p.table.rows(); ++w) out.table.row(w) = p.table.row(w) * m.alpha[static_cast<std::size_t>(w)];
    return out;
}

inline RationalMatrix f_alpha_map(const RationalTransition& t, const RationalMatrix& p) {
    if (p.rows != t.n_world || p.cols != t.n_action) throw DimensionMismatch("joint table must be |W| x |A|");
    RationalMatrix out(t.n_world, t.n_world);
    for (std::size_t w = 0; w < t.n_world; ++w)
        for (std::size_t a = 0; a < t.n_action; ++a) {
            if (p(w, a) == 0) continue;
            for (std::size_t v = 0; v < t.n_world; ++v) out(w, v) += p(w, a) * t.alpha[w](a, v);
        }
    return out;
}

/// Conditional p(a|w) = sum_s beta(s|w) pi(a|s).
inline Matrix f_beta_map(const Pomdp& m, const Policy& p) { return effective_world_policy(m, p).probs; }

namespace detail {

/// Equality system of J: one stationarity row per w' and a normalization row,
/// over variables p(w, a) at index w * |A| + a.
inline RationalMatrix j_equalities(const RationalTransition& t) {
    const std::size_t W = t.n_world, A = t.n_action;
    RationalMatrix E(W + 1, W * A);
    for (std::size_t v = 0; v < W; ++v)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t a = 0; a < A; ++a) {
                Rational coeff = -t.alpha[w](a, v);
                if (w == v) coeff += 1;
                E(v, w * A + a) = coeff;
            }
    for (std::size_t k = 0; k < W * A; ++k) E(W, k) = 1;
    return E;
}

inline std::vector<Rational> j_rhs(std::size_t W) {
    std::vector<Rational> b(W + 1, Rational(0));
    b[W] = 1;
    return b;
}

inline RationalMatrix columns(const RationalMatrix& E, const std::vector<std::size_t>& cols) {
    RationalMatrix out(E.rows, cols.size());
    for (std::size_t r = 0; r < E.rows; ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = E(r, cols[c]);
    return out;
}

}  // namespace detail

/// Vertices of J = {p in the simplex over W x A with stationary world marginal}
/// as the basic feasible solutions of its equality system: every support
/// pattern with independent columns whose exact solution is strictly positive.
inline PolytopeVRep j_vertex_enumeration(const RationalTransition& t) {
    const std::size_t N = t.n_world * t.n_action;
    if (N > kMaxJVariables) {
        throw GuardExceeded("vertex enumeration of J is limited to |W||A| <= " + std::to_string(kMaxJVariables) +
                            " (got " + std::to_string(N) + ")");
    }
    const RationalMatrix E = detail::j_equalities(t);
    const auto b = detail::j_rhs(t.n_world);
    const std::size_t rank = exact_rank(E);
    PolytopeVRep out;
    out.shape = "WxA";
    std::vector<std::uint64_t> masks;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << N); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) <= rank) masks.push_back(mask);
    }
    std::stable_sort(masks.begin(), masks.end(),
                     [](std::uint64_t x, std::uint64_t y) { return std::popcount(x) < std::popcount(y); });
    for (std::uint64_t mask : masks) {
        std::vector<std::size_t> support;
        for (std::size_t k = 0; k < N; ++k)
            if (mask >> k & 1U) support.push_back(k);
        const auto x = solve_unique(detail::columns(E, support), b);
        if (!x) continue;
        if (std::any_of(x->begin(), x->end(), [](const Rational& v) { return v <= 0; })) continue;
        RationalMatrix v(t.n_world, t.n_action);
        for (std::size_t i = 0; i < support.size(); ++i) v.data[support[i]] = (*x)[i];
        if (std::find(out.vertices.begin(), out.vertices.end(), v) == out.vertices.end()) out.vertices.push_back(std::move(v));
    }
    return out;
}

inline PolytopeVRep j_vertex_enumeration(const Pomdp& m) {
    if (m.n_world * m.n_action > kMaxJVariables) {
        throw GuardExceeded("vertex enumeration of J is limited to |W||A| <= " + std::to_string(kMaxJVariables) +
                            " (got " + std::to_string(m.n_world * m.n_action) + ")");
    }
    return j_vertex_enumeration(rational_transition(m));
}

/// Exact membership in J.
inline bool in_j(const RationalTransition& t, const RationalMatrix& q) {
    if (q.rows != t.n_world || q.cols != t.n_action) throw DimensionMismatch("joint table must be |W| x |A|");
    if (std::any_of(q.data.begin(), q.data.end(), [](const Rational& v) { return v < 0; })) return false;
    if (q.sum() != 1) return false;
    const RationalMatrix flow = f_alpha_map(t, q);
    for (std::size_t v = 0; v < t.n_world; ++v) {
        Rational in = 0, out = 0;
        for (std::size_t w = 0; w < t.n_world; ++w) {
            in += flow(w, v);
            out += flow(v, w);
        }
        if (in != out) return false;
    }
    return true;
}

/// A point of J is a vertex iff the equality columns on its support are independent.
inline bool is_j_vertex(const RationalTransition& t, const RationalMatrix& q) {
    if (!in_j(t, q)) return false;
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < q.data.size(); ++k)
        if (q.data[k] != 0) support.push_back(k);
    return exact_rank(detail::columns(detail::j_equalities(t), support)) == support.size();
}

struct Lemma1Report {
    std::size_t vertex_count = 0;
    /// Indices of vertices whose conditional is not deterministic on the support
    /// of the world marginal.
    std::vector<std::size_t> violations;
    bool passed() const { return violations.empty(); }
};

/// Checks that each vertex has at most one positive action per world.
inline Lemma1Report check_lemma1(const PolytopeVRep& j) {
    Lemma1Report report;
    report.vertex_count = j.vertices.size();
    for (std::size_t i = 0; i < j.vertices.size(); ++i) {
        const auto& v = j.vertices[i];
        for (std::size_t w = 0; w < v.rows; ++w) {
            std::size_t positive = 0;
            for (std::size_t a = 0; a < v.cols; ++a) positive += v(w, a) > 0 ? 1 : 0;
            if (positive > 1) {
                report.violations.push_back(i);
                break;
            }
        }
    }
    return report;
}

inline Lemma1Report check_lemma1(const Pomdp& m) { return check_lemma1(j_vertex_enumeration(m)); }

/// One convex piece G_{theta,w} = offset + scale * simplex over A.
struct GThetaPiece {
    Vector offset;
    double scale = 0.0;
};

/// Cartesian product over worlds of the pieces G_{theta,w}, for a fixed
/// policy theta on the ambiguous sensors.
struct GThetaDecomposition {
    std::vector<std::size_t> ambiguous;
    std::vector<GThetaPiece> pieces;

    /// Whether the world conditional p(.|w) lies in every piece.
    bool contains(const Matrix& conditional, double tolerance = 1e-12) const {
        if (conditional.rows() != static_cast<Index>(pieces.size())) return false;
        for (std::size_t w = 0; w < pieces.size(); ++w) {
            const Vector rest = conditional.row(static_cast<Index>(w)).transpose() - pieces[w].offset;
            if (rest.size() != pieces[w].offset.size()) return false;
            if (rest.minCoeff() < -tolerance) return false;
            if (std::abs(rest.sum() - pieces[w].scale) > tolerance) return false;
        }
        return true;
    }
};

/// theta has one row per ambiguous sensor, in the order of ambiguous_sensor_set.
inline GThetaDecomposition g_theta_decomposition(const Pomdp& m, const Matrix& theta) {
    GThetaDecomposition out;
    out.ambiguous = ambiguous_sensor_set(m);
    if (theta.rows() != static_cast<Index>(out.ambiguous.size()) ||
        (theta.rows() > 0 && theta.cols() != static_cast<Index>(m.n_action))) {
        throw DimensionMismatch("theta must have one row of length |A| per ambiguous sensor (" +
                                std::to_string(out.ambiguous.size()) + ")");
    }
    for (std::size_t w = 0; w < m.n_world; ++w) {
        GThetaPiece piece{Vector::Zero(static_cast<Index>(m.n_action)), 0.0};
        for (std::size_t s = 0; s < m.n_sensor; ++s) {
            const double b = m.beta(static_cast<Index>(w), static_cast<Index>(s));
            const auto it = std::find(out.ambiguous.begin(), out.ambiguous.end(), s);
            if (it == out.ambiguous.end()) {
                piece.scale += b;
            } else {
                piece.offset += b * theta.row(it - out.ambiguous.begin()).transpose();
            }
        }
        out.pieces.push_back(std::move(piece));
    }
    return out;
}

/// Restriction of a policy to the ambiguous sensors.
inline Matrix restrict_to_ambiguous(const Pomdp& m, const Policy& p) {
    const auto U = ambiguous_sensor_set(m);
    Matrix out(static_cast<Index>(U.size()), static_cast<Index>(m.n_action));
    for (std::size_t i = 0; i < U.size(); ++i) out.row(static_cast<Index>(i)) = p.probs.row(static_cast<Index>(U[i]));
    return out;
}

}  // namespace mempol
