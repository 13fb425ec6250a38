#pragma once

#include <mempol/error.hpp>
#include <mempol/pomdp.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mempol {

using Rational = boost::multiprecision::cpp_rational;

/// Dense row-major matrix of exact rationals.
struct RationalMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Rational> data;

    RationalMatrix() = default;
    RationalMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    Rational& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const Rational& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool operator==(const RationalMatrix&) const = default;

    Matrix to_double() const {
        Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                out(static_cast<Index>(r), static_cast<Index>(c)) = (*this)(r, c).convert_to<double>();
        return out;
    }
    Rational sum() const {
        Rational s = 0;
        for (const auto& x : data) s += x;
        return s;
    }
};

/// Exact value of a double (every finite double is a dyadic rational).
inline Rational exact_rational(double x) {
    if (!std::isfinite(x)) throw InvalidArgument("cannot convert a non-finite value to a rational");
    return Rational(x);
}

/// Continued-fraction approximation with denominator <= max_denominator that
/// lies within `tolerance` of x; the exact dyadic value otherwise.
inline Rational rationalize(double x, long long max_denominator = 1000000, double tolerance = 1e-12) {
    if (!std::isfinite(x)) throw InvalidArgument("cannot convert a non-finite value to a rational");
    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double rest = x;
    for (int it = 0; it < 64; ++it) {
        const double whole = std::floor(rest);
        if (std::abs(whole) > 1e15) break;
        const auto a = static_cast<long long>(whole);
        const long long q2 = q0 + a * q1;
        if (q2 > max_denominator) break;
        const long long p2 = p0 + a * p1;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) <= tolerance) return Rational(p1, q1);
        const double frac = rest - whole;
        if (frac <= 0.0) break;
        rest = 1.0 / frac;
    }
    return exact_rational(x);
}

inline RationalMatrix rationalize(const Matrix& m, long long max_denominator = 1000000, double tolerance = 1e-12) {
    RationalMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = rationalize(m(r, c), max_denominator, tolerance);
    return out;
}

/// "p/q", or "p" for integers.
inline std::string to_string(const Rational& x) { return x.str(); }

inline Rational parse_rational(const std::string& text) {
    try {
        return Rational(text);
    } catch (const std::exception&) {
        throw ValidationError("not a rational number: '" + text + "'");
    }
}

/// Reduced row echelon form in place; returns the pivot column of each pivot row.
inline std::vector<std::size_t> row_reduce(RationalMatrix& m) {
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m.cols && row < m.rows; ++col) {
        std::size_t pick = row;
        while (pick < m.rows && m(pick, col) == 0) ++pick;
        if (pick == m.rows) continue;
        if (pick != row)
            for (std::size_t c = 0; c < m.cols; ++c) std::swap(m(pick, c), m(row, c));
        const Rational inv = 1 / m(row, col);
        for (std::size_t c = col; c < m.cols; ++c) m(row, c) *= inv;
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (r == row || m(r, col) == 0) continue;
            const Rational factor = m(r, col);
            for (std::size_t c = col; c < m.cols; ++c) m(r, c) -= factor * m(row, c);
        }
        pivots.push_back(col);
        ++row;
    }
    return pivots;
}

inline std::size_t exact_rank(RationalMatrix m) { return row_reduce(m).size(); }

/// The unique solution of A x = b, or nullopt when the system is inconsistent
/// or underdetermined.
inline std::optional<std::vector<Rational>> solve_unique(const RationalMatrix& A, const std::vector<Rational>& b) {
    if (b.size() != A.rows) throw DimensionMismatch("right-hand side length does not match the system");
    RationalMatrix aug(A.rows, A.cols + 1);
    for (std::size_t r = 0; r < A.rows; ++r) {
        for (std::size_t c = 0; c < A.cols; ++c) aug(r, c) = A(r, c);
        aug(r, A.cols) = b[r];
    }
    const auto pivots = row_reduce(aug);
    if (!pivots.empty() && pivots.back() == A.cols) return std::nullopt;  // inconsistent
    if (pivots.size() != A.cols) return std::nullopt;
    std::vector<Rational> x(A.cols);
    for (std::size_t i = 0; i < pivots.size(); ++i) x[pivots[i]] = aug(i, A.cols);
    return x;
}

}  // namespace mempol
