#pragma once

#include <mempol/models/statistics.hpp>
#include <mempol/random.hpp>

#include <cmath>
#include <string>

namespace mempol {

/// Exact conditionals are only offered up to this many hidden units.
inline constexpr std::size_t kMaxExactHidden = 20;

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Bit k of `value` as a 0/1 double vector of length `bits`.
inline Vector binary_code(std::size_t value, unsigned bits) {
    Vector v(static_cast<Index>(bits));
    for (unsigned k = 0; k < bits; ++k) v[static_cast<Index>(k)] = static_cast<double>((value >> k) & 1U);
    return v;
}

/// ceil(log2 n), zero for n <= 1.
inline unsigned code_length(std::size_t n) { return n <= 1 ? 0U : bits_for(n); }

enum class CrbmSampling { exact, gibbs };

/// Conditional restricted Boltzmann machine
///   pi(y|x) proportional to sum_z exp(z.Vx + z.Wy + b.y + c.z)
/// with sensors and actions binary coded. Output codewords beyond |A| are
/// excluded from the normalization. Parameters are flattened as
/// [W row-major, V row-major, b, c].
class CrbmModel {
public:
    CrbmModel() = default;
    CrbmModel(std::size_t n_sensor, std::size_t n_action, std::size_t n_hidden)
        : CrbmModel(n_sensor, n_action, n_hidden, Vector::Zero(parameter_count(n_sensor, n_action, n_hidden))) {}
    CrbmModel(std::size_t n_sensor, std::size_t n_action, std::size_t n_hidden, const Vector& theta)
        : n_sensor_(n_sensor),
          n_action_(n_action),
          n_hidden_(n_hidden),
          n_in_(code_length(n_sensor)),
          n_out_(code_length(n_action)) {
        if (n_sensor == 0 || n_action == 0) throw InvalidArgument("empty sensor or action set");
        if (theta.size() != parameter_count(n_sensor, n_action, n_hidden)) {
            throw DimensionMismatch("CRBM parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                                    std::to_string(parameter_count(n_sensor, n_action, n_hidden)));
        }
        if (!theta.allFinite()) throw InvalidArgument("parameters must be finite");
        const auto H = static_cast<Index>(n_hidden_);
        const auto O = static_cast<Index>(n_out_);
        const auto I = static_cast<Index>(n_in_);
        w_hid_out_.resize(H, O);
        v_hid_in_.resize(H, I);
        Index k = 0;
        for (Index j = 0; j < H; ++j)
            for (Index o = 0; o < O; ++o) w_hid_out_(j, o) = theta[k++];
        for (Index j = 0; j < H; ++j)
            for (Index i = 0; i < I; ++i) v_hid_in_(j, i) = theta[k++];
        b_out_ = theta.segment(k, O);
        k += O;
        c_hid_ = theta.segment(k, H);
    }

    static Index parameter_count(std::size_t n_sensor, std::size_t n_action, std::size_t n_hidden) {
        const auto H = static_cast<Index>(n_hidden);
        const auto O = static_cast<Index>(code_length(n_action));
        const auto I = static_cast<Index>(code_length(n_sensor));
        return H * O + H * I + O + H;
    }

    std::size_t n_sensor() const { return n_sensor_; }
    std::size_t n_action() const { return n_action_; }
    std::size_t n_hidden() const { return n_hidden_; }
    unsigned n_in() const { return n_in_; }
    unsigned n_out() const { return n_out_; }
    std::size_t dimension() const { return static_cast<std::size_t>(parameter_count(n_sensor_, n_action_, n_hidden_)); }
    const Matrix& w_hid_out() const { return w_hid_out_; }
    const Matrix& v_hid_in() const { return v_hid_in_; }
    const Vector& b_out() const { return b_out_; }
    const Vector& c_hid() const { return c_hid_; }

    Vector parameters() const {
        Vector theta(static_cast<Index>(dimension()));
        Index k = 0;
        for (Index j = 0; j < w_hid_out_.rows(); ++j)
            for (Index o = 0; o < w_hid_out_.cols(); ++o) theta[k++] = w_hid_out_(j, o);
        for (Index j = 0; j < v_hid_in_.rows(); ++j)
            for (Index i = 0; i < v_hid_in_.cols(); ++i) theta[k++] = v_hid_in_(j, i);
        theta.segment(k, b_out_.size()) = b_out_;
        k += b_out_.size();
        theta.segment(k, c_hid_.size()) = c_hid_;
        return theta;
    }

    CrbmModel with_parameters(const Vector& theta) const { return {n_sensor_, n_action_, n_hidden_, theta}; }

    Vector input_code(std::size_t s) const { return binary_code(s, n_in_); }
    Vector output_code(std::size_t a) const { return binary_code(a, n_out_); }

    /// Hidden pre-activations c + Vx + Wy.
    Vector hidden_field(std::size_t s, std::size_t a) const {
        return c_hid_ + v_hid_in_ * input_code(s) + w_hid_out_ * output_code(a);
    }

    /// log sum_z exp(...) with the hidden layer summed in closed form.
    double log_unnormalized(std::size_t s, std::size_t a) const {
        const Vector field = hidden_field(s, a);
        double total = b_out_.dot(output_code(a));
        for (Index j = 0; j < field.size(); ++j) total += softplus(field[j]);
        return total;
    }

    Vector action_probabilities(std::size_t s) const {
        require_exact();
        const auto A = static_cast<Index>(n_action_);
        Vector logits(A);
        for (Index a = 0; a < A; ++a) logits[a] = log_unnormalized(s, static_cast<std::size_t>(a));
        logits.array() -= logits.maxCoeff();
        Vector p = logits.array().exp();
        return p / p.sum();
    }

    Policy policy() const {
        Matrix probs(static_cast<Index>(n_sensor_), static_cast<Index>(n_action_));
        for (std::size_t s = 0; s < n_sensor_; ++s) probs.row(static_cast<Index>(s)) = action_probabilities(s);
        return Policy(std::move(probs));
    }

    /// Exact grad_theta log pi(a|s), hidden units marginalized.
    Vector score(std::size_t s, std::size_t a) const {
        const Vector p = action_probabilities(s);
        Vector grad = energy_gradient(s, a);
        for (Index b = 0; b < p.size(); ++b) grad -= p[b] * energy_gradient(s, static_cast<std::size_t>(b));
        return grad;
    }

    /// Draws an action for sensor s. Exact mode samples the normalized
    /// conditional; Gibbs mode alternates hidden and output layers for
    /// `gibbs_steps` sweeps from a uniformly drawn valid output.
    std::size_t sample(std::size_t s, Rng& rng, CrbmSampling mode = CrbmSampling::exact,
                       std::size_t gibbs_steps = 10) const {
        if (mode == CrbmSampling::exact) return sample_categorical(rng, action_probabilities(s));
        const Vector x = input_code(s);
        const Vector hidden_bias = c_hid_ + v_hid_in_ * x;
        std::size_t a = uniform_index(rng, n_action_);
        Vector z(static_cast<Index>(n_hidden_));
        Vector out_logits(static_cast<Index>(n_action_));
        for (std::size_t step = 0; step < gibbs_steps; ++step) {
            const Vector field = hidden_bias + w_hid_out_ * output_code(a);
            for (Index j = 0; j < z.size(); ++j) z[j] = uniform01(rng) < logistic(field[j]) ? 1.0 : 0.0;
            const Vector out_field = b_out_ + w_hid_out_.transpose() * z;
            for (std::size_t b = 0; b < n_action_; ++b) out_logits[static_cast<Index>(b)] = out_field.dot(output_code(b));
            out_logits.array() -= out_logits.maxCoeff();
            a = sample_categorical(rng, Vector(out_logits.array().exp()));
        }
        return a;
    }

private:
    void require_exact() const {
        if (n_hidden_ > kMaxExactHidden) {
            throw GuardExceeded("exact CRBM conditionals are limited to " + std::to_string(kMaxExactHidden) +
                                " hidden units");
        }
    }

    /// Gradient of log_unnormalized(s, a) in the flattened layout.
    Vector energy_gradient(std::size_t s, std::size_t a) const {
        const Vector x = input_code(s);
        const Vector y = output_code(a);
        const Vector field = hidden_field(s, a);
        Vector act(field.size());
        for (Index j = 0; j < field.size(); ++j) act[j] = logistic(field[j]);
        Vector grad(static_cast<Index>(dimension()));
        Index k = 0;
        for (Index j = 0; j < act.size(); ++j)
            for (Index o = 0; o < y.size(); ++o) grad[k++] = act[j] * y[o];
        for (Index j = 0; j < act.size(); ++j)
            for (Index i = 0; i < x.size(); ++i) grad[k++] = act[j] * x[i];
        grad.segment(k, y.size()) = y;
        k += y.size();
        grad.segment(k, act.size()) = act;
        return grad;
    }

    std::size_t n_sensor_ = 0;
    std::size_t n_action_ = 0;
    std::size_t n_hidden_ = 0;
    unsigned n_in_ = 0;
    unsigned n_out_ = 0;
    Matrix w_hid_out_;
    Matrix v_hid_in_;
    Vector b_out_;
    Vector c_hid_;
};

inline Vector crbm_policy(const CrbmModel& model, std::size_t s) { return model.action_probabilities(s); }

inline std::size_t crbm_sample(const CrbmModel& model, std::size_t s, Rng& rng,
                               CrbmSampling mode = CrbmSampling::exact, std::size_t gibbs_steps = 10) {
    return model.sample(s, rng, mode, gibbs_steps);
}

inline Vector crbm_log_gradient(const CrbmModel& model, std::size_t s, std::size_t a) { return model.score(s, a); }

}  // namespace mempol
