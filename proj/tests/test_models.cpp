#include "support.hpp"

#include <mempol/models/model.hpp>

#include <gtest/gtest.h>

#include <bit>

using namespace mempol;

namespace {

/// Numerical rank by singular values, used as an independent check of the
/// greedy feature selection.
Index svd_rank(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    return (sv.array() > 1e-8 * std::max(1.0, sv[0])).count();
}

/// Dimension of the conditional family spanned by all parity features of order
/// <= k, modulo per-sensor constants: rank([F; sensor indicators]) - |S|.
Index reference_k_dimension(std::size_t S, std::size_t A, unsigned k) {
    const std::size_t N = S * A;
    const unsigned n = std::bit_width(N - 1);
    std::vector<Eigen::RowVectorXd> rows;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        if (static_cast<unsigned>(std::popcount(mask)) > k) continue;
        Eigen::RowVectorXd r(static_cast<Index>(N));
        for (std::size_t i = 0; i < N; ++i) r[Index(i)] = std::popcount(i & mask) % 2 ? -1.0 : 1.0;
        rows.push_back(r);
    }
    Matrix all(Index(rows.size() + S), Index(N));
    all.setZero();
    for (std::size_t i = 0; i < rows.size(); ++i) all.row(Index(i)) = rows[i];
    for (std::size_t s = 0; s < S; ++s) all.block(Index(rows.size() + s), Index(s * A), 1, Index(A)).setOnes();
    return svd_rank(all) - Index(S);
}

template <class M>
void expect_scores_match_finite_differences(const M& model, double rel_tol) {
    const Vector theta = model.parameters();
    const double h = 1e-6;
    for (std::size_t s = 0; s < model.n_sensor(); ++s) {
        for (std::size_t a = 0; a < model.n_action(); ++a) {
            Vector fd(theta.size());
            for (Index i = 0; i < theta.size(); ++i) {
                Vector up = theta, down = theta;
                up[i] += h;
                down[i] -= h;
                fd[i] = (std::log(model.with_parameters(up).policy()(s, a)) -
                         std::log(model.with_parameters(down).policy()(s, a))) /
                        (2 * h);
            }
            const Vector g = model.score(s, a);
            EXPECT_LE((g - fd).norm(), rel_tol * std::max(1.0, fd.norm())) << "pair " << s << "," << a;
        }
    }
}

template <class M>
void expect_score_identity(const M& model) {
    const Policy p = model.policy();
    for (std::size_t s = 0; s < model.n_sensor(); ++s) {
        Vector mean = Vector::Zero(Index(model.dimension()));
        for (std::size_t a = 0; a < model.n_action(); ++a) mean += p(s, a) * model.score(s, a);
        EXPECT_LE(mean.cwiseAbs().maxCoeff(), 1e-10);
    }
}

template <class M>
void expect_valid_policy(const M& model) {
    EXPECT_TRUE(validate(model.policy(), model.n_sensor(), model.n_action()).empty());
}

Vector random_vector(Rng& rng, Index n, double scale) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(rng, -scale, scale);
    return v;
}

}  // namespace

TEST(KInteraction, MazeSizesGiveReportedDimensions) {
    const std::vector<std::size_t> expected{2, 11, 23, 29, 30};
    for (unsigned k = 1; k <= 5; ++k) {
        EXPECT_EQ(k_interaction_statistics(10, 4, k).dimension(), expected[k - 1]) << "k=" << k;
    }
}

TEST(KInteraction, MatchesRankOracle) {
    for (auto [S, A] : std::vector<std::pair<std::size_t, std::size_t>>{{10, 4}, {2, 2}, {3, 3}, {5, 2}, {1, 4}, {6, 3}}) {
        const unsigned n = bits_for(S * A);
        for (unsigned k = 1; k <= n; ++k) {
            EXPECT_EQ(Index(k_interaction_statistics(S, A, k).dimension()), reference_k_dimension(S, A, k))
                << S << "x" << A << " k=" << k;
        }
    }
}

TEST(KInteraction, PruningCountsByEnumeration) {
    // Raw survivors of the constancy rule for the maze sizes, by direct enumeration.
    std::vector<std::size_t> raw;
    for (unsigned k = 1; k <= 6; ++k) {
        std::size_t count = 0;
        for (std::uint64_t mask = 1; mask < 64; ++mask) {
            if (unsigned(std::popcount(mask)) > k) continue;
            bool varies = false;
            for (std::uint64_t s = 0; s < 10 && !varies; ++s)
                for (std::uint64_t a = 1; a < 4; ++a)
                    if (std::popcount((s * 4 + a) & mask) % 2 != std::popcount((s * 4) & mask) % 2) varies = true;
            count += varies ? 1 : 0;
        }
        raw.push_back(count);
    }
    for (unsigned k = 1; k <= 6; ++k) {
        KInteractionInfo info;
        k_interaction_statistics(10, 4, k, &info);
        EXPECT_EQ(info.n_bits, 6u);
        EXPECT_EQ(info.after_pruning, raw[k - 1]);
    }
}

TEST(KInteraction, SmallCases) {
    EXPECT_EQ(k_interaction_statistics(1, 2, 1).dimension(), 1u);
    EXPECT_EQ(k_interaction_statistics(2, 2, 2).dimension(), 2u);
    EXPECT_EQ(k_interaction_statistics(2, 2, 1).dimension(), 1u);
}

TEST(KInteraction, DimensionIsMonotoneAndSaturates) {
    std::size_t last = 0;
    for (unsigned k = 1; k <= 6; ++k) {
        const auto d = k_interaction_statistics(10, 4, k).dimension();
        EXPECT_GE(d, last);
        last = d;
    }
    EXPECT_EQ(last, 30u);
}

TEST(KInteraction, RejectsOrderOutOfRange) {
    EXPECT_THROW(k_interaction_statistics(10, 4, 0), InvalidArgument);
    EXPECT_THROW(k_interaction_statistics(10, 4, 7), InvalidArgument);
}

TEST(Cyclic, MomentCurveColumns) {
    const auto stats = cyclic_statistics(1, 3, 2);
    Matrix expected(2, 3);
    expected << 1, 2, 3, 1, 4, 9;
    EXPECT_EQ(stats.features, expected);
}

TEST(Cyclic, ColumnsDistinctAndGuards) {
    const auto stats = cyclic_statistics(3, 4, 6);
    for (Index i = 0; i < 12; ++i)
        for (Index j = i + 1; j < 12; ++j) EXPECT_GT((stats.features.col(i) - stats.features.col(j)).norm(), 0.0);
    EXPECT_THROW(cyclic_statistics(1, 3, 4), InvalidArgument);
    EXPECT_THROW(cyclic_statistics(2, 3, 3), InvalidArgument);
}

TEST(Cyclic, StandardizedRowsHaveZeroMeanUnitScale) {
    const auto stats = standardized(cyclic_statistics(2, 4, 4));
    for (Index r = 0; r < 4; ++r) {
        EXPECT_NEAR(stats.features.row(r).mean(), 0.0, 1e-12);
        EXPECT_NEAR(stats.features.row(r).squaredNorm() / 8.0, 1.0, 1e-12);
    }
}

TEST(Softmax, ZeroParametersGiveUniformRows) {
    const ExponentialPolicyModel model(k_interaction_statistics(10, 4, 3));
    EXPECT_TRUE(softmax_policy(model).probs.isApprox(Policy::uniform(10, 4).probs, 1e-15));
}

TEST(Softmax, LargeParametersApproachPointMass) {
    const auto stats = tabular_statistics(2, 3);
    Vector theta = Vector::Zero(6);
    theta[1] = 50.0;
    theta[5] = 50.0;
    const auto p = ExponentialPolicyModel(stats, theta).policy();
    EXPECT_GE(p(0, 1), 1 - 1e-15);
    EXPECT_GE(p(1, 2), 1 - 1e-15);
}

TEST(Softmax, HugeParametersStayFinite) {
    Vector theta = Vector::Constant(2, 1e6);
    const auto p = ExponentialPolicyModel(k_interaction_statistics(10, 4, 1), theta).policy();
    EXPECT_TRUE(p.probs.allFinite());
}

TEST(Softmax, PolicyDerivativeMatchesFiniteDifferences) {
    Rng rng(1);
    const ExponentialPolicyModel base(k_interaction_statistics(4, 3, 2));
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
    const Vector theta = model.parameters();
    const Policy p = model.policy();
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 3; ++a)
            for (Index i = 0; i < theta.size(); ++i) {
                Vector up = theta, down = theta;
                up[i] += 1e-6;
                down[i] -= 1e-6;
                const double fd = (model.with_parameters(up).policy()(s, a) - model.with_parameters(down).policy()(s, a)) / 2e-6;
                const double analytic = p(s, a) * model.score(s, a)[i];
                EXPECT_NEAR(analytic, fd, 1e-4 * std::max(1.0, std::abs(fd)));
            }
}

TEST(Softmax, ScoreAtZeroIsCenteredFeature) {
    const ExponentialPolicyModel model(cyclic_statistics(1, 3, 2));
    const Vector g = log_policy_gradient(model, 0, 2);
    EXPECT_NEAR(g[0], 3.0 - 2.0, 1e-12);
    EXPECT_NEAR(g[1], 9.0 - 14.0 / 3.0, 1e-12);
}

TEST(Softmax, ScoreIdentityAndFiniteDifferences) {
    Rng rng(2);
    for (unsigned k = 1; k <= 3; ++k) {
        const ExponentialPolicyModel base(k_interaction_statistics(3, 4, k));
        const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
        expect_score_identity(model);
        expect_scores_match_finite_differences(model, 1e-5);
        expect_valid_policy(model);
    }
    const ExponentialPolicyModel cyc(standardized(cyclic_statistics(3, 3, 4)));
    const auto model = cyc.with_parameters(random_vector(rng, 4, 1.0));
    expect_score_identity(model);
    expect_scores_match_finite_differences(model, 1e-5);
}

TEST(Softmax, RejectsWrongParameterLength) {
    EXPECT_THROW(ExponentialPolicyModel(tabular_statistics(2, 2), Vector::Zero(3)), DimensionMismatch);
    Vector bad = Vector::Zero(4);
    bad[0] = std::nan("");
    EXPECT_THROW(ExponentialPolicyModel(tabular_statistics(2, 2), bad), InvalidArgument);
}

TEST(Mixture, ZeroParametersGiveUniform) {
    const MixtureModel model(3, 2, function_k_interaction_statistics(3, 2, 2));
    EXPECT_TRUE(mixture_policy(model).probs.isApprox(Policy::uniform(3, 2).probs, 1e-14));
    const Vector& w = model.function_weights();
    EXPECT_NEAR(w.maxCoeff() - w.minCoeff(), 0.0, 1e-15);
}

TEST(Mixture, PointMassReproducesDeterministicPolicy) {
    // One-hot weight statistics: a large parameter on f puts essentially all mass on it.
    const std::uint64_t count = function_count(3, 3);
    Vector theta = Vector::Zero(Index(count));
    const std::uint64_t f = 5;  // f(0) = 2, f(1) = 1, f(2) = 0
    theta[Index(f)] = 800.0;
    const MixtureModel model(3, 3, Matrix::Identity(Index(count), Index(count)), theta);
    const auto expected = Policy::deterministic({2, 1, 0}, 3);
    EXPECT_LE((model.policy().probs - expected.probs).cwiseAbs().maxCoeff(), 1e-300);
}

TEST(Mixture, FitReproducesMixtureOfTwoDeterministicPolicies) {
    Policy target(Matrix(2, 2));
    target.probs << 0.3, 0.7, 0.3, 0.7;  // 0.3 * (0,0) + 0.7 * (1,1)
    const MixtureModel start(2, 2, function_k_interaction_statistics(2, 2, 2));
    const auto fit = fit_to_policy(start, target);
    const auto p = start.with_parameters(fit.theta).policy();
    EXPECT_LE((p.probs - target.probs).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Mixture, ScoresMatchFiniteDifferences) {
    Rng rng(3);
    const MixtureModel base(2, 3, function_k_interaction_statistics(2, 3, 2));
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
    expect_score_identity(model);
    expect_scores_match_finite_differences(model, 1e-5);
    expect_valid_policy(model);
    const MixtureModel cyc(2, 3, function_cyclic_statistics(2, 3, 4), random_vector(rng, 4, 1.0));
    expect_score_identity(cyc);
    expect_scores_match_finite_differences(cyc, 1e-5);
}

TEST(Mixture, EnumerationGuard) {
    EXPECT_THROW(function_count(21, 2), GuardExceeded);
    EXPECT_EQ(function_count(20, 2), std::uint64_t{1} << 20);
    EXPECT_THROW(MixtureModel(11, 4, Matrix::Zero(1, 1)), GuardExceeded);
}

TEST(Mixture, FunctionFeaturesAreNonConstant) {
    const Matrix f = function_k_interaction_statistics(3, 3, 2);
    for (Index r = 0; r < f.rows(); ++r) EXPECT_GT(f.row(r).maxCoeff() - f.row(r).minCoeff(), 0.0);
}

TEST(Crbm, ZeroParametersGiveUniform) {
    const CrbmModel model(5, 3, 4);
    EXPECT_TRUE(model.policy().probs.isApprox(Policy::uniform(5, 3).probs, 1e-14));
    EXPECT_EQ(model.n_in(), 3u);
    EXPECT_EQ(model.n_out(), 2u);
}

TEST(Crbm, NoHiddenUnitsIsLogistic) {
    Rng rng(4);
    const CrbmModel base(3, 4, 0);
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
    const Vector b = model.b_out();
    for (std::size_t s = 0; s < 3; ++s) {
        Vector logits(4);
        for (Index a = 0; a < 4; ++a) logits[a] = b[0] * double(a & 1) + b[1] * double((a >> 1) & 1);
        Vector expected = logits.array().exp();
        expected /= expected.sum();
        EXPECT_TRUE(crbm_policy(model, s).isApprox(expected, 1e-14));
    }
}

TEST(Crbm, MatchesBruteForceHiddenEnumeration) {
    Rng rng(5);
    const CrbmModel base(3, 3, 4);
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.5));
    for (std::size_t s = 0; s < 3; ++s) {
        const Vector x = model.input_code(s);
        Vector unnorm(3);
        for (std::size_t a = 0; a < 3; ++a) {
            const Vector y = model.output_code(a);
            double total = 0.0;
            for (std::size_t code = 0; code < 16; ++code) {
                const Vector z = binary_code(code, 4);
                total += std::exp(z.dot(model.v_hid_in() * x) + z.dot(model.w_hid_out() * y) + model.b_out().dot(y) +
                                  model.c_hid().dot(z));
            }
            unnorm[Index(a)] = total;
        }
        EXPECT_TRUE(crbm_policy(model, s).isApprox(unnorm / unnorm.sum(), 1e-12));
    }
}

TEST(Crbm, ScoresMatchFiniteDifferences) {
    Rng rng(6);
    const CrbmModel base(4, 3, 3);
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
    expect_score_identity(model);
    expect_scores_match_finite_differences(model, 1e-4);
    expect_valid_policy(model);
}

TEST(Crbm, HiddenGuard) {
    const CrbmModel big(2, 2, 21);
    EXPECT_THROW(big.policy(), GuardExceeded);
    Rng rng(0);
    EXPECT_NO_THROW(crbm_sample(big, 0, rng, CrbmSampling::gibbs));
}

TEST(Crbm, ZeroParameterSamplesAreUniform) {
    const CrbmModel model(2, 4, 2);
    Rng rng(7);
    std::vector<int> counts(4, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[crbm_sample(model, 1, rng)];
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int c : counts) EXPECT_LE(std::abs(c - n / 4.0), 3 * sigma);
}

TEST(Crbm, GibbsApproachesExactConditional) {
    Rng rng(8);
    const CrbmModel base(2, 4, 2);
    const auto model = base.with_parameters(random_vector(rng, Index(base.dimension()), 1.0));
    const Vector exact = crbm_policy(model, 1);
    const int n = 20000;
    Vector freq = Vector::Zero(4);
    for (int i = 0; i < n; ++i) freq[Index(crbm_sample(model, 1, rng, CrbmSampling::gibbs, 50))] += 1.0 / n;
    EXPECT_LE(0.5 * (freq - exact).cwiseAbs().sum(), 0.05);
}

TEST(Crbm, RepresentsBoundaryPolicyWithEnoughHiddenUnits) {
    // |S| = 2, m = 1: two hidden units suffice for the 1-stochastic target.
    Policy target(Matrix(2, 2));
    target.probs << 0.3, 0.7, 1.0, 0.0;
    Rng rng(9);
    const CrbmModel base(2, 2, 2);
    const auto start = base.with_parameters(random_vector(rng, Index(base.dimension()), 0.1));
    const auto fit = fit_to_policy(start, target);
    EXPECT_LE(fit.kl, 1e-3);
}

TEST(Closure, KInteractionApproachesOneStochasticPolicy) {
    // 2^k - 1 >= |S| + m with |S| = 2, m = 1 holds for k = 2.
    Policy target(Matrix(2, 4));
    target.probs << 0.4, 0.6, 0, 0, 0, 0, 0, 1;
    const ExponentialPolicyModel start(k_interaction_statistics(2, 4, 2));
    const auto fit = fit_to_policy(start, target);
    EXPECT_LE(fit.kl, 1e-3);
    EXPECT_LE(fit.theta.norm(), 1e4);
}

TEST(AnyModel, ForwardsToWrappedFamily) {
    Rng rng(10);
    const ExponentialPolicyModel e(k_interaction_statistics(3, 2, 2));
    const AnyModel any(e.with_parameters(random_vector(rng, Index(e.dimension()), 1.0)));
    const auto& inner = std::get<ExponentialPolicyModel>(any.variant());
    EXPECT_EQ(any.policy().probs, inner.policy().probs);
    EXPECT_EQ(any.score(1, 1), inner.score(1, 1));
    EXPECT_EQ(any.with_parameters(Vector::Zero(Index(any.dimension()))).policy().probs, Policy::uniform(3, 2).probs);
}

TEST(Degree, FacesOfThePolytope) {
    EXPECT_EQ(stochasticity_degree(Policy::deterministic({0, 2, 1}, 3)), 0u);
    EXPECT_EQ(stochasticity_degree(Policy::uniform(3, 4)), 9u);
    Policy chain(Matrix(1, 3));
    chain.probs << 0.2744, 0.3496, 0.3760;
    EXPECT_EQ(stochasticity_degree(chain), 2u);
}
