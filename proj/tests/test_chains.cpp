#include "support.hpp"

#include <mempol/chains.hpp>
#include <mempol/environments.hpp>
#include <mempol/gradient.hpp>
#include <mempol/models/model.hpp>

#include <gtest/gtest.h>

using namespace mempol;

namespace {

std::vector<double> random_t(Rng& rng, std::size_t K) {
    std::vector<double> t(K);
    for (auto& x : t) x = uniform(rng, 0.05, 1.0);
    return t;
}

ChainSpec random_spec(Rng& rng, std::size_t U, std::size_t K) {
    ChainSpec spec = ChainSpec::uniform(U, K);
    for (auto& row : spec.success) row = random_t(rng, K);
    return spec;
}

double projected_gradient_norm(const ChainSpec& spec, const ChainSolution& sol) {
    const Pomdp m = build_chain(spec);
    return exact_policy_gradient(m, chain_policy_matrix(sol.policy)).norm();
}

}  // namespace

TEST(Root, SingleAction) {
    EXPECT_NEAR(unique_positive_root([](double c) { return c - 1.0; }), 1.0, 1e-12);
}

TEST(Root, QuadraticOfTwoActions) {
    const double c = unique_positive_root([](double c) { return c * c + 2 * c - 1.0; });
    EXPECT_NEAR(c, std::sqrt(2.0) - 1.0, 1e-12);
}

TEST(Root, ThreeActions) { EXPECT_NEAR(chain_optimal(3).root_constants[0], 0.2744, 1e-4); }

TEST(Root, MissingBracketIsReported) {
    EXPECT_THROW(unique_positive_root([](double c) { return c + 1.0; }), ConvergenceFailure);
    EXPECT_THROW(unique_positive_root([](double c) { return c - 2.0; }), ConvergenceFailure);
}

TEST(ChainOptimal, TableValues) {
    const auto k1 = chain_optimal(1);
    EXPECT_NEAR(k1.policy[0][0], 1.0, 1e-12);
    EXPECT_NEAR(k1.reward, 0.5, 1e-12);

    const auto k2 = chain_optimal(2);
    EXPECT_NEAR(k2.policy[0][0], 0.4142, 1e-4);
    EXPECT_NEAR(k2.policy[0][1], 0.5858, 1e-4);
    EXPECT_NEAR(k2.reward, 0.1464, 1e-4);

    const auto k3 = chain_optimal(3);
    const std::vector<double> pi3{0.2744, 0.3496, 0.3760};
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(k3.policy[0][i], pi3[std::size_t(i)], 1e-4);
    EXPECT_NEAR(k3.reward, 0.0256, 1e-4);

    const auto k4 = chain_optimal(4);
    const std::vector<double> pi4{0.2104, 0.2547, 0.2659, 0.2689};
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(k4.policy[0][i], pi4[std::size_t(i)], 1e-4);
    EXPECT_NEAR(k4.reward, 0.0030, 1e-4);
}

TEST(ChainOptimal, TwoActionsInClosedForm) {
    const double c = std::sqrt(2.0) - 1.0;
    const auto sol = chain_optimal(2);
    EXPECT_NEAR(sol.policy[0][0], c, 1e-12);
    EXPECT_NEAR(sol.policy[0][1], c + c * c, 1e-12);
    EXPECT_NEAR(sol.reward, c * (c + c * c) / (1 + c + c * (c + c * c)), 1e-12);
}

TEST(ChainOptimal, IncreasingFullSupportRows) {
    for (std::size_t K = 2; K <= 8; ++K) {
        const auto sol = chain_optimal(K);
        for (Index i = 1; i < Index(K); ++i) EXPECT_LT(sol.policy[0][i - 1], sol.policy[0][i]);
        EXPECT_GT(sol.policy[0].minCoeff(), 0.0);
        EXPECT_NEAR(sol.policy[0].sum(), 1.0, 1e-12);
        EXPECT_GT(sol.reward, 0.0);
        EXPECT_LT(sol.reward, 1.0);
    }
}

TEST(ChainOptimalT, UnitSuccessReducesToPlainChain) {
    for (std::size_t K = 1; K <= 5; ++K) {
        const auto a = chain_optimal(K);
        const auto b = chain_optimal_t(std::vector<double>(K, 1.0));
        EXPECT_EQ(a.policy[0], b.policy[0]);
        EXPECT_EQ(a.reward, b.reward);
    }
}

TEST(ChainOptimalT, BeatsEverySimplexGridPoint) {
    Rng rng(1);
    for (int trial = 0; trial < 3; ++trial) {
        const auto t = random_t(rng, 3);
        const auto sol = chain_optimal_t(t);
        EXPECT_GT(sol.policy[0].minCoeff(), 0.0);
        const Pomdp m = build_chain(ChainSpec::single(t));
        double best = -1.0;
        const int n = 50;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                Policy p(Matrix(1, 3));
                p.probs << double(i) / n, double(j) / n, double(n - i - j) / n;
                best = std::max(best, testing_support::reference_average_reward(m, p));
            }
        EXPECT_GE(sol.reward, best - 1e-12);
    }
}

TEST(ChainOptimalT, RejectsOutOfRangeSuccess) {
    EXPECT_THROW(chain_optimal_t({0.5, 0.0}), ValidationError);
    EXPECT_THROW(chain_optimal_t({1.5}), ValidationError);
}

TEST(Multichain, SingleGroupReduction) {
    Rng rng(2);
    const auto t = random_t(rng, 4);
    const auto a = multichain_optimal(ChainSpec::single(t));
    const auto b = chain_optimal_t(t);
    EXPECT_EQ(a.policy[0], b.policy[0]);
}

TEST(Multichain, EveryGroupHasFullSupport) {
    Rng rng(3);
    for (std::size_t U = 1; U <= 3; ++U)
        for (std::size_t K = 1; K <= 4; ++K) {
            const auto spec = random_spec(rng, U, K);
            const auto sol = multichain_optimal(spec);
            EXPECT_EQ(stochasticity_degree(chain_policy_matrix(sol.policy)), U * (K - 1));
            EXPECT_LE(sol.max_residual, 1e-10);
        }
}

TEST(Multichain, FirstOrderConditionsHold) {
    Rng rng(4);
    for (std::size_t U = 1; U <= 3; ++U) {
        const auto spec = random_spec(rng, U, 3);
        EXPECT_LE(projected_gradient_norm(spec, multichain_optimal(spec)), 1e-6) << "U=" << U;
    }
    for (std::size_t K = 1; K <= 4; ++K) {
        const auto spec = ChainSpec::uniform(1, K);
        EXPECT_LE(projected_gradient_norm(spec, multichain_optimal(spec)), 1e-6) << "K=" << K;
    }
}

TEST(ChainReward, ClosedFormValues) {
    const auto spec = ChainSpec::uniform(1, 1);
    EXPECT_DOUBLE_EQ(chain_reward({Vector::Ones(1)}, spec), 0.5);
    Vector with_zero(3);
    with_zero << 0.5, 0.0, 0.5;
    EXPECT_EQ(chain_reward({with_zero}, ChainSpec::uniform(1, 3)), 0.0);
}

TEST(ChainReward, MatchesStationarySolveOnConstructedChains) {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t U = 1 + std::size_t(trial % 3);
        const std::size_t K = 1 + std::size_t(trial % 4);
        const auto spec = random_spec(rng, U, K);
        std::vector<Vector> rows;
        for (std::size_t j = 0; j < U; ++j) rows.push_back(mempol::random_simplex_point(rng, Index(K)));
        const Pomdp m = build_chain(spec);
        EXPECT_NEAR(chain_reward(rows, spec), average_reward(m, chain_policy_matrix(rows)), 1e-10);
    }
}

TEST(ChainReward, ShapeMismatch) {
    EXPECT_THROW(chain_reward({Vector::Ones(2)}, ChainSpec::uniform(1, 3)), DimensionMismatch);
    EXPECT_THROW(chain_reward({}, ChainSpec::uniform(1, 3)), DimensionMismatch);
}
