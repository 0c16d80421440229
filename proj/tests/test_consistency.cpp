#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

using namespace corrdef;

TEST(Grid, GeometricEndpoints) {
    const auto g = residual_grid(2.0);
    ASSERT_EQ(g.size(), 32u);
    EXPECT_DOUBLE_EQ(g.front(), 2e-3);
    EXPECT_DOUBLE_EQ(g.back(), 2.0);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
}

TEST(AlphaCurve, Examples) {
    const AlphaValue a = alpha_curve(1.0, 1.5, 0.5, std::numbers::ln2);
    EXPECT_NEAR(a.alpha, 0.0, 1e-15);
    const AlphaValue d = alpha_curve(2.0, 0.7, 0.7, 0.5);
    EXPECT_NEAR(d.alpha, 0.0, 1e-15);
    EXPECT_NEAR(d.alpha_prime, 2.0, 1e-15);
    EXPECT_NEAR(d.exp_alpha, 1.0, 1e-15);
}

TEST(AlphaCurve, Errors) {
    EXPECT_THROW(alpha_curve(0.0, 1.0, 1.0, 0.5), std::invalid_argument);
    EXPECT_THROW(alpha_curve(1.0, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(AlphaCurve, MatchesLinearOdeOracle) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double q = u(rng);
        const double re = u(rng);
        const double ru = trial % 3 == 0 ? re + 1e-7 : u(rng);
        for (double t : {1e-4, 1e-2, 0.3, 1.0}) {
            const AlphaValue a = alpha_curve(q, re, ru, t);
            EXPECT_NEAR(a.alpha, oracle::alpha_by_linear_ode(q, re, ru, t), 1e-8);
            // derivative satisfies the defining equation
            EXPECT_NEAR(a.alpha_prime, q / a.exp_alpha + re - ru, 1e-8 * std::max(1.0, a.alpha_prime));
        }
    }
}

TEST(AlphaCurve, BranchContinuity) {
    const double q = 0.8;
    const double re = 1.3;
    for (double t : {1e-3, 0.1, 1.0}) {
        const AlphaValue near = alpha_curve(q, re, re - 1e-7, t);
        const AlphaValue flat = alpha_curve(q, re, re, t);
        EXPECT_LE(std::abs(near.alpha - flat.alpha), 1e-6);
        EXPECT_LE(std::abs(near.alpha_prime - flat.alpha_prime), 1e-6 * flat.alpha_prime);
    }
}

TEST(BetaCurve, SymmetricInitialValueIsZero) {
    const PairCurve c({1, 1, 1, 1, 2, 2, 2, 0}, 1.0);
    EXPECT_NEAR(c.initial_value(), 0.0, 1e-15);
}

TEST(BetaCurve, IndependentRatesGiveZero) {
    const MonotoneGenerator g = independent_generator(std::vector<double>{0.4, -0.2}, 1.0);
    const PairRates r{g.q_single(0), g.q_single(1), g.q_pair(0, 1), g.q_pair(1, 0),
                      g.r_empty(),  g.r_single(0), g.r_single(1), g.r_pair(0, 1)};
    for (const auto& v : beta_curve(r, residual_grid(1.0), 1.0)) {
        EXPECT_NEAR(v.beta, 0.0, 1e-8);
        EXPECT_NEAR(v.beta_prime, 0.0, 1e-8);
    }
}

TEST(BetaCurve, MatchesExtractionAtTwoVertices) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 5; ++trial) {
        const MonotoneGenerator g = oracle::random_generator(2, rng, 0.1, 3.0);
        const ParamCurves curves = curves_from_rates(g);
        for (double t : geometric_grid(0.01, 1.0, 12)) {
            const auto p = oracle::transient_law(g, t);
            EXPECT_NEAR(curves.beta(0, 1, t).beta, oracle::pair_coefficient(p, 0, 1), 1e-6) << "t=" << t;
            EXPECT_NEAR(curves.alpha(0, t).alpha, oracle::vertex_coefficient(p, 0), 1e-6);
        }
    }
}

TEST(BetaCurve, RejectsZeroVertexRate) {
    EXPECT_THROW(PairCurve({0, 1, 1, 1, 1, 1, 1, 0}, 1.0), std::invalid_argument);
}

TEST(Curves, IndependentConstruction) {
    const std::vector<double> alpha{0.3, -0.7, 1.1};
    const double T = 1.5;
    const ParamCurves curves = curves_from_rates(independent_generator(alpha, T), T);
    for (double t : residual_grid(T)) {
        const auto s = curves.at(t);
        for (int u = 0; u < 3; ++u) {
            const AlphaPoint ref = independent_alpha_curve(alpha[static_cast<std::size_t>(u)], T, t);
            EXPECT_NEAR(s.alpha[static_cast<std::size_t>(u)].alpha, ref.alpha, 1e-12);
            for (int v = 0; v < 3; ++v) EXPECT_NEAR(s.beta_at(u, v), 0.0, 1e-8);
        }
    }
    for (int u = 0; u < 3; ++u) EXPECT_NEAR(curves.alpha(u, T).alpha, alpha[static_cast<std::size_t>(u)], 1e-12);
}

TEST(Curves, PairCoefficientsMatchExtractionForThreeVertices) {
    std::mt19937_64 rng(56);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const ParamCurves curves = curves_from_rates(g);
    const auto p = oracle::transient_law(g, 0.5);
    const auto c = oracle::mobius_direct(p);
    for (int u = 0; u < 3; ++u) {
        EXPECT_NEAR(curves.alpha(u, 0.5).alpha, c[singleton(u)], 1e-6);
        for (int v = u + 1; v < 3; ++v) EXPECT_NEAR(curves.beta(u, v, 0.5).beta, c[singleton(u) | singleton(v)], 1e-6);
    }
}

TEST(Curves, ZeroSingleRateNamesVertex) {
    const MonotoneGenerator g = MonotoneGenerator::from_function(3, [](Subset a, int v) {
        return (a == 0 && v == 2) ? 0.0 : 1.0;
    });
    try {
        curves_from_rates(g);
        FAIL() << "expected an exception";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("vertex 2"), std::string::npos);
    }
}

TEST(Curves, GraphRestrictedCurvesCarryZeroOffEdges) {
    std::mt19937_64 rng(57);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const Graph path(3, {{0, 1}, {1, 2}});
    const ParamCurves curves = curves_from_rates(g, path);
    EXPECT_EQ(curves.beta(0, 2, 0.4).beta, 0.0);
    EXPECT_NE(curves.beta(0, 1, 0.4).beta, 0.0);
}

TEST(Curves, PartitionFunctionFollowsEmptySetRate) {
    std::mt19937_64 rng(58);
    for (int trial = 0; trial < 5; ++trial) {
        const MonotoneGenerator g = oracle::random_generator(2, rng);
        const ParamCurves curves = curves_from_rates(g);
        for (double t : geometric_grid(0.01, 1.0, 8)) {
            EXPECT_NEAR(curves.log_partition_rate(t), g.r_empty(), 1e-6);
            EXPECT_NEAR(curves.log_partition(t), g.r_empty() * t, 1e-6);
        }
    }
}

TEST(MasterResidual, IndependentVanishes) {
    const MonotoneGenerator g = independent_generator(std::vector<double>{0.2, 0.9, -0.4, 0.0}, 1.0);
    const ParamCurves curves = curves_from_rates(g);
    for (double t : {0.1, 0.5, 0.9}) {
        for (double r : master_residual(g, curves, t)) EXPECT_NEAR(r, 0.0, 1e-7);
    }
}

TEST(MasterResidual, LowOrdersVanishForAnyGenerator) {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 4; ++trial) {
        const MonotoneGenerator g = oracle::random_generator(4, rng);
        const ParamCurves curves = curves_from_rates(g);
        for (double t : {0.01, 0.3, 1.0}) {
            const auto r = master_residual(g, curves, t);
            for (Subset b = 1; b < r.size(); ++b) {
                if (std::popcount(b) <= 2) {
                    EXPECT_NEAR(r[b], 0.0, 1e-6) << "B=" << b << " t=" << t;
                }
            }
        }
    }
}

TEST(MasterResidual, GenericThirdOrderIsPositive) {
    std::mt19937_64 rng(60);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const auto r = master_residual(g, curves_from_rates(g), 0.5);
    EXPECT_GT(std::abs(r[7]), 1e-3);
}

TEST(MasterResidual, CommutesWithRelabeling) {
    std::mt19937_64 rng(61);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const std::vector<int> perm{1, 2, 0};
    const MonotoneGenerator h = g.relabeled(perm);
    const ParamCurves cg = curves_from_rates(g);
    const ParamCurves ch = curves_from_rates(h);
    const auto rg = master_residual(g, cg, 0.4);
    const auto rh = master_residual(h, ch, 0.4);
    for (Subset a = 1; a < 8; ++a) EXPECT_NEAR(rh[permute_subset(a, perm)], rg[a], 1e-9);
    for (int u = 0; u < 3; ++u) {
        EXPECT_NEAR(ch.alpha(perm[static_cast<std::size_t>(u)], 0.4).alpha, cg.alpha(u, 0.4).alpha, 1e-12);
    }
    EXPECT_NEAR(ch.beta(perm[0], perm[1], 0.4).beta, cg.beta(0, 1, 0.4).beta, 1e-9);
}

TEST(Membership, IndependentGeneratorStaysInFamily) {
    const MonotoneGenerator g = independent_generator(std::vector<double>{0.1, 0.5, -0.3}, 1.0);
    EXPECT_LE(membership_over_time(g, residual_grid(1.0)).max_residual, 1e-9);
}

TEST(Membership, RateDependenceWithoutEdgeLeavesFamily) {
    const MonotoneGenerator g = MonotoneGenerator::from_entries(
        2, std::vector<MonotoneGenerator::Entry>{{0, 0, 1.0}, {0, 1, 1.0}, {1, 1, 3.0}, {2, 0, 1.0}});
    const MembershipReport rep = membership_over_time(g, residual_grid(1.0), Graph::edgeless(2));
    EXPECT_GT(rep.max_residual, 1e-2);
    EXPECT_EQ(rep.residuals.size(), 32u);
}

TEST(Membership, SingleVertexIsVacuous) {
    const MonotoneGenerator g(1, {2.5, 0.0});
    EXPECT_EQ(membership_over_time(g, residual_grid(1.0)).max_residual, 0.0);
}

TEST(Membership, GenericChainLeavesFamilyAtHalfHorizon) {
    std::mt19937_64 rng(62);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const auto p = forward_solve(g, std::vector<double>{0.5}).distributions[0];
    EXPECT_GT(family_membership_residual(p, Graph::complete(3)), 1e-3);
}
