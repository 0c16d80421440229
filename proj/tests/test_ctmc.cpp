#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"
#include "corrdef/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace corrdef;

TEST(Generator, ValidatesRates) {
    std::vector<double> rates(4 * 2, 0.0);
    rates[0 * 2 + 0] = 1.0;
    EXPECT_NO_THROW(MonotoneGenerator(2, rates));
    rates[1 * 2 + 0] = 0.5;  // vertex 0 already in {0}
    EXPECT_THROW(MonotoneGenerator(2, rates), std::invalid_argument);
    rates[1 * 2 + 0] = 0.0;
    rates[0 * 2 + 1] = -1.0;
    EXPECT_THROW(MonotoneGenerator(2, rates), std::invalid_argument);
}

TEST(Generator, DerivedRates) {
    const MonotoneGenerator g = MonotoneGenerator::from_entries(
        2, std::vector<MonotoneGenerator::Entry>{{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 3.0}, {2, 0, 4.0}});
    EXPECT_EQ(g.r_empty(), 3.0);
    EXPECT_EQ(g.q_single(1), 2.0);
    EXPECT_EQ(g.q_pair(0, 1), 3.0);
    EXPECT_EQ(g.r_single(1), 4.0);
    EXPECT_EQ(g.r_pair(0, 1), 0.0);
    EXPECT_EQ(g.exit_rate(full_set(2)), 0.0);
    EXPECT_THROW(MonotoneGenerator::from_entries(2, std::vector<MonotoneGenerator::Entry>{{0, 0, 1.0}, {0, 0, 1.0}}),
                 std::invalid_argument);
}

TEST(Forward, SingleVertex) {
    const double lambda = 1.7;
    const MonotoneGenerator g(1, {lambda, 0.0});
    const std::vector<double> grid{0.0, 0.1, 0.5, 2.0};
    const Trajectory tr = forward_solve(g, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(tr.distributions[i][1], -std::expm1(-lambda * grid[i]), 1e-10);
    }
}

TEST(Forward, EmptySetDecay) {
    std::mt19937_64 rng(1);
    for (int n = 1; n <= 6; ++n) {
        const MonotoneGenerator g = oracle::random_generator(n, rng);
        const auto grid = residual_grid(1.0);
        const Trajectory tr = forward_solve(g, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            EXPECT_NEAR(tr.distributions[i][0], std::exp(-g.r_empty() * grid[i]), 1e-9);
        }
    }
}

TEST(Forward, MatchesUniformization) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const MonotoneGenerator g = oracle::random_generator(3, rng);
        const auto ref = oracle::transient_law(g, 0.7);
        const Trajectory tr = forward_solve(g, std::vector<double>{0.7});
        for (std::size_t a = 0; a < ref.size(); ++a) EXPECT_NEAR(tr.distributions[0].probs[a], ref[a], 1e-8);
    }
}

TEST(Forward, ConservesMassAndGrowsSupport) {
    std::mt19937_64 rng(4);
    // Sparse generator so some cells stay empty for a while.
    std::bernoulli_distribution keep(0.5);
    const MonotoneGenerator g =
        MonotoneGenerator::from_function(5, [&](Subset a, int v) { return (a == 0 || keep(rng)) ? 0.3 + v * 0.2 : 0.0; });
    const auto grid = geometric_grid(1e-3, 3.0, 40);
    const Trajectory tr = forward_solve(g, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LT(tr.mass_drift[i], 1e-10);
        EXPECT_FALSE(tr.renormalized[i]);
        if (i == 0) continue;
        for (std::size_t a = 0; a < 32; ++a) {
            if (tr.distributions[i - 1].probs[a] > 0.0) {
                EXPECT_GT(tr.distributions[i].probs[a], 0.0);
            }
        }
    }
}

TEST(Forward, CapIsEnforced) {
    const MonotoneGenerator g = independent_generator(std::vector<double>(15, 0.0), 1.0);
    EXPECT_THROW(forward_solve(g, std::vector<double>{1.0}), CapacityExceeded);
}

TEST(Forward, RejectsDecreasingGrid) {
    const MonotoneGenerator g(1, {1.0, 0.0});
    EXPECT_THROW(forward_solve(g, std::vector<double>{0.5, 0.2}), std::invalid_argument);
}

TEST(Independent, RateExamples) {
    EXPECT_NEAR(independent_generator(std::vector<double>{0.0}, 1.0).q_single(0), std::numbers::ln2, 1e-15);
    EXPECT_NEAR(independent_generator(std::vector<double>{std::log(std::numbers::e - 1.0)}, 1.0).q_single(0), 1.0,
                1e-15);
    const MonotoneGenerator g = independent_generator(std::vector<double>{0.5, 1.0, -1.0}, 2.0);
    for (Subset a = 0; a < 8; ++a) {
        for (int v = 0; v < 3; ++v) {
            if (!contains(a, v)) {
                EXPECT_EQ(g.rate(a, v), g.q_single(v));
            }
        }
    }
}

TEST(Independent, ReproducesProductLaw) {
    const std::vector<double> alpha{0.3, -0.7};
    const double T = 2.0;
    const Trajectory tr = forward_solve(independent_generator(alpha, T), std::vector<double>{T});
    const SubsetDist target = full_distribution(ModelParams(Graph::complete(2), alpha, {0.0}));
    for (Subset a = 0; a < 4; ++a) EXPECT_NEAR(tr.distributions[0][a], target[a], 1e-9);
}

void expect_independent_family(const std::vector<double>& alpha, const ForwardOptions& opts) {
    const int n = static_cast<int>(alpha.size());
    const Trajectory tr = forward_solve(independent_generator(alpha, 1.0), residual_grid(1.0), opts);
    for (const SubsetDist& d : tr.distributions) {
        const InteractionCoeffs c = extract_interactions(d);
        EXPECT_LE(family_membership_residual(c, Graph::complete(n)), 1e-9);
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) EXPECT_LE(std::abs(c[singleton(u) | singleton(v)]), 1e-9);
        }
    }
}

TEST(Independent, StaysInFamily) { expect_independent_family({0.3, -0.7, 1.1}, {}); }

// The full cell at t = 1e-3 is ~1e-13, below the default atol, so the
// top-order coefficient needs a tighter absolute tolerance at N = 4.
TEST(Independent, StaysInFamilyFourVerticesTightAtol) {
    ForwardOptions opts;
    opts.atol = 1e-18;
    expect_independent_family({0.3, -0.7, 1.1, 0.0}, opts);
}

TEST(IndependentAlpha, Examples) {
    EXPECT_DOUBLE_EQ(independent_alpha_curve(0.8, 1.5, 1.5).alpha, 0.8);
    EXPECT_NEAR(independent_alpha_curve(std::log(3.0), 1.0, 0.5).alpha, 0.0, 1e-15);
    double prev = std::numeric_limits<double>::infinity();
    for (double t = 1.0; t > 1e-12; t /= 3.0) {
        const AlphaPoint p = independent_alpha_curve(0.2, 1.0, t);
        EXPECT_LT(p.exp_alpha, prev);
        EXPECT_GT(p.exp_alpha, 0.0);
        prev = p.exp_alpha;
    }
    EXPECT_LT(prev, 1e-10);
    EXPECT_THROW(independent_alpha_curve(0.2, 1.0, 0.0), std::invalid_argument);
}

TEST(Paths, MonotoneWithDistinctVertices) {
    std::mt19937_64 rng(6);
    const MonotoneGenerator g = oracle::random_generator(4, rng);
    const PathEnsemble ens = sample_paths(g, 1.5, 2000, 3);
    ASSERT_EQ(ens.paths.size(), 2000u);
    for (const PathSample& p : ens.paths) {
        std::set<int> seen;
        Subset cur = 0;
        for (std::size_t i = 0; i < p.jump_times.size(); ++i) {
            if (i > 0) {
                EXPECT_GT(p.jump_times[i], p.jump_times[i - 1]);
            }
            EXPECT_GE(p.jump_times[i], 0.0);
            EXPECT_LE(p.jump_times[i], 1.5);
            EXPECT_TRUE(seen.insert(p.jump_vertices[i]).second);
            cur |= singleton(p.jump_vertices[i]);
        }
        EXPECT_EQ(cur, p.terminal);
    }
}

TEST(Paths, IndependentTerminalLaw) {
    const PathEnsemble ens = sample_paths(independent_generator(std::vector<double>{0.0, 0.0}, 1.0), 1.0, 100000, 21);
    const double sigma = std::sqrt(0.25 * 0.75 / 1e5);
    for (Subset a = 0; a < 4; ++a) EXPECT_NEAR(ens.terminal_distribution[a], 0.25, 3.0 * sigma);
}

TEST(Paths, AbsorbingStart) {
    const MonotoneGenerator g = MonotoneGenerator::from_function(3, [](Subset a, int) { return a == 0 ? 0.0 : 1.0; });
    const PathEnsemble ens = sample_paths(g, 1.0, 500, 1);
    for (const PathSample& p : ens.paths) {
        EXPECT_TRUE(p.jump_times.empty());
        EXPECT_EQ(p.terminal, 0u);
    }
    EXPECT_EQ(ens.terminal_distribution[0], 1.0);
}

TEST(Paths, WorkerCountDoesNotMatter) {
    std::mt19937_64 rng(12);
    const MonotoneGenerator g = oracle::random_generator(3, rng);
    const PathEnsemble a = sample_paths(g, 1.0, 5000, 77, 1);
    const PathEnsemble b = sample_paths(g, 1.0, 5000, 77, 3);
    ASSERT_EQ(a.paths.size(), b.paths.size());
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        EXPECT_EQ(a.paths[i].jump_times, b.paths[i].jump_times);
        EXPECT_EQ(a.paths[i].jump_vertices, b.paths[i].jump_vertices);
    }
    EXPECT_EQ(a.terminal_distribution, b.terminal_distribution);
}

TEST(Paths, EmpiricalLawApproachesForwardLaw) {
    std::mt19937_64 rng(13);
    for (int n = 2; n <= 4; ++n) {
        const MonotoneGenerator g = oracle::random_generator(n, rng);
        const PathEnsemble ens = sample_paths(g, 1.0, 100000, 5);
        const Trajectory tr = forward_solve(g, std::vector<double>{1.0});
        double tv = 0.0;
        for (std::size_t a = 0; a < ens.terminal_distribution.size(); ++a) {
            tv += std::abs(ens.terminal_distribution[a] - tr.distributions[0].probs[a]);
        }
        EXPECT_LT(0.5 * tv, 4.0 * std::sqrt(std::ldexp(1.0, n) / 1e5));
    }
}

TEST(Relabel, ForwardLawCommutesWithPermutation) {
    std::mt19937_64 rng(14);
    const MonotoneGenerator g = oracle::random_generator(4, rng);
    const std::vector<int> perm{2, 0, 3, 1};
    const auto p = forward_solve(g, std::vector<double>{0.6}).distributions[0].probs;
    const auto q = forward_solve(g.relabeled(perm), std::vector<double>{0.6}).distributions[0].probs;
    for (Subset a = 0; a < 16; ++a) EXPECT_NEAR(q[permute_subset(a, perm)], p[a], 1e-12);
}
