// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"
#include "corrdef/reduced_models.hpp"
#include "oracles.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace corrdef;

namespace tol {
constexpr double kSumToOne = 1e-12;
constexpr double kMoebius = 1e-10;
constexpr double kIsingPmf = 1e-12;
constexpr double kProductLaw = 1e-9;
constexpr double kAlphaFormula = 1e-12;
constexpr double kMembership = 1e-9;
constexpr double kEmptySet = 1e-9;
constexpr double kAlphaOde = 1e-8;
constexpr double kTwoVertex = 1e-6;
constexpr double kLumping = 1e-8;
constexpr double kZeroFloor = 1e-6;
constexpr double kRateRecovery = 1e-4;
}  // namespace tol

// Residual floors observed on the first recorded run, halved. A later run
// whose floor drops below these either found a consistent chain where none
// should exist or changed the residual definitions.
namespace baseline {
constexpr double kModelI_025 = 0.191;
constexpr double kModelI_050 = 1.09;
constexpr double kModelII_025 = 0.0775;
constexpr double kModelII_050 = 0.378;
constexpr double kModelIII_005 = 0.00497;
constexpr double kModelIII_010 = 0.0208;
}  // namespace baseline

namespace {

struct Outcome {
    bool ok;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < time_limit_s;
    const bool pass = out.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.2f s of %.0f s%s\n", pass ? "PASS" : "FAIL", id, name, out.detail.c_str(),
                secs, time_limit_s, in_time ? "" : " (too slow)");
    std::fflush(stdout);
}

Outcome exact_model_suite() {
    std::mt19937_64 rng(20240601);
    double sum_err = 0.0, moebius_err = 0.0, ising_err = 0.0;
    for (int i = 0; i < 200; ++i) {
        const int n = 1 + i % 10;
        const ModelParams p = oracle::random_params(n, rng, 0.5, 1.5);
        const SubsetDist d = full_distribution(p);
        sum_err = std::max(sum_err, std::abs(d.total() - 1.0));
        const InteractionCoeffs c = extract_interactions(d);
        for (Subset a = 1; a < c.coeffs.size(); ++a) {
            double expect = 0.0;
            if (std::popcount(a) == 1) expect = p.alpha[static_cast<std::size_t>(std::countr_zero(a))];
            if (std::popcount(a) == 2) expect = p.beta_between(std::countr_zero(a), 31 - std::countl_zero(a));
            moebius_err = std::max(moebius_err, std::abs(c[a] - expect));
        }
        const IsingParams is = to_ising(p);
        for (Subset a = 0; a < d.probs.size(); ++a) {
            ising_err = std::max(ising_err, std::abs(std::exp(ising_log_probability(is, a)) - d[a]));
        }
    }
    return {sum_err <= tol::kSumToOne && moebius_err <= tol::kMoebius && ising_err <= tol::kIsingPmf,
            "sum err " + fmt(sum_err) + ", Moebius err " + fmt(moebius_err) + ", Ising pmf err " + fmt(ising_err)};
}

Outcome independent_construction() {
    const std::vector<double> alpha{0.3, -0.7, 1.1};
    const double T = 1.0;
    const MonotoneGenerator g = independent_generator(alpha, T);
    const auto grid = residual_grid(T);
    const Trajectory tr = forward_solve(g, grid);
    const SubsetDist target = full_distribution(ModelParams(Graph::complete(3), alpha, {0, 0, 0}));
    double law_err = 0.0;
    for (Subset a = 0; a < 8; ++a) law_err = std::max(law_err, std::abs(tr.distributions.back()[a] - target[a]));
    const ParamCurves curves = curves_from_rates(g, T);
    double alpha_err = 0.0;
    double membership = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        for (int v = 0; v < 3; ++v) {
            const double a = alpha[static_cast<std::size_t>(v)];
            const double formula = std::log(std::pow(1.0 + std::exp(a), t / T) - 1.0);
            alpha_err = std::max(alpha_err, std::abs(curves.alpha(v, t).alpha - formula));
        }
        membership = std::max(membership, family_membership_residual(tr.distributions[i], Graph::complete(3)));
    }
    return {law_err <= tol::kProductLaw && alpha_err <= tol::kAlphaFormula && membership <= tol::kMembership,
            "terminal law err " + fmt(law_err) + ", alpha err " + fmt(alpha_err) + ", membership " + fmt(membership)};
}

Outcome empty_set_invariant() {
    std::mt19937_64 rng(555);
    double worst = 0.0;
    const auto grid = residual_grid(1.0);
    for (int i = 0; i < 50; ++i) {
        const MonotoneGenerator g = oracle::random_generator(1 + i % 6, rng, 0.05, 3.0);
        const Trajectory tr = forward_solve(g, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            worst = std::max(worst, std::abs(tr.distributions[k][0] - std::exp(-g.r_empty() * grid[k])));
        }
    }
    return {worst <= tol::kEmptySet, "max |p_t(empty) - exp(-R t)| " + fmt(worst)};
}

Outcome alpha_closed_form() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    const auto grid = geometric_grid(1e-3, 1.0, 24);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double q = u(rng);
        const double re = u(rng);
        double ru = u(rng);
        if (i % 4 == 0) ru = re;
        if (i % 4 == 1) ru = re - 1e-7;
        for (double t : grid) {
            worst = std::max(worst, std::abs(alpha_curve(q, re, ru, t).alpha - oracle::alpha_by_linear_ode(q, re, ru, t, 4000)));
        }
    }
    return {worst <= tol::kAlphaOde, "max |closed form - ODE| " + fmt(worst)};
}

Outcome two_vertex_completeness() {
    std::mt19937_64 rng(2);
    const auto grid = residual_grid(1.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const MonotoneGenerator g = oracle::random_generator(2, rng, 0.1, 3.0);
        const ParamCurves curves = curves_from_rates(g);
        for (double t : grid) {
            const auto p = oracle::transient_law(g, t);
            const auto c = oracle::mobius_direct(p);
            worst = std::max({worst, std::abs(curves.alpha(0, t).alpha - c[1]), std::abs(curves.alpha(1, t).alpha - c[2]),
                              std::abs(curves.beta(0, 1, t).beta - c[3])});
        }
    }
    return {worst <= tol::kTwoVertex, "max |curves - extraction| " + fmt(worst)};
}

Outcome lumpability() {
    const std::vector<double> per_vertex{0.6, 1.1, 0.4, 0.9, 1.7};
    const MonotoneGenerator g = oracle::symmetric_by_size(5, per_vertex);
    const LumpedRatesI l = lump_complete(g);
    const auto grid = residual_grid(1.0);
    const Trajectory full = forward_solve(g, grid);
    const auto lumped = occupancy_law(l, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::vector<double> by_size(6, 0.0);
        for (Subset a = 0; a < 32; ++a) by_size[static_cast<std::size_t>(std::popcount(a))] += full.distributions[i][a];
        for (std::size_t k = 0; k < 6; ++k) worst = std::max(worst, std::abs(lumped[i][k] - by_size[k]));
    }
    return {worst <= tol::kLumping, "max |full - lumped| " + fmt(worst)};
}

SearchConfig search_config(int restarts, std::uint64_t seed) {
    SearchConfig cfg;
    cfg.restarts = restarts;
    cfg.seed = seed;
    return cfg;
}

double rate_distance(const std::variant<LumpedRatesI, LumpedRatesBi>& a, const std::variant<LumpedRatesI, LumpedRatesBi>& b) {
    double worst = 0.0;
    if (const auto* x = std::get_if<LumpedRatesI>(&a)) {
        const auto& y = std::get<LumpedRatesI>(b);
        for (std::size_t k = 0; k < x->lambda.size(); ++k) worst = std::max(worst, std::abs(x->lambda[k] - y.lambda[k]));
        return worst;
    }
    const auto& x = std::get<LumpedRatesBi>(a);
    const auto& y = std::get<LumpedRatesBi>(b);
    for (std::size_t k = 0; k < x.hat.values().size(); ++k) {
        worst = std::max({worst, std::abs(x.hat.values()[k] - y.hat.values()[k]),
                          std::abs(x.check.values()[k] - y.check.values()[k])});
    }
    return worst;
}

struct Sweep {
    double beta;
    int restarts;
    double baseline;
};

Outcome non_existence(const ModelSpec& spec, SearchTargets targets, int zero_restarts, bool check_rates,
                      const std::vector<Sweep>& sweeps, std::uint64_t seed) {
    bool ok = true;
    std::string detail;
    targets.beta = 0.0;
    const SearchResult zero = feasibility_search(spec, targets, search_config(zero_restarts, seed));
    ok = ok && zero.residual_floor < tol::kZeroFloor;
    detail += "beta 0: floor " + fmt(zero.residual_floor);
    if (check_rates) {
        const double dist = rate_distance(zero.best_rates, independent_lumped_rates(spec, targets, 1.0));
        ok = ok && dist <= tol::kRateRecovery;
        detail += ", rate err " + fmt(dist);
    }
    for (const Sweep& s : sweeps) {
        targets.beta = s.beta;
        const SearchResult r = feasibility_search(spec, targets, search_config(s.restarts, seed));
        const bool pass = std::isfinite(r.residual_floor) && r.residual_floor > s.baseline && r.residual_floor > 0.0;
        ok = ok && pass;
        char buf[160];
        std::snprintf(buf, sizeof buf, "; beta %g: floor %.6g over %d restarts (baseline %.3g)", s.beta, r.residual_floor,
                      s.restarts, s.baseline);
        detail += buf;
    }
    return {ok, detail};
}

Outcome coefficient_systems() {
    bool ok = true;
    std::string detail;
    const ModelSpec spec{ReducedModel::I, 0, 4};
    SearchTargets targets;
    targets.alpha = 0.3;
    const auto indep = std::get<LumpedRatesI>(independent_lumped_rates(spec, targets, 1.0));
    double zero_mismatch = 0.0;
    for (const CoeffRowI& row : coeff_check_I(indep, 0.0)) zero_mismatch = std::max(zero_mismatch, std::abs(row.mismatch));
    double half_mismatch = 0.0;
    for (const CoeffRowI& row : coeff_check_I(indep, 0.5)) half_mismatch = std::max(half_mismatch, std::abs(row.mismatch));
    // any positive table must fail at beta* = 0.5
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    double weakest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 200; ++i) {
        const LumpedRatesI l(4, {u(rng), u(rng), u(rng), u(rng), 0.0});
        double m = 0.0;
        for (const CoeffRowI& row : coeff_check_I(l, 0.5)) m = std::max(m, std::abs(row.mismatch));
        weakest = std::min(weakest, m);
    }
    ok = ok && zero_mismatch == 0.0 && half_mismatch > 0.0 && weakest > 0.0;
    detail += "Model I: independent mismatch " + fmt(zero_mismatch) + " at beta* 0, " + fmt(half_mismatch) +
              " at 0.5, min over random tables " + fmt(weakest);
    const CoeffReportIII rep = coeff_check_III(forced_table_III(4, 3, 0.3, 1.0, 1.0), 0.3);
    ok = ok && rep.inconsistent;
    detail += "; Model III: demands " + std::to_string(rep.demanded_points) + " points, bound " +
              std::to_string(rep.intersection_bound) + (rep.inconsistent ? ", flagged" : ", not flagged");
    return {ok, detail};
}

}  // namespace

int main() {
    criterion(1, "exact-model suite", 10, exact_model_suite);
    criterion(2, "independent construction", 5, independent_construction);
    criterion(3, "empty-set invariant", 30, empty_set_invariant);
    criterion(4, "alpha closed form vs ODE", 10, alpha_closed_form);
    criterion(5, "two-vertex completeness", 20, two_vertex_completeness);
    criterion(6, "lumpability", 5, lumpability);
    criterion(7, "Model I non-existence", 180, [] {
        SearchTargets t;
        t.alpha = 0.3;
        return non_existence({ReducedModel::I, 0, 4}, t, 8, true,
                             {{0.25, 64, baseline::kModelI_025}, {0.5, 64, baseline::kModelI_050}}, 1);
    });
    criterion(8, "Model II non-existence", 180, [] {
        SearchTargets t;
        t.alpha = 0.3;
        Outcome out = non_existence({ReducedModel::II, 3, 3}, t, 8, true,
                                    {{0.25, 64, baseline::kModelII_025}, {0.5, 64, baseline::kModelII_050}}, 2);
        double worst = 0.0;
        for (double b : {-0.5, -0.1, 0.0, 0.05, 0.25, 0.5, 1.0}) {
            const double expect = 2.0 * std::exp(b) - 2.0;
            const double got = coeff_check_II(3, 3, b);
            worst = std::max(worst, std::abs(got - expect));
            if ((got == 0.0) != (b == 0.0)) out.ok = false;
        }
        out.ok = out.ok && worst <= 4.0 * std::numeric_limits<double>::epsilon();
        out.detail += "; coeff_check_II err " + fmt(worst);
        return out;
    });
    criterion(9, "Model III non-existence", 240, [] {
        SearchTargets t;
        t.alpha_hat = 0.5;
        t.alpha_check = -0.5;
        return non_existence({ReducedModel::III, 4, 3}, t, 8, false,
                             {{0.05, 32, baseline::kModelIII_005}, {0.1, 32, baseline::kModelIII_010}}, 3);
    });
    criterion(10, "coefficient systems", 1, coefficient_systems);
    return failures == 0 ? 0 : 1;
}
