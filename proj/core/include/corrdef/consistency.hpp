#pragma once

#include "corrdef/ctmc.hpp"
#include "corrdef/graph.hpp"

#include <memory>
#include <span>
#include <vector>

namespace corrdef {

/// Fraction of the horizon where curve evaluation grids start.
inline constexpr double kTMinFraction = 1e-3;
inline constexpr int kGridPoints = 32;

/// `points` geometrically spaced times from t_min to t_max inclusive.
std::vector<double> geometric_grid(double t_min, double t_max, int points);

/// The standard residual grid: kGridPoints points on [1e-3 T, T].
std::vector<double> residual_grid(double horizon, int points = kGridPoints,
                                  double t_min_fraction = kTMinFraction);

struct AlphaValue {
    double alpha;
    double alpha_prime;
    double exp_alpha;
};

/// Closed-form solution of alpha' = Q_u e^{-alpha} + R_empty - R_u with
/// alpha -> -inf as t -> 0. Switches to the equal-rate branch
/// alpha = log(Q_u t) when |R_empty - R_u| < 1e-9 (|R_empty| + |R_u| + 1).
AlphaValue alpha_curve(double q_u, double r_empty, double r_u, double t);

struct CurveOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    /// Integration of the singular pair equations starts at this fraction
    /// of the horizon (well below the evaluation grid).
    double start_fraction = 1e-6;
    int checkpoints = 48;
};

/// Jump rates that determine the pair curve beta_uv.
struct PairRates {
    double q_u;   // Q(empty, {u})
    double q_v;   // Q(empty, {v})
    double q_uv;  // Q({u}, {u,v})
    double q_vu;  // Q({v}, {u,v})
    double r_empty;
    double r_u;
    double r_v;
    double r_uv;
};

/// Solution beta_uv(t) of the pair consistency equation
///   beta' = Q_vu e^{-alpha_u - beta} + Q_uv e^{-alpha_v - beta}
///           - alpha_u' - alpha_v' - R_uv + R_empty,
/// with the alpha terms in closed form. The only solution bounded at t = 0
/// starts from beta(0+) = log((Q_u Q_uv + Q_v Q_vu) / (2 Q_u Q_v)).
class PairCurve {
public:
    PairCurve(const PairRates& rates, double horizon, const CurveOptions& options = {});

    struct Value {
        double beta;
        double beta_prime;
    };

    Value at(double t) const;
    std::vector<Value> on_grid(std::span<const double> times) const;

    double initial_value() const noexcept { return initial_; }
    double start_time() const;
    const PairRates& rates() const noexcept { return rates_; }

    /// Right-hand side of the pair equation at (t, beta).
    double slope(double t, double beta) const;

private:
    struct Impl;
    PairRates rates_;
    double initial_;
    std::shared_ptr<const Impl> impl_;
};

std::vector<PairCurve::Value> beta_curve(const PairRates& rates, std::span<const double> t_grid,
                                         double horizon, const CurveOptions& options = {});

/// Time-indexed parameters alpha_u(t), beta_uv(t) derived from a chain's
/// low-order rates. beta is zero for pairs outside the carried graph.
class ParamCurves {
public:
    struct AlphaRates {
        double q_u;
        double r_empty;
        double r_u;
    };

    ParamCurves(Graph graph, std::vector<AlphaRates> alphas, std::vector<PairCurve> pair_curves,
                double horizon);

    int n_vertices() const noexcept { return graph_.n_vertices(); }
    const Graph& graph() const noexcept { return graph_; }
    double horizon() const noexcept { return horizon_; }

    AlphaValue alpha(int u, double t) const;
    PairCurve::Value beta(int u, int v, double t) const;

    /// All parameters and derivatives at one time; beta stored as a dense
    /// symmetric n x n table with zero diagonal.
    struct Snapshot {
        int n;
        std::vector<AlphaValue> alpha;
        std::vector<double> beta;
        std::vector<double> beta_prime;
        double beta_at(int u, int v) const { return beta[static_cast<std::size_t>(u * n + v)]; }
        double beta_prime_at(int u, int v) const { return beta_prime[static_cast<std::size_t>(u * n + v)]; }
    };
    Snapshot at(double t) const;

    double hamiltonian(Subset a, double t) const;
    double log_partition(double t) const;
    /// d/dt log Z_t = sum_A P_t(A) dH_t(A)/dt, evaluated exactly.
    double log_partition_rate(double t) const;

private:
    Graph graph_;
    std::vector<AlphaRates> alphas_;
    std::vector<PairCurve> pairs_;  // aligned with graph_.edges()
    double horizon_;
};

/// Curves for every vertex pair (complete graph).
ParamCurves curves_from_rates(const MonotoneGenerator& gen, double horizon = 1.0,
                              const CurveOptions& options = {});
/// Curves only for the graph's edges; other pairs carry beta = 0.
ParamCurves curves_from_rates(const MonotoneGenerator& gen, const Graph& graph, double horizon = 1.0,
                              const CurveOptions& options = {});

/// LHS - RHS of the master consistency equation for every subset B at time
/// t, indexed by bitmask (entry 0 is zero).
std::vector<double> master_residual(const MonotoneGenerator& gen, const ParamCurves& curves, double t);

/// Max over |B| >= 1 of |master_residual|.
double max_abs_residual(std::span<const double> residuals);

struct MembershipReport {
    double max_residual = 0.0;
    std::vector<double> times;
    std::vector<double> residuals;
};

/// Family membership residual of the exact transient law at every grid time.
MembershipReport membership_over_time(const MonotoneGenerator& gen, std::span<const double> t_grid,
                                      const Graph& graph, const ForwardOptions& options = {});
/// Same, measured against the complete graph.
MembershipReport membership_over_time(const MonotoneGenerator& gen, std::span<const double> t_grid,
                                      const ForwardOptions& options = {});

}  // namespace corrdef
