#pragma once

#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/graph.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace corrdef {

// ---------------------------------------------------------------------------
// Lumped rate tables

/// Average exit rates lambda_l over subsets of size l on K_N.
struct LumpedRatesI {
    /// lambda must have N + 1 entries, be finite and nonnegative, and end in 0.
    LumpedRatesI(int N, std::vector<double> lambda);

    /// lambda_l with lambda_{-1} = 0.
    double operator[](int l) const { return l < 0 ? 0.0 : lambda.at(static_cast<std::size_t>(l)); }
    /// True when lambda_l > 0 for every l < N.
    bool strictly_positive() const;

    int N;
    std::vector<double> lambda;
};

/// (M + 1) x (N + 1) table indexed by occupancy (m, n); negative indices read as 0.
class OccupancyTable {
public:
    OccupancyTable(int M, int N, double fill = 0.0);

    double operator()(int m, int n) const;
    double& at(int m, int n);

    int M() const noexcept { return M_; }
    int N() const noexcept { return N_; }
    std::span<const double> values() const& noexcept { return data_; }
    std::span<const double> values() const&& = delete;

private:
    int M_;
    int N_;
    std::vector<double> data_;
};

/// Occupancy-averaged rates on K_{M,N}: hat(m, n) is the mean total rate at
/// which a hat vertex defaults from a state with m hat and n check defaults,
/// check(m, n) the same for check vertices.
struct LumpedRatesBi {
    /// Requires hat(M, n) = 0 and check(m, N) = 0, all entries finite and >= 0.
    LumpedRatesBi(OccupancyTable hat, OccupancyTable check);

    int M() const noexcept { return hat.M(); }
    int N() const noexcept { return hat.N(); }
    double r() const { return hat(0, 0) + check(0, 0); }
    double total(int m, int n) const { return hat(m, n) + check(m, n); }
    bool strictly_positive() const;

    OccupancyTable hat;
    OccupancyTable check;
};

LumpedRatesI lump_complete(const MonotoneGenerator& gen);
/// Hat class taken from the bipartition.
LumpedRatesBi lump_bipartite(const MonotoneGenerator& gen, const Bipartition& parts);
/// Dispatches on the graph: complete graph -> Model I lumping, complete
/// bipartite graph with bipartition -> bipartite lumping.
std::variant<LumpedRatesI, LumpedRatesBi> lump_generator(const MonotoneGenerator& gen, const Graph& symmetry);

/// Fully vertex-symmetric chain whose lumping is `lumped`: q(A, v) = lambda_{|A|} / (N - |A|).
MonotoneGenerator symmetric_generator(const LumpedRatesI& lumped);
/// Occupancy-symmetric chain on K_{M,N} (hat = 0..M-1) whose lumping is `lumped`.
MonotoneGenerator symmetric_generator(const LumpedRatesBi& lumped);

/// Law of |X_t| for the birth chain with rates lambda_l, one vector of
/// length N + 1 per grid time.
std::vector<std::vector<double>> occupancy_law(const LumpedRatesI& lumped, std::span<const double> t_grid,
                                               const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Model I: complete graph, common alpha and beta

struct ReducedPointI {
    double t;
    double alpha;
    double alpha_prime;
    double exp_alpha;
    double beta;
    double beta_prime;
};

/// alpha(t) in closed form from the k = 1 lumped equation, beta(t) by
/// integrating the k = 2 equation from beta(0+) = log(lambda_1 N / ((N - 1) lambda_0)).
class ModelICurves {
public:
    ModelICurves(double lambda0, double lambda1, double lambda2, int N, double horizon,
                 const CurveOptions& options = {});

    ReducedPointI at(double t) const;
    std::vector<ReducedPointI> on_grid(std::span<const double> times) const;

    double beta_initial() const noexcept { return pair_.initial_value(); }
    double lambda(int l) const { return lambda_.at(static_cast<std::size_t>(l)); }
    int N() const noexcept { return N_; }

private:
    ReducedPointI point(double t, const PairCurve::Value& b) const;

    std::vector<double> lambda_;
    int N_;
    PairCurve pair_;
};

std::vector<ReducedPointI> reduced_curves_I(double lambda0, double lambda1, double lambda2, int N,
                                            std::span<const double> t_grid, double horizon,
                                            const CurveOptions& options = {});

/// Residuals of the averaged consistency equation for k = 1..N (entry k - 1).
std::vector<double> residual_I(const LumpedRatesI& lumped, const ReducedPointI& point);
/// Checks the curves were built from lumped's lambda_0..lambda_2.
std::vector<double> residual_I(const LumpedRatesI& lumped, const ModelICurves& curves, double t);

struct CoeffRowI {
    int k;
    double actual;       // lambda_k from the table
    double linear;       // k (lambda_1 - lambda_0) + lambda_0
    double exponential;  // (N - k) / N lambda_0 e^{k beta*}
    double mismatch;     // linear - exponential
};

/// The two closed forms lambda_k must satisfy once beta is constant, for k = 0..N.
std::vector<CoeffRowI> coeff_check_I(const LumpedRatesI& lumped, double beta_star);

// ---------------------------------------------------------------------------
// Model II: K_{M,N}, common alpha, common beta

struct ReducedPointII {
    double t;
    double alpha;
    double alpha_prime;
    double exp_alpha;
    double beta;
    double beta_prime;
};

/// alpha(t) from the (1,0) equation, beta(t) from the (1,1) equation.
class ModelIICurves {
public:
    ModelIICurves(const LumpedRatesBi& lumped, double horizon, const CurveOptions& options = {});

    ReducedPointII at(double t) const;
    std::vector<ReducedPointII> on_grid(std::span<const double> times) const;

    double beta_initial() const noexcept { return pair_.initial_value(); }
    const LumpedRatesBi& lumped() const noexcept { return lumped_; }
    /// hat(0,0)/M - check(0,0)/N; zero when the (1,0) and (0,1) equations share
    /// their e^{-alpha} coefficient.
    double identity_violation() const noexcept { return identity_violation_; }

private:
    ReducedPointII point(double t, const PairCurve::Value& b) const;

    LumpedRatesBi lumped_;
    double identity_violation_;
    PairCurve pair_;
};

std::vector<ReducedPointII> reduced_curves_II(const LumpedRatesBi& lumped, std::span<const double> t_grid,
                                              double horizon, const CurveOptions& options = {});

/// Residual table of the bipartite averaged equation; entry (0,0) is 0.
OccupancyTable residual_II(const LumpedRatesBi& lumped, const ReducedPointII& point);
OccupancyTable residual_II(const LumpedRatesBi& lumped, const ModelIICurves& curves, double t);

/// 2 e^{beta*} - 2: the gap between the two values of check(1,0) forced by
/// the coefficient system at (m,n) = (1,1) and (2,0), in units of N/M hat(0,0).
double coeff_check_II(int M, int N, double beta_star);

struct CoeffDetailII {
    int M;
    int N;
    double hat00;               // normalisation, 1
    double check10_from_11;     // (N/M) hat00 (2 e^{beta*} - 1)
    double check10_from_20;     // (N/M) hat00
    double scalar;              // (from_11 - from_20) / ((N/M) hat00)
    bool swapped_classes;       // M < 2: the roles of the classes were exchanged
};
CoeffDetailII coeff_check_II_details(int M, int N, double beta_star);

/// Least-squares solution of the full forced linear system for the
/// bipartite tables at fixed beta*, with hat(0,0) fixed, and the largest
/// violation over every equation of the system.
struct ForcedSolveII {
    OccupancyTable hat;
    OccupancyTable check;
    double max_equation_residual;
};
ForcedSolveII solve_forced_system_II(int M, int N, double beta_star, double hat00 = 1.0);
/// Largest violation of the forced system by given tables.
double forced_system_residual_II(const OccupancyTable& hat, const OccupancyTable& check, double beta_star);

// ---------------------------------------------------------------------------
// Model III: K_{M,N}, class-specific alpha, common beta

struct ReducedPointIII {
    double t;
    double alpha_hat;
    double alpha_hat_prime;
    double exp_alpha_hat;
    double alpha_check;
    double alpha_check_prime;
    double exp_alpha_check;
    double beta;
    double beta_prime;
};

class ModelIIICurves {
public:
    ModelIIICurves(const LumpedRatesBi& lumped, double horizon, const CurveOptions& options = {});

    ReducedPointIII at(double t) const;
    std::vector<ReducedPointIII> on_grid(std::span<const double> times) const;

    double beta_initial() const noexcept { return pair_.initial_value(); }
    const LumpedRatesBi& lumped() const noexcept { return lumped_; }

private:
    ReducedPointIII point(double t, const PairCurve::Value& b) const;

    LumpedRatesBi lumped_;
    PairCurve pair_;
};

std::vector<ReducedPointIII> reduced_curves_III(const LumpedRatesBi& lumped, std::span<const double> t_grid,
                                                double horizon, const CurveOptions& options = {});

OccupancyTable residual_III(const LumpedRatesBi& lumped, const ReducedPointIII& point);
OccupancyTable residual_III(const LumpedRatesBi& lumped, const ModelIIICurves& curves, double t);

/// Tables satisfying the two exponential coefficient conditions exactly:
/// hat(m,n) = (M-m)/M hat00 e^{n beta*}, check(m,n) = (N-n)/N check00 e^{m beta*}.
LumpedRatesBi forced_table_III(int M, int N, double beta_star, double hat00, double check00);

struct CoeffReportIII {
    /// Per-(m,n) coefficients of the form a + b e^{-alpha_hat} + c e^{-alpha_check}.
    OccupancyTable a;
    OccupancyTable b;
    OccupancyTable c;
    double max_condition_violation;
    bool conditions_hold;

    /// Diagonal system A k e^{k beta*} + B e^{k beta*} + C k + D = 0, k = 0..min(M,N).
    double A;
    double B;
    double C;
    double D;
    std::vector<double> diagonal_residuals;
    int satisfied_points;
    int demanded_points;
    /// Most intersections a line can have with (A x + B) e^{beta* x} on
    /// [0, min(M,N)]: 2 without an inflection there, 3 with one; -1 if beta* = 0.
    int intersection_bound;
    bool inconsistent;
};

CoeffReportIII coeff_check_III(const LumpedRatesBi& lumped, double beta_star);

// ---------------------------------------------------------------------------
// Feasibility search

enum class ReducedModel { I, II, III };

struct ModelSpec {
    ReducedModel kind;
    int M = 0;  // hat class size (II, III)
    int N = 0;  // vertex count (I) or check class size (II, III)
};

/// Prescribed parameters at the horizon. Model I and II use alpha; Model III
/// uses alpha_hat and alpha_check.
struct SearchTargets {
    double alpha = 0.0;
    double alpha_hat = 0.0;
    double alpha_check = 0.0;
    double beta = 0.0;
};

struct SearchConfig {
    int restarts = 64;
    int max_iter = 1000;  // Nelder-Mead iterations per restart
    std::uint64_t seed = 0;
    double penalty_weight = 1e4;
    int grid_points = kGridPoints;
    double t_min_fraction = kTMinFraction;
    double horizon = 1.0;
    /// Levenberg-Marquardt iterations (in Jacobian evaluations) on the
    /// stacked residuals, run from each start before Nelder-Mead.
    int lm_iter = 300;
    /// Initial Nelder-Mead simplex edge in the unconstrained coordinates.
    double simplex_step = 0.1;
    /// Restarts whose terminal mismatch exceeds this do not count toward the floor.
    double target_tolerance = 1e-3;
    unsigned workers = 1;
    /// Record one trace row every this many Nelder-Mead iterations.
    int trace_every = 50;
    CurveOptions curve{};
};

struct TraceRow {
    int restart;
    int iteration;
    double objective;
    double terminal_mismatch;
    double residual;
};

struct RestartSummary {
    int restart;
    std::uint64_t seed;
    double objective;
    double residual;
    double terminal_mismatch;
};

struct SearchResult {
    ModelSpec model;
    SearchTargets targets;
    std::variant<LumpedRatesI, LumpedRatesBi> best_rates;
    double best_objective;
    double best_residual;
    /// Terminal mismatch of the best-objective restart.
    double terminal_mismatch;
    /// Min over target-hitting restarts of the max residual over the
    /// non-constructing equations and the grid; +inf if no restart hit the target.
    double residual_floor;
    int restarts_used;
    std::vector<RestartSummary> restarts;
    std::vector<TraceRow> trace;
};

/// Objective pieces for one rate table.
struct ObjectiveValue {
    double objective;
    double residual;
    double terminal_mismatch;
};

ObjectiveValue evaluate_rates(const ModelSpec& model, const SearchTargets& targets,
                              const std::variant<LumpedRatesI, LumpedRatesBi>& rates,
                              const SearchConfig& config);

/// Multi-start search over positive lumped rates minimising
///   max residual + penalty_weight * (terminal mismatch)^2.
/// Each restart runs Levenberg-Marquardt on the stacked residuals from a
/// seeded random start, then Nelder-Mead on the objective itself.
SearchResult feasibility_search(const ModelSpec& model, const SearchTargets& targets,
                                const SearchConfig& config = {});

/// Lumped rates of the independent construction that hits the targets.
std::variant<LumpedRatesI, LumpedRatesBi> independent_lumped_rates(const ModelSpec& model,
                                                                   const SearchTargets& targets,
                                                                   double horizon);

}  // namespace corrdef
