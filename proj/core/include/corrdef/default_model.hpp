#pragma once

#include "corrdef/graph.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace corrdef {

/// Default cap on vertex count for operations that enumerate all 2^n subsets.
inline constexpr int kEnumerationCap = 20;

/// Parameters of the correlated-default distribution on a graph: one
/// log-odds value per vertex and one interaction per edge (indexed like
/// graph.edges()).
struct ModelParams {
    ModelParams(Graph graph, std::vector<double> alpha, std::vector<double> beta);

    /// beta_{uv} for an edge, 0 for a non-edge.
    double beta_between(int u, int v) const;
    int n_vertices() const noexcept { return graph.n_vertices(); }

    Graph graph;
    std::vector<double> alpha;
    std::vector<double> beta;
};

/// The same law written in +-1 spins: log p(sigma) = sum gamma_u sigma_u +
/// sum delta_e sigma_v sigma_w - log_norm.
struct IsingParams {
    IsingParams(Graph graph, std::vector<double> gamma, std::vector<double> delta, double log_norm);

    Graph graph;
    std::vector<double> gamma;
    std::vector<double> delta;
    double log_norm;
};

/// Exact probability vector over subsets, indexed by bitmask.
struct SubsetDist {
    SubsetDist(int n_vertices, std::vector<double> probs, double log_partition);

    double operator[](Subset a) const { return probs[a]; }
    double total() const;

    int n_vertices;
    std::vector<double> probs;
    /// log Z when built from parameters, NaN otherwise.
    double log_partition;
};

/// Log-linear coordinates c_A of a strictly positive distribution; coeffs[0]
/// is 0 and log(p(A)/p(empty)) = sum over nonempty B in A of coeffs[B].
struct InteractionCoeffs {
    double operator[](Subset a) const { return coeffs[a]; }

    int n_vertices;
    std::vector<double> coeffs;
};

double hamiltonian(const ModelParams& params, Subset a);

/// H(A) for every subset, in bitmask order.
std::vector<double> hamiltonian_table(const ModelParams& params, int cap = kEnumerationCap);

double log_partition(const ModelParams& params, int cap = kEnumerationCap);
double subset_probability(const ModelParams& params, Subset a, int cap = kEnumerationCap);
SubsetDist full_distribution(const ModelParams& params, int cap = kEnumerationCap);

IsingParams to_ising(const ModelParams& params);
ModelParams from_ising(const IsingParams& params);

/// log P(Y = sigma) where plus_sites is the set of vertices with spin +1.
double ising_log_probability(const IsingParams& params, Subset plus_sites);

/// Moebius inversion of log p. Throws std::domain_error if any cell is zero.
InteractionCoeffs extract_interactions(const SubsetDist& dist);

/// Largest |c_A| over coordinates the graph's family forces to zero: all
/// |A| >= 3 and every non-edge pair.
double family_membership_residual(const InteractionCoeffs& coeffs, const Graph& graph);
double family_membership_residual(const SubsetDist& dist, const Graph& graph);

/// Inverse-CDF draws from the enumerated law; deterministic in the seed.
std::vector<Subset> exact_sample(const ModelParams& params, std::size_t n_draws, std::uint64_t seed,
                                 int cap = kEnumerationCap);

struct Moments {
    std::vector<double> vertex;  // P{I_u = 1}
    std::vector<double> pair;    // P{I_v = 1, I_w = 1}, per edge
};

Moments moments(const SubsetDist& dist, const Graph& graph);

struct FitOptions {
    double tolerance = 1e-8;
    double damping = 0.5;
    int max_iter = 10'000;
    int cap = kEnumerationCap;
};

/// Finds (alpha, beta) whose vertex and edge moments match the targets, by
/// damped coordinate updates on the exact law. Throws InfeasibleTargets when
/// a target lies outside its Frechet bounds and ConvergenceFailure when
/// max_iter sweeps do not reach the tolerance.
ModelParams fit_moments(const Graph& graph, std::span<const double> vertex_targets,
                        std::span<const double> pair_targets, const FitOptions& options = {});

}  // namespace corrdef
