#pragma once

#include "corrdef/default_model.hpp"
#include "corrdef/graph.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace corrdef {

/// Default cap on vertex count for forward-equation work.
inline constexpr int kForwardCap = 14;

/// Rate table q(A, v) of a monotone chain on subsets: from A the only
/// possible jumps are to A + {v} for v not in A. Immutable once built.
class MonotoneGenerator {
public:
    /// rates[A * n + v] = q(A, v); entries with v in A must be zero.
    MonotoneGenerator(int n_vertices, std::vector<double> rates);

    static MonotoneGenerator from_function(int n_vertices,
                                           const std::function<double(Subset, int)>& rate);

    struct Entry {
        Subset subset;
        int vertex;
        double rate;
    };
    /// Unlisted (A, v) pairs get rate zero. Duplicate entries are rejected.
    static MonotoneGenerator from_entries(int n_vertices, std::span<const Entry> entries);

    int n_vertices() const noexcept { return n_; }
    double rate(Subset a, int v) const;
    /// R_A, the total exit rate of A.
    double exit_rate(Subset a) const { return exit_rates_[a]; }

    double r_empty() const { return exit_rates_[0]; }
    double q_single(int u) const { return rate(0, u); }                  // Q_u
    double q_pair(int u, int v) const { return rate(singleton(u), v); }  // Q_uv
    double r_single(int u) const { return exit_rate(singleton(u)); }
    double r_pair(int u, int v) const { return exit_rate(singleton(u) | singleton(v)); }

    /// Nonzero entries in (subset, vertex) order.
    std::vector<Entry> entries() const;

    MonotoneGenerator relabeled(std::span<const int> perm) const;

private:
    int n_;
    std::vector<double> rates_;
    std::vector<double> exit_rates_;
};

struct ForwardOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    /// Largest step; <= 0 means one hundredth of the last grid time.
    double max_step = 0.0;
    int cap = kForwardCap;
};

/// Transient laws p_t on a time grid, started from the empty set.
struct Trajectory {
    std::vector<double> times;
    std::vector<SubsetDist> distributions;
    /// True where the raw solution drifted more than 1e-10 from total mass 1
    /// and was rescaled.
    std::vector<bool> renormalized;
    /// |sum - 1| of the raw solution at each time.
    std::vector<double> mass_drift;
};

/// Solves the Kolmogorov forward equations of the chain from p_0 = delta_empty.
Trajectory forward_solve(const MonotoneGenerator& gen, std::span<const double> t_grid,
                         const ForwardOptions& options = {});

/// One sample path on [0, T]: nested jumps, each adding a single vertex.
struct PathSample {
    std::vector<double> jump_times;
    std::vector<int> jump_vertices;
    Subset terminal = 0;
};

struct PathEnsemble {
    std::vector<PathSample> paths;
    /// Empirical law of the terminal subset, indexed by bitmask.
    std::vector<double> terminal_distribution;
};

/// Jump-chain simulation. Paths are generated in fixed blocks with seeds
/// derived from (seed, block), so the output does not depend on `workers`.
PathEnsemble sample_paths(const MonotoneGenerator& gen, double horizon, std::size_t n_paths,
                          std::uint64_t seed, unsigned workers = 1);

/// The product-law construction: q(A, v) = log(1 + e^{alpha_v}) / T for
/// every A not containing v.
MonotoneGenerator independent_generator(std::span<const double> alpha, double horizon);

struct AlphaPoint {
    double alpha;
    double exp_alpha;
};

/// alpha(t) = log((1 + e^{alpha_T})^{t/T} - 1), together with e^{alpha(t)}.
AlphaPoint independent_alpha_curve(double alpha_terminal, double horizon, double t);

}  // namespace corrdef
