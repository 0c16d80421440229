#include "corrdef/default_model.hpp"

#include "corrdef/errors.hpp"
#include "detail/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace corrdef {

namespace {

void require_cap(int n, int cap) {
    if (n > cap) throw CapacityExceeded(n, cap);
}

void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
    }
}

double log_sum_exp(std::span<const double> xs) {
    const double shift = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - shift);
    return shift + std::log(sum);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

ModelParams::ModelParams(Graph g, std::vector<double> a, std::vector<double> b)
    : graph(std::move(g)), alpha(std::move(a)), beta(std::move(b)) {
    if (alpha.size() != static_cast<std::size_t>(graph.n_vertices())) {
        throw std::invalid_argument("alpha needs one value per vertex");
    }
    if (beta.size() != graph.n_edges()) {
        throw std::invalid_argument("beta needs one value per edge");
    }
    require_finite(alpha, "alpha");
    require_finite(beta, "beta");
}

double ModelParams::beta_between(int u, int v) const {
    const auto idx = graph.edge_index(u, v);
    return idx ? beta[*idx] : 0.0;
}

IsingParams::IsingParams(Graph g, std::vector<double> gm, std::vector<double> dl, double ln)
    : graph(std::move(g)), gamma(std::move(gm)), delta(std::move(dl)), log_norm(ln) {
    if (gamma.size() != static_cast<std::size_t>(graph.n_vertices()) ||
        delta.size() != graph.n_edges()) {
        throw std::invalid_argument("Ising parameters do not match the graph");
    }
    require_finite(gamma, "gamma");
    require_finite(delta, "delta");
}

SubsetDist::SubsetDist(int n, std::vector<double> p, double log_z)
    : n_vertices(n), probs(std::move(p)), log_partition(log_z) {
    if (n < 1 || n > kMaxGraphVertices || probs.size() != (std::size_t{1} << n)) {
        throw std::invalid_argument("distribution vector must have length 2^n");
    }
}

double SubsetDist::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double hamiltonian(const ModelParams& params, Subset a) {
    const int n = params.n_vertices();
    check_subset(a, n);
    double h = 0.0;
    for (int u = 0; u < n; ++u) {
        if (contains(a, u)) h += params.alpha[static_cast<std::size_t>(u)];
    }
    const auto edges = params.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (contains(a, edges[i].u) && contains(a, edges[i].v)) h += params.beta[i];
    }
    return h;
}

std::vector<double> hamiltonian_table(const ModelParams& params, int cap) {
    const int n = params.n_vertices();
    require_cap(n, cap);
    const std::size_t size = std::size_t{1} << n;

    // Per-vertex interaction with lower-indexed neighbours, as a dense row.
    std::vector<double> coupling(static_cast<std::size_t>(n * n), 0.0);
    const auto edges = params.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        coupling[static_cast<std::size_t>(edges[i].v * n + edges[i].u)] = params.beta[i];
    }

    // H(A) = H(A \ {top}) + alpha_top + sum of couplings from top into the rest.
    std::vector<double> h(size, 0.0);
    for (std::size_t a = 1; a < size; ++a) {
        const int top = std::bit_width(a) - 1;
        const Subset rest = static_cast<Subset>(a) & ~singleton(top);
        double value = h[rest] + params.alpha[static_cast<std::size_t>(top)];
        Subset nb = rest & params.graph.neighbors(top);
        while (nb != 0) {
            const int w = std::countr_zero(nb);
            value += coupling[static_cast<std::size_t>(top * n + w)];
            nb &= nb - 1;
        }
        h[a] = value;
    }
    return h;
}

double log_partition(const ModelParams& params, int cap) {
    return log_sum_exp(hamiltonian_table(params, cap));
}

double subset_probability(const ModelParams& params, Subset a, int cap) {
    check_subset(a, params.n_vertices());
    return std::exp(hamiltonian(params, a) - log_partition(params, cap));
}

SubsetDist full_distribution(const ModelParams& params, int cap) {
    std::vector<double> h = hamiltonian_table(params, cap);
    const double log_z = log_sum_exp(h);
    for (double& x : h) x = std::exp(x - log_z);
    return SubsetDist(params.n_vertices(), std::move(h), log_z);
}

IsingParams to_ising(const ModelParams& params) {
    // Substituting I = (1 + sigma) / 2 into H and collecting terms:
    //   gamma_u = alpha_u / 2 + (1/4) sum_{v ~ u} beta_uv,  delta_e = beta_e / 4,
    // and the constant sum(alpha)/2 + sum(beta)/4 moves into the normaliser.
    const int n = params.n_vertices();
    std::vector<double> gamma(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) gamma[static_cast<std::size_t>(u)] = 0.5 * params.alpha[static_cast<std::size_t>(u)];
    std::vector<double> delta(params.beta.size());
    const auto edges = params.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        gamma[static_cast<std::size_t>(edges[i].u)] += 0.25 * params.beta[i];
        gamma[static_cast<std::size_t>(edges[i].v)] += 0.25 * params.beta[i];
        delta[i] = 0.25 * params.beta[i];
    }
    const double shift = 0.5 * std::accumulate(params.alpha.begin(), params.alpha.end(), 0.0) +
                         0.25 * std::accumulate(params.beta.begin(), params.beta.end(), 0.0);
    const double log_z = params.n_vertices() <= kEnumerationCap
                             ? log_partition(params)
                             : std::numeric_limits<double>::quiet_NaN();
    return IsingParams(params.graph, std::move(gamma), std::move(delta), log_z - shift);
}

ModelParams from_ising(const IsingParams& ising) {
    const int n = ising.graph.n_vertices();
    std::vector<double> alpha(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) alpha[static_cast<std::size_t>(u)] = 2.0 * ising.gamma[static_cast<std::size_t>(u)];
    std::vector<double> beta(ising.delta.size());
    const auto edges = ising.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        beta[i] = 4.0 * ising.delta[i];
        alpha[static_cast<std::size_t>(edges[i].u)] -= 2.0 * ising.delta[i];
        alpha[static_cast<std::size_t>(edges[i].v)] -= 2.0 * ising.delta[i];
    }
    return ModelParams(ising.graph, std::move(alpha), std::move(beta));
}

double ising_log_probability(const IsingParams& ising, Subset plus_sites) {
    const int n = ising.graph.n_vertices();
    check_subset(plus_sites, n);
    auto spin = [&](int v) { return contains(plus_sites, v) ? 1.0 : -1.0; };
    double energy = 0.0;
    for (int u = 0; u < n; ++u) energy += ising.gamma[static_cast<std::size_t>(u)] * spin(u);
    const auto edges = ising.graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        energy += ising.delta[i] * spin(edges[i].u) * spin(edges[i].v);
    }
    return energy - ising.log_norm;
}

InteractionCoeffs extract_interactions(const SubsetDist& dist) {
    const std::size_t size = dist.probs.size();
    std::vector<double> f(size);
    for (std::size_t a = 0; a < size; ++a) {
        const double p = dist.probs[a];
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw std::domain_error("interaction extraction needs every cell positive; cell " +
                                    std::to_string(a) + " has probability " + std::to_string(p));
        }
        f[a] = std::log(p);
    }
    const double base = f[0];
    for (double& x : f) x -= base;

    // In-place subset Moebius transform: c_A = sum_{B in A} (-1)^{|A\B|} f(B).
    for (int bit = 0; bit < dist.n_vertices; ++bit) {
        const Subset b = singleton(bit);
        for (std::size_t a = 0; a < size; ++a) {
            if ((a & b) != 0) f[a] -= f[a ^ b];
        }
    }
    f[0] = 0.0;
    return InteractionCoeffs{dist.n_vertices, std::move(f)};
}

double family_membership_residual(const InteractionCoeffs& c, const Graph& graph) {
    if (c.n_vertices != graph.n_vertices()) {
        throw std::invalid_argument("coefficients and graph disagree on the vertex count");
    }
    double worst = 0.0;
    for (std::size_t a = 1; a < c.coeffs.size(); ++a) {
        const int order = std::popcount(a);
        if (order >= 3) {
            worst = std::max(worst, std::abs(c.coeffs[a]));
        } else if (order == 2) {
            const int u = std::countr_zero(a);
            const int v = std::bit_width(a) - 1;
            if (!graph.has_edge(u, v)) worst = std::max(worst, std::abs(c.coeffs[a]));
        }
    }
    return worst;
}

double family_membership_residual(const SubsetDist& dist, const Graph& graph) {
    return family_membership_residual(extract_interactions(dist), graph);
}

std::vector<Subset> exact_sample(const ModelParams& params, std::size_t n_draws, std::uint64_t seed,
                                 int cap) {
    const SubsetDist dist = full_distribution(params, cap);
    std::vector<double> cdf(dist.probs.size());
    std::partial_sum(dist.probs.begin(), dist.probs.end(), cdf.begin());
    const double total = cdf.back();

    std::mt19937_64 rng(detail::mix_seed(seed));
    std::vector<Subset> draws;
    draws.reserve(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) {
        const double u = detail::uniform01(rng) * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        draws.push_back(static_cast<Subset>(it - cdf.begin()));
    }
    return draws;
}

Moments moments(const SubsetDist& dist, const Graph& graph) {
    if (dist.n_vertices != graph.n_vertices()) {
        throw std::invalid_argument("distribution and graph disagree on the vertex count");
    }
    const int n = graph.n_vertices();
    Moments m{std::vector<double>(static_cast<std::size_t>(n), 0.0),
              std::vector<double>(graph.n_edges(), 0.0)};
    const auto edges = graph.edges();
    for (std::size_t a = 0; a < dist.probs.size(); ++a) {
        const double p = dist.probs[a];
        if (p == 0.0) continue;
        for (int u = 0; u < n; ++u) {
            if (contains(static_cast<Subset>(a), u)) m.vertex[static_cast<std::size_t>(u)] += p;
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (contains(static_cast<Subset>(a), edges[i].u) &&
                contains(static_cast<Subset>(a), edges[i].v)) {
                m.pair[i] += p;
            }
        }
    }
    return m;
}

ModelParams fit_moments(const Graph& graph, std::span<const double> vertex_targets,
                        std::span<const double> pair_targets, const FitOptions& options) {
    const int n = graph.n_vertices();
    require_cap(n, options.cap);
    if (vertex_targets.size() != static_cast<std::size_t>(n) || pair_targets.size() != graph.n_edges()) {
        throw std::invalid_argument("need one vertex target per vertex and one pair target per edge");
    }
    if (!(options.damping > 0.0 && options.damping <= 1.0) || !(options.tolerance > 0.0)) {
        throw std::invalid_argument("fit options out of range");
    }
    for (int u = 0; u < n; ++u) {
        const double p = vertex_targets[static_cast<std::size_t>(u)];
        if (!(p > 0.0 && p < 1.0)) {
            throw InfeasibleTargets("vertex target for " + std::to_string(u) + " must lie in (0,1), got " +
                                    std::to_string(p));
        }
    }
    const auto edges = graph.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double pu = vertex_targets[static_cast<std::size_t>(edges[i].u)];
        const double pv = vertex_targets[static_cast<std::size_t>(edges[i].v)];
        const double q = pair_targets[i];
        const double upper = std::min(pu, pv);
        const double lower = std::max(0.0, pu + pv - 1.0);
        // Finite parameters put positive mass on every cell, so the bounds are strict.
        if (!(q > lower && q < upper)) {
            throw InfeasibleTargets("pair target for edge {" + std::to_string(edges[i].u) + "," +
                                    std::to_string(edges[i].v) + "} = " + std::to_string(q) +
                                    " violates the Frechet bounds (" + std::to_string(lower) + ", " +
                                    std::to_string(upper) + ")");
        }
    }

    const std::size_t size = std::size_t{1} << n;
    std::vector<double> alpha(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) alpha[static_cast<std::size_t>(u)] = logit(vertex_targets[static_cast<std::size_t>(u)]);
    std::vector<double> beta(graph.n_edges(), 0.0);

    std::vector<double> weight(size);
    auto reload = [&] {
        const auto h = hamiltonian_table(ModelParams(graph, alpha, beta), options.cap);
        const double shift = *std::max_element(h.begin(), h.end());
        for (std::size_t a = 0; a < size; ++a) weight[a] = std::exp(h[a] - shift);
    };
    // One coordinate step on the feature "mask is contained in A".
    auto update = [&](Subset mask, double target) {
        double inside = 0.0;
        double total = 0.0;
        for (std::size_t a = 0; a < size; ++a) {
            total += weight[a];
            if ((a & mask) == mask) inside += weight[a];
        }
        const double current = inside / total;
        const double step = options.damping * (logit(target) - logit(current));
        const double factor = std::exp(step);
        for (std::size_t a = 0; a < size; ++a) {
            if ((a & mask) == mask) weight[a] *= factor;
        }
        return step;
    };
    auto residual = [&] {
        const Moments m = moments(full_distribution(ModelParams(graph, alpha, beta), options.cap), graph);
        double worst = 0.0;
        for (int u = 0; u < n; ++u) {
            worst = std::max(worst, std::abs(m.vertex[static_cast<std::size_t>(u)] - vertex_targets[static_cast<std::size_t>(u)]));
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            worst = std::max(worst, std::abs(m.pair[i] - pair_targets[i]));
        }
        return worst;
    };

    double res = residual();
    int iter = 0;
    while (res > options.tolerance) {
        if (iter >= options.max_iter) {
            throw ConvergenceFailure("moment fit did not converge; final residual " + std::to_string(res),
                                     res, iter);
        }
        reload();
        for (int u = 0; u < n; ++u) {
            alpha[static_cast<std::size_t>(u)] += update(singleton(u), vertex_targets[static_cast<std::size_t>(u)]);
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            beta[i] += update(singleton(edges[i].u) | singleton(edges[i].v), pair_targets[i]);
        }
        ++iter;
        res = residual();
    }
    return ModelParams(graph, std::move(alpha), std::move(beta));
}

}  // namespace corrdef
