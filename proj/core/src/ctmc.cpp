#include "corrdef/ctmc.hpp"

#include "corrdef/errors.hpp"
#include "detail/ode.hpp"
#include "detail/random.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace corrdef {

namespace {

constexpr std::size_t kPathBlock = 4096;
constexpr double kRenormalizeThreshold = 1e-10;

void check_vertex_count(int n) {
    if (n < 1) throw std::invalid_argument("generator needs at least one vertex");
    if (n > kEnumerationCap) throw CapacityExceeded(n, kEnumerationCap);
}

}  // namespace

MonotoneGenerator::MonotoneGenerator(int n_vertices, std::vector<double> rates)
    : n_(n_vertices), rates_(std::move(rates)) {
    check_vertex_count(n_);
    const std::size_t size = std::size_t{1} << n_;
    const auto n = static_cast<std::size_t>(n_);
    if (rates_.size() != size * n) {
        throw std::invalid_argument("rate table must hold 2^n * n entries");
    }
    exit_rates_.assign(size, 0.0);
    for (std::size_t a = 0; a < size; ++a) {
        double total = 0.0;
        for (int v = 0; v < n_; ++v) {
            const double q = rates_[a * n + static_cast<std::size_t>(v)];
            if (!std::isfinite(q) || q < 0.0) {
                throw std::invalid_argument("rate q(" + std::to_string(a) + ", " + std::to_string(v) +
                                            ") must be finite and nonnegative");
            }
            if (contains(static_cast<Subset>(a), v) && q != 0.0) {
                throw std::invalid_argument("q(A, v) must be zero when v is already in A (A = " +
                                            std::to_string(a) + ", v = " + std::to_string(v) + ")");
            }
            total += q;
        }
        exit_rates_[a] = total;
    }
}

MonotoneGenerator MonotoneGenerator::from_function(int n_vertices,
                                                   const std::function<double(Subset, int)>& rate) {
    check_vertex_count(n_vertices);
    const std::size_t size = std::size_t{1} << n_vertices;
    const auto n = static_cast<std::size_t>(n_vertices);
    std::vector<double> rates(size * n, 0.0);
    for (std::size_t a = 0; a < size; ++a) {
        for (int v = 0; v < n_vertices; ++v) {
            if (!contains(static_cast<Subset>(a), v)) rates[a * n + static_cast<std::size_t>(v)] = rate(static_cast<Subset>(a), v);
        }
    }
    return MonotoneGenerator(n_vertices, std::move(rates));
}

MonotoneGenerator MonotoneGenerator::from_entries(int n_vertices, std::span<const Entry> entries) {
    check_vertex_count(n_vertices);
    const std::size_t size = std::size_t{1} << n_vertices;
    const auto n = static_cast<std::size_t>(n_vertices);
    std::vector<double> rates(size * n, 0.0);
    std::vector<bool> seen(size * n, false);
    for (const Entry& e : entries) {
        check_subset(e.subset, n_vertices);
        if (e.vertex < 0 || e.vertex >= n_vertices) throw std::out_of_range("vertex index out of range");
        const std::size_t slot = e.subset * n + static_cast<std::size_t>(e.vertex);
        if (seen[slot]) {
            throw std::invalid_argument("duplicate generator entry for subset " + std::to_string(e.subset) +
                                        ", vertex " + std::to_string(e.vertex));
        }
        seen[slot] = true;
        rates[slot] = e.rate;
    }
    return MonotoneGenerator(n_vertices, std::move(rates));
}

double MonotoneGenerator::rate(Subset a, int v) const {
    check_subset(a, n_);
    if (v < 0 || v >= n_) throw std::out_of_range("vertex index out of range");
    return rates_[a * static_cast<std::size_t>(n_) + static_cast<std::size_t>(v)];
}

std::vector<MonotoneGenerator::Entry> MonotoneGenerator::entries() const {
    std::vector<Entry> out;
    const auto n = static_cast<std::size_t>(n_);
    for (std::size_t a = 0; a < exit_rates_.size(); ++a) {
        for (int v = 0; v < n_; ++v) {
            const double q = rates_[a * n + static_cast<std::size_t>(v)];
            if (q != 0.0) out.push_back({static_cast<Subset>(a), v, q});
        }
    }
    return out;
}

MonotoneGenerator MonotoneGenerator::relabeled(std::span<const int> perm) const {
    check_permutation(perm, n_);
    const auto n = static_cast<std::size_t>(n_);
    std::vector<double> rates(rates_.size(), 0.0);
    for (std::size_t a = 0; a < exit_rates_.size(); ++a) {
        const Subset image = permute_subset(static_cast<Subset>(a), perm);
        for (std::size_t v = 0; v < n; ++v) {
            rates[image * n + static_cast<std::size_t>(perm[v])] = rates_[a * n + v];
        }
    }
    return MonotoneGenerator(n_, std::move(rates));
}

Trajectory forward_solve(const MonotoneGenerator& gen, std::span<const double> t_grid,
                         const ForwardOptions& options) {
    const int n = gen.n_vertices();
    if (n > options.cap) throw CapacityExceeded(n, options.cap);
    if (t_grid.empty()) return {};
    if (t_grid.front() < 0.0 || !std::is_sorted(t_grid.begin(), t_grid.end())) {
        throw std::invalid_argument("time grid must be nonnegative and nondecreasing");
    }
    const std::size_t size = std::size_t{1} << n;

    // Flat copies keep the inner loop free of bounds checks.
    const auto nn = static_cast<std::size_t>(n);
    std::vector<double> q(size * nn);
    std::vector<double> exit(size);
    for (std::size_t a = 0; a < size; ++a) {
        exit[a] = gen.exit_rate(static_cast<Subset>(a));
        for (int v = 0; v < n; ++v) {
            q[a * nn + static_cast<std::size_t>(v)] =
                contains(static_cast<Subset>(a), v) ? 0.0 : gen.rate(static_cast<Subset>(a), v);
        }
    }

    // Every predecessor B \ {v} has a smaller bitmask than B, so the
    // generator is strictly lower triangular in bitmask order and each
    // derivative only touches |B| inflow terms.
    auto rhs = [&](const std::vector<double>& p, std::vector<double>& dp, double) {
        dp[0] = -exit[0] * p[0];
        for (std::size_t b = 1; b < size; ++b) {
            double inflow = 0.0;
            Subset bits = static_cast<Subset>(b);
            while (bits != 0) {
                const int v = std::countr_zero(bits);
                const std::size_t a = b ^ singleton(v);
                inflow += p[a] * q[a * nn + static_cast<std::size_t>(v)];
                bits &= bits - 1;
            }
            dp[b] = inflow - exit[b] * p[b];
        }
    };

    detail::OdeTolerances tol;
    tol.rtol = options.rtol;
    tol.atol = options.atol;
    tol.max_step = options.max_step > 0.0 ? options.max_step : t_grid.back() / 100.0;
    if (!(tol.max_step > 0.0)) tol.max_step = std::numeric_limits<double>::infinity();

    Trajectory out;
    std::vector<double> p(size, 0.0);
    p[0] = 1.0;
    detail::integrate_to_times(rhs, p, 0.0, t_grid, tol, [&](const std::vector<double>& x, double t) {
        std::vector<double> probs = x;
        for (double& v : probs) v = std::max(v, 0.0);
        const double mass = std::accumulate(probs.begin(), probs.end(), 0.0);
        const double drift = std::abs(mass - 1.0);
        const bool rescale = drift > kRenormalizeThreshold;
        if (rescale) {
            for (double& v : probs) v /= mass;
        }
        out.times.push_back(t);
        out.distributions.emplace_back(n, std::move(probs), std::numeric_limits<double>::quiet_NaN());
        out.renormalized.push_back(rescale);
        out.mass_drift.push_back(drift);
    });
    return out;
}

PathEnsemble sample_paths(const MonotoneGenerator& gen, double horizon, std::size_t n_paths,
                          std::uint64_t seed, unsigned workers) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    const int n = gen.n_vertices();
    const std::size_t size = std::size_t{1} << n;

    PathEnsemble out;
    out.paths.resize(n_paths);
    const std::size_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;

    auto run_block = [&](std::size_t block) {
        std::mt19937_64 rng(detail::derive_seed(seed, block));
        const std::size_t end = std::min(n_paths, (block + 1) * kPathBlock);
        for (std::size_t i = block * kPathBlock; i < end; ++i) {
            PathSample& path = out.paths[i];
            Subset state = 0;
            double t = 0.0;
            for (;;) {
                const double exit = gen.exit_rate(state);
                if (exit <= 0.0) break;
                t += detail::exponential(rng, exit);
                if (t > horizon) break;
                double pick = detail::uniform01(rng) * exit;
                int chosen = -1;
                for (int v = 0; v < n; ++v) {
                    if (contains(state, v)) continue;
                    const double q = gen.rate(state, v);
                    if (q <= 0.0) continue;
                    chosen = v;
                    if (pick < q) break;
                    pick -= q;
                }
                state |= singleton(chosen);
                path.jump_times.push_back(t);
                path.jump_vertices.push_back(chosen);
            }
            path.terminal = state;
        }
    };

    const unsigned n_workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(n_blocks)));
    if (n_workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < n_blocks; b = next++) run_block(b);
            });
        }
    }

    out.terminal_distribution.assign(size, 0.0);
    for (const PathSample& path : out.paths) out.terminal_distribution[path.terminal] += 1.0;
    if (n_paths > 0) {
        for (double& f : out.terminal_distribution) f /= static_cast<double>(n_paths);
    }
    return out;
}

MonotoneGenerator independent_generator(std::span<const double> alpha, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    if (alpha.empty()) throw std::invalid_argument("need at least one vertex");
    std::vector<double> lambda(alpha.size());
    for (std::size_t v = 0; v < alpha.size(); ++v) {
        if (!std::isfinite(alpha[v])) throw std::invalid_argument("alpha must be finite");
        // log(1 + e^a), stable for large |a|.
        const double a = alpha[v];
        lambda[v] = (a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a))) / horizon;
    }
    return MonotoneGenerator::from_function(static_cast<int>(alpha.size()),
                                            [&](Subset, int v) { return lambda[static_cast<std::size_t>(v)]; });
}

AlphaPoint independent_alpha_curve(double alpha_terminal, double horizon, double t) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
    if (t == horizon) return {alpha_terminal, std::exp(alpha_terminal)};
    const double a = alpha_terminal;
    const double log1p_exp = a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
    const double exp_alpha = std::expm1((t / horizon) * log1p_exp);
    return {std::log(exp_alpha), exp_alpha};
}

}  // namespace corrdef
