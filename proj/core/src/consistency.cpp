#include "corrdef/consistency.hpp"

#include "corrdef/default_model.hpp"
#include "corrdef/errors.hpp"
#include "detail/scalar_curve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace corrdef {

std::vector<double> geometric_grid(double t_min, double t_max, int points) {
    if (!(t_min > 0.0) || !(t_max >= t_min) || points < 1) {
        throw std::invalid_argument("geometric grid needs 0 < t_min <= t_max and points >= 1");
    }
    if (points == 1) return {t_max};
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double log_min = std::log(t_min);
    const double step = (std::log(t_max) - log_min) / (points - 1);
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = std::exp(log_min + step * i);
    grid.front() = t_min;
    grid.back() = t_max;
    return grid;
}

std::vector<double> residual_grid(double horizon, int points, double t_min_fraction) {
    return geometric_grid(t_min_fraction * horizon, horizon, points);
}

AlphaValue alpha_curve(double q_u, double r_empty, double r_u, double t) {
    if (!(q_u > 0.0)) throw std::invalid_argument("alpha curve needs Q_u > 0");
    if (!(t > 0.0)) throw std::invalid_argument("alpha curve needs t > 0");
    const double d = r_empty - r_u;
    if (std::abs(d) < 1e-9 * (std::abs(r_empty) + std::abs(r_u) + 1.0)) {
        const double e = q_u * t;
        return {std::log(e), 1.0 / t, e};
    }
    // expm1 keeps (e^{dt} - 1) / d accurate for small |d t|.
    const double e = q_u * std::expm1(d * t) / d;
    return {std::log(e), d / -std::expm1(-d * t), e};
}

// ---------------------------------------------------------------------------

struct PairCurve::Impl {
    detail::ScalarCurve curve;
};

namespace {

void check_pair_rates(const PairRates& r) {
    if (!(r.q_u > 0.0) || !(r.q_v > 0.0)) {
        throw std::invalid_argument("pair curve needs Q_u > 0 and Q_v > 0");
    }
    if (!(r.q_uv >= 0.0) || !(r.q_vu >= 0.0) || !(r.q_uv + r.q_vu > 0.0)) {
        throw std::invalid_argument("pair curve needs Q_uv, Q_vu >= 0, not both zero");
    }
}

}  // namespace

PairCurve::PairCurve(const PairRates& rates, double horizon, const CurveOptions& options)
    : rates_(rates) {
    check_pair_rates(rates_);
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    initial_ = std::log((rates_.q_u * rates_.q_uv + rates_.q_v * rates_.q_vu) / (2.0 * rates_.q_u * rates_.q_v));

    detail::OdeTolerances tol{options.rtol, options.atol, horizon / 100.0};
    const PairRates r = rates_;
    auto rhs = [r](double t, double beta) {
        const AlphaValue au = alpha_curve(r.q_u, r.r_empty, r.r_u, t);
        const AlphaValue av = alpha_curve(r.q_v, r.r_empty, r.r_v, t);
        const double damp = std::exp(-beta);
        return r.q_vu / au.exp_alpha * damp + r.q_uv / av.exp_alpha * damp - au.alpha_prime -
               av.alpha_prime - r.r_uv + r.r_empty;
    };
    // Perturbations of the bounded solution decay like t^{-2}, so starting
    // far below the grid from the t -> 0 limit leaves no visible transient.
    impl_ = std::make_shared<const Impl>(Impl{detail::ScalarCurve(
        rhs, options.start_fraction * horizon, initial_, horizon, tol, options.checkpoints)});
}

double PairCurve::start_time() const { return impl_->curve.t_start(); }

double PairCurve::slope(double t, double beta) const { return impl_->curve.slope(t, beta); }

PairCurve::Value PairCurve::at(double t) const {
    const double beta = impl_->curve.value(t);
    return {beta, slope(t, beta)};
}

std::vector<PairCurve::Value> PairCurve::on_grid(std::span<const double> times) const {
    const std::vector<double> betas = impl_->curve.values(times);
    std::vector<Value> out;
    out.reserve(betas.size());
    for (std::size_t i = 0; i < betas.size(); ++i) out.push_back({betas[i], slope(times[i], betas[i])});
    return out;
}

std::vector<PairCurve::Value> beta_curve(const PairRates& rates, std::span<const double> t_grid,
                                         double horizon, const CurveOptions& options) {
    CurveOptions one_pass = options;
    one_pass.checkpoints = 0;
    return PairCurve(rates, horizon, one_pass).on_grid(t_grid);
}

// ---------------------------------------------------------------------------

ParamCurves::ParamCurves(Graph graph, std::vector<AlphaRates> alphas, std::vector<PairCurve> pair_curves,
                         double horizon)
    : graph_(std::move(graph)), alphas_(std::move(alphas)), pairs_(std::move(pair_curves)), horizon_(horizon) {
    if (alphas_.size() != static_cast<std::size_t>(graph_.n_vertices()) || pairs_.size() != graph_.n_edges()) {
        throw std::invalid_argument("curve set does not match its graph");
    }
    for (std::size_t u = 0; u < alphas_.size(); ++u) {
        if (!(alphas_[u].q_u > 0.0)) {
            throw std::invalid_argument("Q_u = 0 for vertex " + std::to_string(u) +
                                        "; alpha_" + std::to_string(u) + "(t) is undefined");
        }
    }
}

AlphaValue ParamCurves::alpha(int u, double t) const {
    const AlphaRates& a = alphas_.at(static_cast<std::size_t>(u));
    return alpha_curve(a.q_u, a.r_empty, a.r_u, t);
}

PairCurve::Value ParamCurves::beta(int u, int v, double t) const {
    const auto idx = graph_.edge_index(u, v);
    if (!idx) return {0.0, 0.0};
    return pairs_[*idx].at(t);
}

ParamCurves::Snapshot ParamCurves::at(double t) const {
    const int n = n_vertices();
    Snapshot s{n, {}, std::vector<double>(static_cast<std::size_t>(n * n), 0.0),
               std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
    s.alpha.reserve(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) s.alpha.push_back(alpha(u, t));
    const auto edges = graph_.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const PairCurve::Value b = pairs_[i].at(t);
        const auto uv = static_cast<std::size_t>(edges[i].u * n + edges[i].v);
        const auto vu = static_cast<std::size_t>(edges[i].v * n + edges[i].u);
        s.beta[uv] = s.beta[vu] = b.beta;
        s.beta_prime[uv] = s.beta_prime[vu] = b.beta_prime;
    }
    return s;
}

namespace {

ModelParams params_at(const Graph& graph, const ParamCurves::Snapshot& s, bool derivative) {
    std::vector<double> alpha;
    for (const AlphaValue& a : s.alpha) alpha.push_back(derivative ? a.alpha_prime : a.alpha);
    std::vector<double> beta;
    for (const Edge& e : graph.edges()) beta.push_back(derivative ? s.beta_prime_at(e.u, e.v) : s.beta_at(e.u, e.v));
    return ModelParams(graph, std::move(alpha), std::move(beta));
}

}  // namespace

double ParamCurves::hamiltonian(Subset a, double t) const {
    return corrdef::hamiltonian(params_at(graph_, at(t), false), a);
}

double ParamCurves::log_partition(double t) const {
    return corrdef::log_partition(params_at(graph_, at(t), false));
}

double ParamCurves::log_partition_rate(double t) const {
    const Snapshot s = at(t);
    const SubsetDist p = full_distribution(params_at(graph_, s, false));
    const std::vector<double> dh = hamiltonian_table(params_at(graph_, s, true));
    double rate = 0.0;
    for (std::size_t a = 0; a < dh.size(); ++a) rate += p.probs[a] * dh[a];
    return rate;
}

ParamCurves curves_from_rates(const MonotoneGenerator& gen, double horizon, const CurveOptions& options) {
    return curves_from_rates(gen, Graph::complete(gen.n_vertices()), horizon, options);
}

ParamCurves curves_from_rates(const MonotoneGenerator& gen, const Graph& graph, double horizon,
                              const CurveOptions& options) {
    const int n = gen.n_vertices();
    if (graph.n_vertices() != n) throw std::invalid_argument("graph and generator disagree on the vertex count");
    std::vector<ParamCurves::AlphaRates> alphas;
    for (int u = 0; u < n; ++u) {
        if (!(gen.q_single(u) > 0.0)) {
            throw std::invalid_argument("Q_u = 0 for vertex " + std::to_string(u) +
                                        "; alpha_" + std::to_string(u) + "(t) is undefined");
        }
        alphas.push_back({gen.q_single(u), gen.r_empty(), gen.r_single(u)});
    }
    std::vector<PairCurve> pairs;
    for (const Edge& e : graph.edges()) {
        const PairRates r{gen.q_single(e.u), gen.q_single(e.v), gen.q_pair(e.u, e.v), gen.q_pair(e.v, e.u),
                          gen.r_empty(),     gen.r_single(e.u), gen.r_single(e.v), gen.r_pair(e.u, e.v)};
        pairs.emplace_back(r, horizon, options);
    }
    return ParamCurves(graph, std::move(alphas), std::move(pairs), horizon);
}

std::vector<double> master_residual(const MonotoneGenerator& gen, const ParamCurves& curves, double t) {
    const int n = gen.n_vertices();
    if (curves.n_vertices() != n) throw std::invalid_argument("curves and generator disagree on the vertex count");
    if (!(t > 0.0)) throw std::invalid_argument("residual time must be positive");
    const ParamCurves::Snapshot s = curves.at(t);
    const std::size_t size = std::size_t{1} << n;
    std::vector<double> out(size, 0.0);
    const double r_empty = gen.r_empty();
    for (std::size_t b = 1; b < size; ++b) {
        const auto set = static_cast<Subset>(b);
        double lhs = 0.0;
        double rhs = r_empty - gen.exit_rate(set);
        for (int u = 0; u < n; ++u) {
            if (!contains(set, u)) continue;
            lhs += s.alpha[static_cast<std::size_t>(u)].alpha_prime;
            double exponent = 0.0;
            for (int v = 0; v < n; ++v) {
                if (v == u || !contains(set, v)) continue;
                exponent += s.beta_at(u, v);
                if (v > u) lhs += s.beta_prime_at(u, v);
            }
            const double q = gen.rate(set & ~singleton(u), u);
            if (q != 0.0) rhs += q / s.alpha[static_cast<std::size_t>(u)].exp_alpha * std::exp(-exponent);
        }
        out[b] = lhs - rhs;
    }
    return out;
}

double max_abs_residual(std::span<const double> residuals) {
    double worst = 0.0;
    for (std::size_t b = 1; b < residuals.size(); ++b) worst = std::max(worst, std::abs(residuals[b]));
    return worst;
}

MembershipReport membership_over_time(const MonotoneGenerator& gen, std::span<const double> t_grid,
                                      const Graph& graph, const ForwardOptions& options) {
    if (graph.n_vertices() != gen.n_vertices()) {
        throw std::invalid_argument("graph and generator disagree on the vertex count");
    }
    const Trajectory traj = forward_solve(gen, t_grid, options);
    MembershipReport report;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double r = family_membership_residual(traj.distributions[i], graph);
        report.times.push_back(traj.times[i]);
        report.residuals.push_back(r);
        report.max_residual = std::max(report.max_residual, r);
    }
    return report;
}

MembershipReport membership_over_time(const MonotoneGenerator& gen, std::span<const double> t_grid,
                                      const ForwardOptions& options) {
    return membership_over_time(gen, t_grid, Graph::complete(gen.n_vertices()), options);
}

}  // namespace corrdef
