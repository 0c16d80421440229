#include "corrdef/reduced_models.hpp"

#include "detail/random.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace corrdef {

namespace {

constexpr double kFailedObjective = 1e10;
constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

using Rates = std::variant<LumpedRatesI, LumpedRatesBi>;

void validate(const ModelSpec& model, const SearchTargets& targets, const SearchConfig& config) {
    switch (model.kind) {
        case ReducedModel::I:
            if (model.N < 2) throw std::invalid_argument("Model I needs N >= 2");
            break;
        case ReducedModel::II:
        case ReducedModel::III:
            if (model.M < 1 || model.N < 1) throw std::invalid_argument("bipartite models need M, N >= 1");
            break;
    }
    if (!std::isfinite(targets.alpha) || !std::isfinite(targets.alpha_hat) || !std::isfinite(targets.alpha_check) ||
        !std::isfinite(targets.beta)) {
        throw std::invalid_argument("search targets must be finite");
    }
    if (model.kind == ReducedModel::III && targets.alpha_hat == targets.alpha_check) {
        throw std::invalid_argument("Model III targets need alpha_hat(T) != alpha_check(T)");
    }
    if (config.restarts < 1 || config.max_iter < 0 || config.lm_iter < 0 || !(config.simplex_step > 0.0)) {
        throw std::invalid_argument("search needs restarts >= 1 and nonnegative iteration limits");
    }
    if (!(config.horizon > 0.0) || !(config.penalty_weight >= 0.0) || config.grid_points < 1 ||
        !(config.t_min_fraction > 0.0 && config.t_min_fraction <= 1.0)) {
        throw std::invalid_argument("invalid search grid, horizon or penalty");
    }
}

/// Residuals and terminal values of one rate table, in a fixed order.
struct Evaluation {
    bool ok = false;
    std::vector<double> residuals;  // objective-set equations, grid-major
    std::vector<double> terminal;   // signed terminal differences
};

bool in_objective_set(ReducedModel kind, int m, int n) {
    if (m == 0 && n == 0) return false;
    if ((m == 1 && n == 0) || (m == 1 && n == 1)) return false;
    if (kind == ReducedModel::III && m == 0 && n == 1) return false;
    return true;
}

Evaluation evaluate_raw(const ModelSpec& model, const SearchTargets& targets, const Rates& rates,
                        const SearchConfig& config, std::span<const double> grid) {
    Evaluation ev;
    try {
        if (model.kind == ReducedModel::I) {
            const auto& l = std::get<LumpedRatesI>(rates);
            const auto pts = reduced_curves_I(l[0], l[1], l[2], l.N, grid, config.horizon, config.curve);
            for (const ReducedPointI& p : pts) {
                const auto res = residual_I(l, p);
                for (int k = 3; k <= l.N; ++k) ev.residuals.push_back(res[static_cast<std::size_t>(k - 1)]);
            }
            ev.terminal = {pts.back().alpha - targets.alpha, pts.back().beta - targets.beta};
        } else {
            const auto& l = std::get<LumpedRatesBi>(rates);
            auto collect = [&](const OccupancyTable& res) {
                for (int m = 0; m <= l.M(); ++m) {
                    for (int n = 0; n <= l.N(); ++n) {
                        if (in_objective_set(model.kind, m, n)) ev.residuals.push_back(res(m, n));
                    }
                }
            };
            if (model.kind == ReducedModel::II) {
                const auto pts = reduced_curves_II(l, grid, config.horizon, config.curve);
                for (const ReducedPointII& p : pts) collect(residual_II(l, p));
                ev.terminal = {pts.back().alpha - targets.alpha, pts.back().beta - targets.beta};
            } else {
                const auto pts = reduced_curves_III(l, grid, config.horizon, config.curve);
                for (const ReducedPointIII& p : pts) collect(residual_III(l, p));
                ev.terminal = {pts.back().alpha_hat - targets.alpha_hat,
                               pts.back().alpha_check - targets.alpha_check, pts.back().beta - targets.beta};
            }
        }
        ev.ok = std::all_of(ev.residuals.begin(), ev.residuals.end(), [](double x) { return std::isfinite(x); }) &&
                std::all_of(ev.terminal.begin(), ev.terminal.end(), [](double x) { return std::isfinite(x); });
    } catch (const std::exception&) {
        ev.ok = false;
    }
    return ev;
}

ObjectiveValue summarize(const Evaluation& ev, double penalty_weight) {
    if (!ev.ok) return {kFailedObjective, kInf, kInf};
    double residual = 0.0;
    for (double r : ev.residuals) residual = std::max(residual, std::abs(r));
    double mismatch = 0.0;
    for (double d : ev.terminal) mismatch = std::max(mismatch, std::abs(d));
    return {residual + penalty_weight * mismatch * mismatch, residual, mismatch};
}

// Maps an unconstrained vector to positive rates; boundary rates stay 0.
class Problem {
public:
    Problem(const ModelSpec& model, const SearchTargets& targets, const SearchConfig& config)
        : model_(model), targets_(targets), config_(config),
          grid_(residual_grid(config.horizon, config.grid_points, config.t_min_fraction)) {}

    int dim() const {
        if (model_.kind == ReducedModel::I) return model_.N;
        return model_.M * (model_.N + 1) + (model_.M + 1) * model_.N;
    }

    Rates rates(const Eigen::VectorXd& x) const {
        const double scale = 1.0 / config_.horizon;
        if (model_.kind == ReducedModel::I) {
            std::vector<double> lambda(static_cast<std::size_t>(model_.N + 1), 0.0);
            for (int l = 0; l < model_.N; ++l) lambda[static_cast<std::size_t>(l)] = softplus(x(l)) * scale;
            return LumpedRatesI(model_.N, std::move(lambda));
        }
        const int M = model_.M;
        const int N = model_.N;
        OccupancyTable hat(M, N), check(M, N);
        Eigen::Index i = 0;
        for (int m = 0; m < M; ++m) {
            for (int n = 0; n <= N; ++n) hat.at(m, n) = softplus(x(i++)) * scale;
        }
        for (int m = 0; m <= M; ++m) {
            for (int n = 0; n < N; ++n) check.at(m, n) = softplus(x(i++)) * scale;
        }
        return LumpedRatesBi(std::move(hat), std::move(check));
    }

    Evaluation evaluate(const Eigen::VectorXd& x) const {
        Rates r = rates(x);
        return evaluate_raw(model_, targets_, r, config_, grid_);
    }

    ObjectiveValue objective(const Eigen::VectorXd& x) const {
        return summarize(evaluate(x), config_.penalty_weight);
    }

    /// Length of the stacked least-squares vector.
    int n_values() const {
        const int g = static_cast<int>(grid_.size());
        if (model_.kind == ReducedModel::I) return g * std::max(model_.N - 2, 0) + 2;
        int eqs = 0;
        for (int m = 0; m <= model_.M; ++m) {
            for (int n = 0; n <= model_.N; ++n) eqs += in_objective_set(model_.kind, m, n) ? 1 : 0;
        }
        return g * eqs + (model_.kind == ReducedModel::III ? 3 : 2);
    }

    void stacked(const Eigen::VectorXd& x, Eigen::VectorXd& out, bool time_weighted) const {
        const Evaluation ev = evaluate(x);
        out.resize(n_values());
        if (!ev.ok || static_cast<int>(ev.residuals.size() + ev.terminal.size()) != n_values()) {
            out.setConstant(1e5);
            return;
        }
        // Residuals scale like 1/t near the grid start; weighting by t/T
        // keeps the early grid points from swamping the least-squares fit.
        const double w = std::sqrt(config_.penalty_weight);
        const std::size_t per_time = ev.residuals.size() / grid_.size();
        Eigen::Index i = 0;
        for (std::size_t k = 0; k < ev.residuals.size(); ++k) {
            out(i++) = time_weighted ? ev.residuals[k] * grid_[k / per_time] / config_.horizon : ev.residuals[k];
        }
        for (double d : ev.terminal) out(i++) = w * d;
    }

    const SearchConfig& config() const { return config_; }

private:
    ModelSpec model_;
    SearchTargets targets_;
    SearchConfig config_;
    std::vector<double> grid_;
};

struct LeastSquaresFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const Problem* problem;
    bool time_weighted;

    int inputs() const { return problem->dim(); }
    int values() const { return problem->n_values(); }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        problem->stacked(x, f, time_weighted);
        return 0;
    }
};

struct Candidate {
    Eigen::VectorXd x;
    ObjectiveValue value;
};

// Nelder-Mead with dimension-adapted coefficients.
Candidate nelder_mead(const Problem& problem, const Candidate& start, double step, int max_iter, int restart,
                      int trace_every, std::vector<TraceRow>& trace) {
    const Eigen::VectorXd& x0 = start.x;
    const int d = static_cast<int>(x0.size());
    const double alpha = 1.0;
    const double gamma = 1.0 + 2.0 / d;
    const double rho = 0.75 - 1.0 / (2.0 * d);
    const double sigma = 1.0 - 1.0 / d;

    std::vector<Candidate> simplex;
    simplex.reserve(static_cast<std::size_t>(d + 1));
    simplex.push_back(start);
    if (max_iter <= 0) return start;
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd x = x0;
        x(j) += step;
        simplex.push_back({x, problem.objective(x)});
    }
    auto by_objective = [](const Candidate& a, const Candidate& b) { return a.value.objective < b.value.objective; };

    for (int it = 0; it < max_iter; ++it) {
        std::stable_sort(simplex.begin(), simplex.end(), by_objective);
        if (trace_every > 0 && it % trace_every == 0) {
            const ObjectiveValue& v = simplex.front().value;
            trace.push_back({restart, it, v.objective, v.terminal_mismatch, v.residual});
        }
        const double f_best = simplex.front().value.objective;
        const double f_worst = simplex.back().value.objective;
        double diameter = 0.0;
        for (int j = 1; j <= d; ++j) {
            diameter = std::max(diameter, (simplex[static_cast<std::size_t>(j)].x - simplex.front().x).cwiseAbs().maxCoeff());
        }
        if (f_worst - f_best <= 1e-15 * (1.0 + std::abs(f_best)) && diameter < 1e-10) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int j = 0; j < d; ++j) centroid += simplex[static_cast<std::size_t>(j)].x;
        centroid /= d;

        Candidate& worst = simplex.back();
        const Eigen::VectorXd xr = centroid + alpha * (centroid - worst.x);
        const ObjectiveValue fr = problem.objective(xr);
        const double f_second = simplex[static_cast<std::size_t>(d - 1)].value.objective;

        if (fr.objective < f_best) {
            const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const ObjectiveValue fe = problem.objective(xe);
            worst = fe.objective < fr.objective ? Candidate{xe, fe} : Candidate{xr, fr};
        } else if (fr.objective < f_second) {
            worst = {xr, fr};
        } else {
            const bool outside = fr.objective < worst.value.objective;
            const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + rho * (xr - centroid))
                                               : Eigen::VectorXd(centroid - rho * (centroid - worst.x));
            const ObjectiveValue fc = problem.objective(xc);
            if (fc.objective < (outside ? fr.objective : worst.value.objective)) {
                worst = {xc, fc};
            } else {
                for (int j = 1; j <= d; ++j) {
                    Candidate& c = simplex[static_cast<std::size_t>(j)];
                    c.x = simplex.front().x + sigma * (c.x - simplex.front().x);
                    c.value = problem.objective(c.x);
                }
            }
        }
    }
    std::stable_sort(simplex.begin(), simplex.end(), by_objective);
    return simplex.front();
}

Candidate least_squares(const Problem& problem, const Candidate& start, int max_iter, bool time_weighted) {
    if (max_iter <= 0) return start;
    LeastSquaresFunctor functor{&problem, time_weighted};
    Eigen::NumericalDiff<LeastSquaresFunctor> diff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LeastSquaresFunctor>> lm(diff);
    lm.parameters.maxfev = max_iter * (problem.dim() + 1);
    lm.parameters.xtol = 1e-13;
    lm.parameters.ftol = 1e-13;
    Eigen::VectorXd x = start.x;
    try {
        lm.minimize(x);
    } catch (const std::exception&) {
        return start;
    }
    if (!x.allFinite()) return start;
    Candidate out{x, problem.objective(x)};
    return out.value.objective < start.value.objective ? out : start;
}

struct RestartOutcome {
    Candidate best;
    std::uint64_t seed;
    std::vector<TraceRow> trace;
};

RestartOutcome run_restart(const Problem& problem, int restart) {
    const SearchConfig& cfg = problem.config();
    const std::uint64_t seed = detail::derive_seed(cfg.seed, static_cast<std::uint64_t>(restart));
    std::mt19937_64 rng(seed);
    Eigen::VectorXd x0(problem.dim());
    // Start rates log-uniform on [0.1, 10] / T.
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        const double u = detail::uniform01(rng);
        x0(i) = softplus_inverse(std::exp(std::log(0.1) + u * std::log(100.0)));
    }
    RestartOutcome out{{}, seed, {}};
    // Time-weighted fit first for a good basin, then the plain fit, whose
    // minimiser is closer to the max-norm one.
    const Candidate weighted = least_squares(problem, {x0, problem.objective(x0)}, cfg.lm_iter, true);
    const Candidate lm = least_squares(problem, weighted, cfg.lm_iter, false);
    out.best = nelder_mead(problem, lm, cfg.simplex_step, cfg.max_iter, restart, cfg.trace_every, out.trace);
    const ObjectiveValue& v = out.best.value;
    out.trace.push_back({restart, cfg.max_iter, v.objective, v.terminal_mismatch, v.residual});
    return out;
}

}  // namespace

ObjectiveValue evaluate_rates(const ModelSpec& model, const SearchTargets& targets, const Rates& rates,
                              const SearchConfig& config) {
    validate(model, targets, config);
    const auto grid = residual_grid(config.horizon, config.grid_points, config.t_min_fraction);
    return summarize(evaluate_raw(model, targets, rates, config, grid), config.penalty_weight);
}

SearchResult feasibility_search(const ModelSpec& model, const SearchTargets& targets, const SearchConfig& config) {
    validate(model, targets, config);
    const Problem problem(model, targets, config);

    std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(config.restarts));
    const unsigned workers = std::clamp<unsigned>(config.workers, 1U, static_cast<unsigned>(config.restarts));
    if (workers == 1) {
        for (int i = 0; i < config.restarts; ++i) outcomes[static_cast<std::size_t>(i)] = run_restart(problem, i);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int i = static_cast<int>(w); i < config.restarts; i += static_cast<int>(workers)) {
                    outcomes[static_cast<std::size_t>(i)] = run_restart(problem, i);
                }
            });
        }
    }

    // Deterministic reduction: lowest objective, then lowest restart index.
    std::size_t best = 0;
    double floor = kInf;
    std::vector<RestartSummary> summaries;
    std::vector<TraceRow> trace;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const ObjectiveValue& v = outcomes[i].best.value;
        if (v.objective < outcomes[best].best.value.objective) best = i;
        if (v.terminal_mismatch <= config.target_tolerance) floor = std::min(floor, v.residual);
        summaries.push_back({static_cast<int>(i), outcomes[i].seed, v.objective, v.residual, v.terminal_mismatch});
        trace.insert(trace.end(), outcomes[i].trace.begin(), outcomes[i].trace.end());
    }
    const Candidate& b = outcomes[best].best;
    return SearchResult{model,
                        targets,
                        problem.rates(b.x),
                        b.value.objective,
                        b.value.residual,
                        b.value.terminal_mismatch,
                        floor,
                        config.restarts,
                        std::move(summaries),
                        std::move(trace)};
}

Rates independent_lumped_rates(const ModelSpec& model, const SearchTargets& targets, double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    auto rate = [&](double alpha) { return softplus(alpha) / horizon; };
    if (model.kind == ReducedModel::I) {
        if (model.N < 2) throw std::invalid_argument("Model I needs N >= 2");
        std::vector<double> lambda;
        for (int l = 0; l <= model.N; ++l) lambda.push_back((model.N - l) * rate(targets.alpha));
        return LumpedRatesI(model.N, std::move(lambda));
    }
    const double h = rate(model.kind == ReducedModel::II ? targets.alpha : targets.alpha_hat);
    const double c = rate(model.kind == ReducedModel::II ? targets.alpha : targets.alpha_check);
    OccupancyTable hat(model.M, model.N), check(model.M, model.N);
    for (int m = 0; m <= model.M; ++m) {
        for (int n = 0; n <= model.N; ++n) {
            hat.at(m, n) = (model.M - m) * h;
            check.at(m, n) = (model.N - n) * c;
        }
    }
    return LumpedRatesBi(std::move(hat), std::move(check));
}

}  // namespace corrdef
