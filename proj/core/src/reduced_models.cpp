#include "corrdef/reduced_models.hpp"

#include "detail/ode.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace corrdef {

namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

int popcount(Subset a) { return std::popcount(a); }

}  // namespace

// ---------------------------------------------------------------------------
// Tables

LumpedRatesI::LumpedRatesI(int n, std::vector<double> l) : N(n), lambda(std::move(l)) {
    if (N < 2) throw std::invalid_argument("Model I needs N >= 2");
    if (lambda.size() != static_cast<std::size_t>(N + 1)) {
        throw std::invalid_argument("lambda needs N + 1 entries");
    }
    for (double x : lambda) {
        if (!finite_nonneg(x)) throw std::invalid_argument("lumped rates must be finite and nonnegative");
    }
    if (lambda.back() != 0.0) throw std::invalid_argument("lambda_N must be 0");
}

bool LumpedRatesI::strictly_positive() const {
    return std::all_of(lambda.begin(), lambda.end() - 1, [](double x) { return x > 0.0; });
}

OccupancyTable::OccupancyTable(int M, int N, double fill) : M_(M), N_(N) {
    if (M < 1 || N < 1) throw std::invalid_argument("occupancy table needs M, N >= 1");
    data_.assign(static_cast<std::size_t>((M + 1) * (N + 1)), fill);
}

double OccupancyTable::operator()(int m, int n) const {
    if (m < 0 || n < 0) return 0.0;
    if (m > M_ || n > N_) throw std::out_of_range("occupancy index out of range");
    return data_[static_cast<std::size_t>(m * (N_ + 1) + n)];
}

double& OccupancyTable::at(int m, int n) {
    if (m < 0 || n < 0 || m > M_ || n > N_) throw std::out_of_range("occupancy index out of range");
    return data_[static_cast<std::size_t>(m * (N_ + 1) + n)];
}

LumpedRatesBi::LumpedRatesBi(OccupancyTable h, OccupancyTable c) : hat(std::move(h)), check(std::move(c)) {
    if (hat.M() != check.M() || hat.N() != check.N()) throw std::invalid_argument("hat and check tables differ in shape");
    for (double x : hat.values()) {
        if (!finite_nonneg(x)) throw std::invalid_argument("lumped rates must be finite and nonnegative");
    }
    for (double x : check.values()) {
        if (!finite_nonneg(x)) throw std::invalid_argument("lumped rates must be finite and nonnegative");
    }
    for (int n = 0; n <= N(); ++n) {
        if (hat(M(), n) != 0.0) throw std::invalid_argument("hat rate must vanish at m = M");
    }
    for (int m = 0; m <= M(); ++m) {
        if (check(m, N()) != 0.0) throw std::invalid_argument("check rate must vanish at n = N");
    }
}

bool LumpedRatesBi::strictly_positive() const {
    for (int m = 0; m <= M(); ++m) {
        for (int n = 0; n <= N(); ++n) {
            if (m < M() && !(hat(m, n) > 0.0)) return false;
            if (n < N() && !(check(m, n) > 0.0)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Lumping

LumpedRatesI lump_complete(const MonotoneGenerator& gen) {
    const int N = gen.n_vertices();
    std::vector<double> sum(static_cast<std::size_t>(N + 1), 0.0);
    std::vector<double> count(static_cast<std::size_t>(N + 1), 0.0);
    for (Subset a = 0; a <= full_set(N); ++a) {
        const auto l = static_cast<std::size_t>(popcount(a));
        sum[l] += gen.exit_rate(a);
        count[l] += 1.0;
    }
    for (std::size_t l = 0; l < sum.size(); ++l) sum[l] /= count[l];
    sum.back() = 0.0;
    return LumpedRatesI(N, std::move(sum));
}

LumpedRatesBi lump_bipartite(const MonotoneGenerator& gen, const Bipartition& parts) {
    const int M = static_cast<int>(parts.hat.size());
    const int N = static_cast<int>(parts.check.size());
    if (M + N != gen.n_vertices()) throw std::invalid_argument("bipartition size does not match the generator");
    Subset hat_mask = 0;
    for (int v : parts.hat) hat_mask |= singleton(v);
    if (popcount(hat_mask) != M) throw std::invalid_argument("bipartition repeats a vertex");

    OccupancyTable hat(M, N), check(M, N), count(M, N);
    const int n_all = gen.n_vertices();
    for (Subset a = 0; a <= full_set(n_all); ++a) {
        const int m = popcount(a & hat_mask);
        const int n = popcount(a & ~hat_mask);
        double h = 0.0;
        double c = 0.0;
        for (int v = 0; v < n_all; ++v) {
            if (contains(a, v)) continue;
            (contains(hat_mask, v) ? h : c) += gen.rate(a, v);
        }
        hat.at(m, n) += h;
        check.at(m, n) += c;
        count.at(m, n) += 1.0;
    }
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            hat.at(m, n) /= count(m, n);
            check.at(m, n) /= count(m, n);
        }
    }
    return LumpedRatesBi(std::move(hat), std::move(check));
}

std::variant<LumpedRatesI, LumpedRatesBi> lump_generator(const MonotoneGenerator& gen, const Graph& symmetry) {
    if (symmetry.n_vertices() != gen.n_vertices()) {
        throw std::invalid_argument("symmetry graph and generator disagree on the vertex count");
    }
    if (symmetry.bipartition() && symmetry.is_complete_bipartite()) {
        return lump_bipartite(gen, *symmetry.bipartition());
    }
    if (symmetry.is_complete()) return lump_complete(gen);
    throw std::invalid_argument("lumping needs a complete or complete bipartite graph");
}

MonotoneGenerator symmetric_generator(const LumpedRatesI& lumped) {
    const int N = lumped.N;
    return MonotoneGenerator::from_function(N, [&](Subset a, int) {
        const int l = popcount(a);
        return lumped[l] / (N - l);
    });
}

MonotoneGenerator symmetric_generator(const LumpedRatesBi& lumped) {
    const int M = lumped.M();
    const int N = lumped.N();
    const Subset hat_mask = full_set(M);
    return MonotoneGenerator::from_function(M + N, [&](Subset a, int v) {
        const int m = popcount(a & hat_mask);
        const int n = popcount(a & ~hat_mask);
        return v < M ? lumped.hat(m, n) / (M - m) : lumped.check(m, n) / (N - n);
    });
}

std::vector<std::vector<double>> occupancy_law(const LumpedRatesI& lumped, std::span<const double> t_grid,
                                               const ForwardOptions& options) {
    if (t_grid.empty()) return {};
    if (!(t_grid.front() >= 0.0)) throw std::invalid_argument("times must be nonnegative");
    const int N = lumped.N;
    detail::OdeTolerances tol{options.rtol, options.atol,
                              options.max_step > 0.0 ? options.max_step : std::max(t_grid.back(), 1e-300) / 100.0};
    std::vector<double> p(static_cast<std::size_t>(N + 1), 0.0);
    p[0] = 1.0;
    auto rhs = [&](const std::vector<double>& x, std::vector<double>& dx, double) {
        dx.resize(x.size());
        for (int l = 0; l <= N; ++l) {
            dx[static_cast<std::size_t>(l)] =
                lumped[l - 1] * (l > 0 ? x[static_cast<std::size_t>(l - 1)] : 0.0) - lumped[l] * x[static_cast<std::size_t>(l)];
        }
    };
    std::vector<std::vector<double>> out;
    detail::integrate_to_times(rhs, p, 0.0, t_grid, tol, [&](const std::vector<double>& x, double) { out.push_back(x); });
    return out;
}

// ---------------------------------------------------------------------------
// Model I

namespace {

PairRates model_i_pair_rates(double l0, double l1, double l2, int N) {
    if (N < 2) throw std::invalid_argument("Model I needs N >= 2");
    if (!(l0 > 0.0) || !(l1 > 0.0) || !(l2 >= 0.0) || !std::isfinite(l0 + l1 + l2)) {
        throw std::invalid_argument("Model I curves need lambda_0, lambda_1 > 0 and lambda_2 >= 0");
    }
    if (N > 2 && !(l2 > 0.0)) throw std::invalid_argument("Model I curves need lambda_2 > 0");
    const double q = l0 / N;
    const double q_pair = l1 / (N - 1);
    return {q, q, q_pair, q_pair, l0, l1, l1, l2};
}

}  // namespace

ModelICurves::ModelICurves(double l0, double l1, double l2, int N, double horizon, const CurveOptions& options)
    : lambda_{l0, l1, l2}, N_(N), pair_(model_i_pair_rates(l0, l1, l2, N), horizon, options) {}

ReducedPointI ModelICurves::point(double t, const PairCurve::Value& b) const {
    const AlphaValue a = alpha_curve(lambda_[0] / N_, lambda_[0], lambda_[1], t);
    return {t, a.alpha, a.alpha_prime, a.exp_alpha, b.beta, b.beta_prime};
}

ReducedPointI ModelICurves::at(double t) const { return point(t, pair_.at(t)); }

std::vector<ReducedPointI> ModelICurves::on_grid(std::span<const double> times) const {
    const auto betas = pair_.on_grid(times);
    std::vector<ReducedPointI> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back(point(times[i], betas[i]));
    return out;
}

std::vector<ReducedPointI> reduced_curves_I(double l0, double l1, double l2, int N, std::span<const double> t_grid,
                                            double horizon, const CurveOptions& options) {
    CurveOptions one_pass = options;
    one_pass.checkpoints = 0;
    return ModelICurves(l0, l1, l2, N, horizon, one_pass).on_grid(t_grid);
}

std::vector<double> residual_I(const LumpedRatesI& lumped, const ReducedPointI& p) {
    const int N = lumped.N;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(N));
    for (int k = 1; k <= N; ++k) {
        const double lhs = k * p.alpha_prime + 0.5 * k * (k - 1) * p.beta_prime;
        const double jump = lumped[k - 1] * k / (N - k + 1) * std::exp(-p.alpha - (k - 1) * p.beta);
        out.push_back(lhs - (lumped[0] - lumped[k]) - jump);
    }
    return out;
}

std::vector<double> residual_I(const LumpedRatesI& lumped, const ModelICurves& curves, double t) {
    if (curves.N() != lumped.N || curves.lambda(0) != lumped[0] || curves.lambda(1) != lumped[1] ||
        curves.lambda(2) != lumped[2]) {
        throw std::invalid_argument("curves were built from different lumped rates");
    }
    if (!(t > 0.0)) throw std::invalid_argument("residual time must be positive");
    return residual_I(lumped, curves.at(t));
}

std::vector<CoeffRowI> coeff_check_I(const LumpedRatesI& lumped, double beta_star) {
    const int N = lumped.N;
    std::vector<CoeffRowI> rows;
    for (int k = 0; k <= N; ++k) {
        const double linear = k * (lumped[1] - lumped[0]) + lumped[0];
        const double exponential = static_cast<double>(N - k) / N * lumped[0] * std::exp(k * beta_star);
        rows.push_back({k, lumped[k], linear, exponential, linear - exponential});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Model II

namespace {

void require_curve_rates(const LumpedRatesBi& l) {
    if (!(l.hat(0, 0) > 0.0) || !(l.check(0, 0) > 0.0)) {
        throw std::invalid_argument("bipartite curves need hat(0,0) > 0 and check(0,0) > 0");
    }
    if (!(l.hat(0, 1) > 0.0) && !(l.check(1, 0) > 0.0)) {
        throw std::invalid_argument("bipartite curves need hat(0,1) or check(1,0) positive");
    }
}

PairRates model_ii_pair_rates(const LumpedRatesBi& l) {
    require_curve_rates(l);
    const int M = l.M();
    const int N = l.N();
    // Both endpoints carry the hat-side alpha; the check side only enters
    // through the jump rates of the (1,1) equation.
    const double q = l.hat(0, 0) / M;
    return {q, q, l.check(1, 0) / N, l.hat(0, 1) / M, l.r(), l.total(1, 0), l.total(1, 0), l.total(1, 1)};
}

PairRates model_iii_pair_rates(const LumpedRatesBi& l) {
    require_curve_rates(l);
    const int M = l.M();
    const int N = l.N();
    return {l.hat(0, 0) / M, l.check(0, 0) / N, l.check(1, 0) / N, l.hat(0, 1) / M,
            l.r(),           l.total(1, 0),     l.total(0, 1),     l.total(1, 1)};
}

bool same_tables(const LumpedRatesBi& a, const LumpedRatesBi& b) {
    return a.M() == b.M() && a.N() == b.N() && std::ranges::equal(a.hat.values(), b.hat.values()) &&
           std::ranges::equal(a.check.values(), b.check.values());
}

}  // namespace

ModelIICurves::ModelIICurves(const LumpedRatesBi& lumped, double horizon, const CurveOptions& options)
    : lumped_(lumped),
      identity_violation_(lumped.hat(0, 0) / lumped.M() - lumped.check(0, 0) / lumped.N()),
      pair_(model_ii_pair_rates(lumped), horizon, options) {}

ReducedPointII ModelIICurves::point(double t, const PairCurve::Value& b) const {
    const AlphaValue a = alpha_curve(lumped_.hat(0, 0) / lumped_.M(), lumped_.r(), lumped_.total(1, 0), t);
    return {t, a.alpha, a.alpha_prime, a.exp_alpha, b.beta, b.beta_prime};
}

ReducedPointII ModelIICurves::at(double t) const { return point(t, pair_.at(t)); }

std::vector<ReducedPointII> ModelIICurves::on_grid(std::span<const double> times) const {
    const auto betas = pair_.on_grid(times);
    std::vector<ReducedPointII> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back(point(times[i], betas[i]));
    return out;
}

std::vector<ReducedPointII> reduced_curves_II(const LumpedRatesBi& lumped, std::span<const double> t_grid,
                                              double horizon, const CurveOptions& options) {
    CurveOptions one_pass = options;
    one_pass.checkpoints = 0;
    return ModelIICurves(lumped, horizon, one_pass).on_grid(t_grid);
}

OccupancyTable residual_II(const LumpedRatesBi& l, const ReducedPointII& p) {
    const int M = l.M();
    const int N = l.N();
    OccupancyTable out(M, N);
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            if (m == 0 && n == 0) continue;
            const double lhs = (m + n) * p.alpha_prime + m * n * p.beta_prime;
            double rhs = l.r() - l.total(m, n);
            if (m > 0) rhs += m * l.hat(m - 1, n) / (M - m + 1) * std::exp(-p.alpha - n * p.beta);
            if (n > 0) rhs += n * l.check(m, n - 1) / (N - n + 1) * std::exp(-p.alpha - m * p.beta);
            out.at(m, n) = lhs - rhs;
        }
    }
    return out;
}

OccupancyTable residual_II(const LumpedRatesBi& lumped, const ModelIICurves& curves, double t) {
    if (!same_tables(lumped, curves.lumped())) throw std::invalid_argument("curves were built from different lumped rates");
    if (!(t > 0.0)) throw std::invalid_argument("residual time must be positive");
    return residual_II(lumped, curves.at(t));
}

double coeff_check_II(int M, int N, double beta_star) { return coeff_check_II_details(M, N, beta_star).scalar; }

CoeffDetailII coeff_check_II_details(int M, int N, double beta_star) {
    if (M < 1 || N < 1) throw std::invalid_argument("coefficient check needs M, N >= 1");
    CoeffDetailII d{M, N, 1.0, 0.0, 0.0, 0.0, false};
    // The system is symmetric in the two classes; the (2,0) route needs two
    // vertices on the hat side.
    int m_side = M;
    int n_side = N;
    if (M < 2 && N >= 2) {
        std::swap(m_side, n_side);
        d.swapped_classes = true;
    }
    const double mm = m_side;
    const double nn = n_side;
    const double hat00 = d.hat00;
    const double check01 = (nn - 1.0) / mm * hat00;
    d.check10_from_11 = nn * (check01 / mm + hat00 / mm * (2.0 * std::exp(beta_star) - (mm + nn - 1.0) / mm));
    d.check10_from_20 = m_side >= 2
                            ? (mm - 1.0) / 2.0 * (hat00 / mm) * (2.0 * (mm + nn - 1.0) / (mm - 1.0) - 2.0)
                            : nn / mm * hat00;
    // (from_11 - from_20) / ((N/M) hat00) simplifies to 2 e^{beta*} - 2.
    d.scalar = 2.0 * std::expm1(beta_star);
    return d;
}

namespace {

// Row/column bookkeeping for the forced bipartite system. The unknowns are
// the check rates check(m, n), 0 <= m <= M, 0 <= n < N; hat rates follow
// from the sum constraint.
struct ForcedIndex {
    int M;
    int N;
    int col(int m, int n) const { return m * N + n; }
    int cols() const { return (M + 1) * N; }
};

double sum_target(int M, int N, double hat00, int m, int n) {
    // r (1 - (m+n)/(M+N)) with r = hat00 (M+N)/M.
    return hat00 * (M + N - m - n) / M;
}

}  // namespace

double forced_system_residual_II(const OccupancyTable& hat, const OccupancyTable& check, double beta) {
    const int M = hat.M();
    const int N = hat.N();
    const double hat00 = hat(0, 0);
    double worst = 0.0;
    auto note = [&](double v) { worst = std::max(worst, std::abs(v)); };
    for (int m = 1; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            const double lhs = n * check(m, n - 1) / (N - n + 1) * std::exp((n - m) * beta) -
                               m * check(m - 1, n) / (M - m + 1);
            const double rhs = hat00 / M * ((m + n) * std::exp(n * beta) -
                                            static_cast<double>(m) * (M + N - m - n + 1) / (M - m + 1));
            note(lhs - rhs);
        }
    }
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) note(hat(m, n) + check(m, n) - sum_target(M, N, hat00, m, n));
    }
    for (int n = 0; n <= N; ++n) note(hat(M, n));
    for (int m = 0; m <= M; ++m) note(check(m, N));
    for (int n = 0; n <= N; ++n) note(check(0, n) - static_cast<double>(N - n) / M * hat00);
    for (int m = 0; m <= M; ++m) note(hat(m, 0) - static_cast<double>(M - m) / M * hat00);
    return worst;
}

ForcedSolveII solve_forced_system_II(int M, int N, double beta, double hat00) {
    if (M < 1 || N < 1) throw std::invalid_argument("forced system needs M, N >= 1");
    if (!(hat00 > 0.0)) throw std::invalid_argument("hat(0,0) must be positive");
    const ForcedIndex ix{M, N};
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    auto add = [&](Eigen::VectorXd row, double b) {
        rows.push_back(std::move(row));
        rhs.push_back(b);
    };
    auto zero_row = [&] { return Eigen::VectorXd::Zero(ix.cols()); };

    // First equation, with check(m, -1) = 0 and check(m, N) = 0 dropped.
    for (int m = 1; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            Eigen::VectorXd row = zero_row();
            if (n > 0) row(ix.col(m, n - 1)) += n / static_cast<double>(N - n + 1) * std::exp((n - m) * beta);
            if (n < N) row(ix.col(m - 1, n)) -= m / static_cast<double>(M - m + 1);
            add(std::move(row), hat00 / M * ((m + n) * std::exp(n * beta) -
                                             static_cast<double>(m) * (M + N - m - n + 1) / (M - m + 1)));
        }
    }
    // check(0, n) forced.
    for (int n = 0; n < N; ++n) {
        Eigen::VectorXd row = zero_row();
        row(ix.col(0, n)) = 1.0;
        add(std::move(row), static_cast<double>(N - n) / M * hat00);
    }
    // hat(m, 0) forced, through the sum constraint.
    for (int m = 0; m <= M; ++m) {
        Eigen::VectorXd row = zero_row();
        row(ix.col(m, 0)) = 1.0;
        add(std::move(row), sum_target(M, N, hat00, m, 0) - static_cast<double>(M - m) / M * hat00);
    }
    // hat(M, n) = 0, through the sum constraint.
    for (int n = 0; n < N; ++n) {
        Eigen::VectorXd row = zero_row();
        row(ix.col(M, n)) = 1.0;
        add(std::move(row), sum_target(M, N, hat00, M, n));
    }

    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), ix.cols());
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        b(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    const Eigen::VectorXd x = A.completeOrthogonalDecomposition().solve(b);

    OccupancyTable hat(M, N), check(M, N);
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            check.at(m, n) = n < N ? x(ix.col(m, n)) : 0.0;
            hat.at(m, n) = sum_target(M, N, hat00, m, n) - check(m, n);
        }
    }
    const double residual = forced_system_residual_II(hat, check, beta);
    return {std::move(hat), std::move(check), residual};
}

// ---------------------------------------------------------------------------
// Model III

ModelIIICurves::ModelIIICurves(const LumpedRatesBi& lumped, double horizon, const CurveOptions& options)
    : lumped_(lumped), pair_(model_iii_pair_rates(lumped), horizon, options) {}

ReducedPointIII ModelIIICurves::point(double t, const PairCurve::Value& b) const {
    const LumpedRatesBi& l = lumped_;
    const AlphaValue ah = alpha_curve(l.hat(0, 0) / l.M(), l.r(), l.total(1, 0), t);
    const AlphaValue ac = alpha_curve(l.check(0, 0) / l.N(), l.r(), l.total(0, 1), t);
    return {t, ah.alpha, ah.alpha_prime, ah.exp_alpha, ac.alpha, ac.alpha_prime, ac.exp_alpha, b.beta, b.beta_prime};
}

ReducedPointIII ModelIIICurves::at(double t) const { return point(t, pair_.at(t)); }

std::vector<ReducedPointIII> ModelIIICurves::on_grid(std::span<const double> times) const {
    const auto betas = pair_.on_grid(times);
    std::vector<ReducedPointIII> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back(point(times[i], betas[i]));
    return out;
}

std::vector<ReducedPointIII> reduced_curves_III(const LumpedRatesBi& lumped, std::span<const double> t_grid,
                                                double horizon, const CurveOptions& options) {
    CurveOptions one_pass = options;
    one_pass.checkpoints = 0;
    return ModelIIICurves(lumped, horizon, one_pass).on_grid(t_grid);
}

OccupancyTable residual_III(const LumpedRatesBi& l, const ReducedPointIII& p) {
    const int M = l.M();
    const int N = l.N();
    OccupancyTable out(M, N);
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            if (m == 0 && n == 0) continue;
            const double lhs = m * p.alpha_hat_prime + n * p.alpha_check_prime + m * n * p.beta_prime;
            double rhs = l.r() - l.total(m, n);
            if (m > 0) rhs += m * l.hat(m - 1, n) / (M - m + 1) * std::exp(-p.alpha_hat - n * p.beta);
            if (n > 0) rhs += n * l.check(m, n - 1) / (N - n + 1) * std::exp(-p.alpha_check - m * p.beta);
            out.at(m, n) = lhs - rhs;
        }
    }
    return out;
}

OccupancyTable residual_III(const LumpedRatesBi& lumped, const ModelIIICurves& curves, double t) {
    if (!same_tables(lumped, curves.lumped())) throw std::invalid_argument("curves were built from different lumped rates");
    if (!(t > 0.0)) throw std::invalid_argument("residual time must be positive");
    return residual_III(lumped, curves.at(t));
}

LumpedRatesBi forced_table_III(int M, int N, double beta, double hat00, double check00) {
    if (!(hat00 > 0.0) || !(check00 > 0.0)) throw std::invalid_argument("forced table needs positive base rates");
    OccupancyTable hat(M, N), check(M, N);
    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            hat.at(m, n) = static_cast<double>(M - m) / M * hat00 * std::exp(n * beta);
            check.at(m, n) = static_cast<double>(N - n) / N * check00 * std::exp(m * beta);
        }
    }
    return LumpedRatesBi(std::move(hat), std::move(check));
}

CoeffReportIII coeff_check_III(const LumpedRatesBi& l, double beta) {
    const int M = l.M();
    const int N = l.N();
    const double r = l.r();
    const double s10 = l.total(1, 0);
    const double s01 = l.total(0, 1);
    CoeffReportIII rep{OccupancyTable(M, N), OccupancyTable(M, N), OccupancyTable(M, N), 0.0, true,
                       0.0, 0.0, 0.0, 0.0, {}, 0, 0, -1, false};

    double scale = r;
    for (double x : l.hat.values()) scale = std::max(scale, x);
    for (double x : l.check.values()) scale = std::max(scale, x);
    const double tol = 1e-10 * std::max(scale, 1.0);

    for (int m = 0; m <= M; ++m) {
        for (int n = 0; n <= N; ++n) {
            const double a = m * (r - s10) + n * (r - s01) + l.total(m, n) - r;
            double b = 0.0;
            double c = 0.0;
            if (m > 0) b = m * l.hat(0, 0) / M - m * l.hat(m - 1, n) * std::exp(-n * beta) / (M - m + 1);
            if (n > 0) c = n * l.check(0, 0) / N - n * l.check(m, n - 1) * std::exp(-m * beta) / (N - n + 1);
            rep.a.at(m, n) = a;
            rep.b.at(m, n) = b;
            rep.c.at(m, n) = c;
            rep.max_condition_violation =
                std::max({rep.max_condition_violation, std::abs(a), std::abs(b), std::abs(c)});
        }
    }
    rep.conditions_hold = rep.max_condition_violation <= tol;

    // With the exponential forms of the tables substituted, the diagonal
    // (k, k) equation reads
    //   e^{k beta} (r - k (hat00/M + check00/N)) = r - k (2r - S10 - S01).
    rep.A = l.hat(0, 0) / M + l.check(0, 0) / N;
    rep.B = -r;
    rep.C = s10 + s01 - 2.0 * r;
    rep.D = r;
    const int K = std::min(M, N);
    for (int k = 0; k <= K; ++k) {
        const double e = std::exp(k * beta);
        const double res = rep.A * k * e + rep.B * e + rep.C * k + rep.D;
        rep.diagonal_residuals.push_back(res);
        if (std::abs(res) <= tol) ++rep.satisfied_points;
    }
    rep.demanded_points = K + 1;

    if (beta != 0.0) {
        // (A x + B) e^{beta x} has second derivative
        // beta e^{beta x} (beta (A x + B) + 2 A), which changes sign at most once.
        const double inflection = -rep.B / rep.A - 2.0 / beta;
        rep.intersection_bound = (inflection > 0.0 && inflection < K) ? 3 : 2;
        rep.inconsistent = rep.demanded_points > rep.intersection_bound;
    }
    return rep;
}

}  // namespace corrdef
