#include "detail/scalar_curve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace corrdef::detail {

namespace {

using State = std::array<double, 1>;

}  // namespace

ScalarCurve::ScalarCurve(Rhs rhs, double t_start, double y_start, double horizon,
                         const OdeTolerances& tol, int n_checkpoints)
    : rhs_(std::move(rhs)), horizon_(horizon), tol_(tol) {
    if (!(t_start > 0.0) || !(horizon >= t_start)) {
        throw std::invalid_argument("curve needs 0 < t_start <= horizon");
    }
    cp_t_.push_back(t_start);
    cp_y_.push_back(y_start);
    if (n_checkpoints <= 0 || horizon == t_start) return;

    std::vector<double> times;
    const double ratio = std::pow(horizon / t_start, 1.0 / n_checkpoints);
    for (int i = 1; i < n_checkpoints; ++i) times.push_back(t_start * std::pow(ratio, i));
    times.push_back(horizon);

    State y{y_start};
    auto f = [this](const State& x, State& dx, double t) { dx[0] = rhs_(t, x[0]); };
    integrate_to_times(f, y, t_start, times, tol_, [&](const State& x, double t) {
        cp_t_.push_back(t);
        cp_y_.push_back(x[0]);
    });
}

void ScalarCurve::check_time(double t) const {
    if (!(t >= cp_t_.front()) || t > horizon_ * (1.0 + 1e-12)) {
        throw std::invalid_argument("curve evaluated at t = " + std::to_string(t) +
                                    " outside [" + std::to_string(cp_t_.front()) + ", " +
                                    std::to_string(horizon_) + "]");
    }
}

double ScalarCurve::value(double t) const {
    check_time(t);
    const auto it = std::upper_bound(cp_t_.begin(), cp_t_.end(), t);
    const auto idx = static_cast<std::size_t>(std::distance(cp_t_.begin(), it) - 1);
    if (cp_t_[idx] == t) return cp_y_[idx];
    State y{cp_y_[idx]};
    const double target[] = {t};
    auto f = [this](const State& x, State& dx, double s) { dx[0] = rhs_(s, x[0]); };
    integrate_to_times(f, y, cp_t_[idx], target, tol_, [](const State&, double) {});
    return y[0];
}

std::vector<double> ScalarCurve::values(std::span<const double> times) const {
    std::vector<double> out;
    if (times.empty()) return out;
    check_time(times.front());
    check_time(times.back());
    const auto it = std::upper_bound(cp_t_.begin(), cp_t_.end(), times.front());
    const auto idx = static_cast<std::size_t>(std::distance(cp_t_.begin(), it) - 1);
    State y{cp_y_[idx]};
    auto f = [this](const State& x, State& dx, double s) { dx[0] = rhs_(s, x[0]); };
    out.reserve(times.size());
    integrate_to_times(f, y, cp_t_[idx], times, tol_, [&](const State& x, double) { out.push_back(x[0]); });
    return out;
}

}  // namespace corrdef::detail
