#pragma once

#include "detail/ode.hpp"

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace corrdef::detail {

/// Solution of a scalar ODE y' = f(t, y) on [t_start, horizon], stored as a
/// set of checkpoints. Point queries integrate from the nearest checkpoint at
/// or below t, so every returned value carries the integrator's error control.
class ScalarCurve {
public:
    using Rhs = std::function<double(double t, double y)>;

    ScalarCurve(Rhs rhs, double t_start, double y_start, double horizon, const OdeTolerances& tol,
                int n_checkpoints);

    double value(double t) const;
    /// Values at nondecreasing times in a single sweep.
    std::vector<double> values(std::span<const double> times) const;
    double slope(double t, double y) const { return rhs_(t, y); }

    double t_start() const noexcept { return cp_t_.front(); }
    double horizon() const noexcept { return horizon_; }

private:
    void check_time(double t) const;

    Rhs rhs_;
    double horizon_;
    OdeTolerances tol_;
    std::vector<double> cp_t_;
    std::vector<double> cp_y_;
};

}  // namespace corrdef::detail
