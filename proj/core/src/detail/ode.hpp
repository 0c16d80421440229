#pragma once

// Thin wrapper over Boost.Odeint's controlled Dormand-Prince 5(4) stepper.
// Integration always stops exactly on the requested times (no dense-output
// interpolation), so observed values carry the stepper's own error control.

#include "corrdef/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace corrdef::detail {

struct OdeTolerances {
    double rtol = 1e-9;
    double atol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
};

template <class State>
bool all_finite(const State& x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Integrates x' = rhs(x, dxdt, t) from t0, calling observe(x, t) at each
/// requested time (which must be nondecreasing and >= t0).
template <class State, class Rhs, class Observer>
void integrate_to_times(Rhs&& rhs, State& x, double t0, std::span<const double> times,
                        const OdeTolerances& tol, Observer&& observe) {
    namespace ode = boost::numeric::odeint;
    using Stepper = ode::runge_kutta_dopri5<State>;
    auto stepper = ode::make_controlled(tol.atol, tol.rtol, tol.max_step, Stepper());

    auto system = [&rhs](const State& y, State& dydt, double t) { rhs(y, dydt, t); };

    double t = t0;
    double dt = 0.0;
    for (double target : times) {
        if (target < t) throw std::invalid_argument("integration times must be nondecreasing");
        if (target > t) {
            if (dt <= 0.0) dt = std::min((target - t) * 1e-2, tol.max_step);
            try {
                // integrate_adaptive lands exactly on `target`.
                ode::integrate_adaptive(stepper, system, x, t, target, dt);
            } catch (const std::exception& e) {
                throw IntegrationFailure(std::string("ODE step failure: ") + e.what());
            }
            if (!all_finite(x)) {
                throw IntegrationFailure("ODE solution left the finite range at t = " +
                                         std::to_string(target));
            }
            t = target;
        }
        observe(x, t);
    }
}

}  // namespace corrdef::detail
