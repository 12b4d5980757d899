#pragma once

// Embedded Dormand-Prince 5(4) integrator for matrix-valued linear ODEs.

#include <algorithm>
#include <cmath>
#include <functional>

#include "errors.hpp"

namespace nesslab {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double dt_max = 0.1;
    double dt_min = 1e-12;
    double dt_initial = 1e-3;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    double last_dt = 0.0;
};

/// Integrates y' = f(y) from t0 to t1 with error control on max-abs entries.
/// `after_step(t, y, dydt)` runs after each accepted step (dydt evaluated at
/// the new point); returning true stops the integration early and t is left
/// at the stopping time.
template <class State, class Rhs, class Hook>
State dopri5(const Rhs& f, State y, double& t, double t1, const OdeOptions& opt, OdeStats& stats,
             Hook&& after_step) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2; (void)c3; (void)c4; (void)c5;

    if (t1 <= t) return y;
    double dt = std::min({opt.dt_initial, opt.dt_max, t1 - t});
    State k1 = f(y);
    while (t < t1) {
        const bool last = t + dt >= t1;
        if (last) dt = t1 - t;
        const State k2 = f(State(y + dt * (a21 * k1)));
        const State k3 = f(State(y + dt * (a31 * k1 + a32 * k2)));
        const State k4 = f(State(y + dt * (a41 * k1 + a42 * k2 + a43 * k3)));
        const State k5 = f(State(y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
        const State k6 = f(State(y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
        State y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const State k7 = f(y_new);
        const State err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double scale = opt.atol + opt.rtol * std::max(y.cwiseAbs().maxCoeff(), y_new.cwiseAbs().maxCoeff());
        const double ratio = err.cwiseAbs().maxCoeff() / scale;
        if (ratio <= 1.0 || dt <= opt.dt_min) {
            if (ratio > 1.0) throw StiffnessError("dopri5: step size underflow", t, dt);
            t = last ? t1 : t + dt;
            y = std::move(y_new);
            k1 = k7;
            ++stats.accepted;
            stats.last_dt = dt;
            if (after_step(t, y, k1)) return y;
        } else {
            ++stats.rejected;
        }
        const double factor = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
        dt = std::min(dt * factor, opt.dt_max);
        if (dt < opt.dt_min) throw StiffnessError("dopri5: step size underflow", t, dt);
    }
    return y;
}

template <class State, class Rhs>
State dopri5(const Rhs& f, State y, double& t, double t1, const OdeOptions& opt, OdeStats& stats) {
    return dopri5(f, std::move(y), t, t1, opt, stats, [](double, const State&, const State&) { return false; });
}

}  // namespace nesslab
