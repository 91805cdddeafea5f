#pragma once

// Embedded Dormand-Prince 5(4) stepper with PI step-size control.
//
// The stepper is deliberately small: fixed-size state vectors, a signed
// step (integration may run toward larger or smaller abscissa), FSAL reuse
// of the last stage, and a callback invoked after every accepted step.
// Event handling, axis snapping and sample bookkeeping live with the
// callers; this header knows nothing about the geometry.
//
// The scalar type is a template parameter.  Profile-curve integration runs
// in long double: the flow linearized around the cylinder line has a mode
// growing like exp(s^2/4), so per-step arithmetic roundoff is amplified by
// roughly 7e10 over an arclength-10 window and double internals would leave
// over 1e-7 of drift on what should be an exactly constant solution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include "config.hpp"

namespace shrinker {

template <std::size_t N, typename S = double>
using VecT = std::array<S, N>;

template <std::size_t N>
using Vec = VecT<N, double>;

enum class StepOutcome {
    reached_target,   // integration arrived at the requested abscissa
    halted,           // the per-step callback asked to stop
    step_underflow,   // tolerance unreachable above the minimum step size
};

struct StepperOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double max_step = 0.1;
    double min_step = 1e-12;

    static StepperOptions from(const DomainConfig& cfg) {
        return StepperOptions{cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.min_step};
    }
};

namespace dopri {

// Butcher tableau of the Dormand-Prince 5(4) pair.  The coefficients are
// stored double-rounded; that perturbs the weights at the 1e-17 level,
// which only nudges the method's error constants and does not feed the
// kind of absolute roundoff injection the long double path exists to
// suppress.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th- and 4th-order weights, used for the error
// estimate (the e2 entry is zero and omitted).
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace dopri

// One attempted Dormand-Prince step from (t, y) with signed step h.
// k1 must hold f(t, y) on entry; on success k7 holds f(t+h, y_new) for
// FSAL reuse.  Returns the scaled error norm of the embedded pair.
template <std::size_t N, typename S, typename RHS>
S dopri_attempt(RHS&& f, S t, const VecT<N, S>& y, S h, const VecT<N, S>& k1,
                VecT<N, S>& y_new, VecT<N, S>& k7, const StepperOptions& opt) {
    using namespace dopri;
    VecT<N, S> k2, k3, k4, k5, k6, tmp;

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a21 * k1[i]);
    f(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                             a65 * k5[i]);
    f(t + h, tmp, k6);
    for (std::size_t i = 0; i < N; ++i)
        y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                               b6 * k6[i]);
    f(t + h, y_new, k7);

    S err_sq = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const S e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                         e7 * k7[i]);
        const S sc = S(opt.abs_tol) + S(opt.rel_tol) * std::max(std::abs(y[i]),
                                                                std::abs(y_new[i]));
        err_sq += (e / sc) * (e / sc);
    }
    return std::sqrt(err_sq / S(N));
}

// Deterministic starting step in the spirit of Hairer-Norsett-Wanner II.4.
template <std::size_t N, typename S, typename RHS>
S initial_step(RHS&& f, S t0, const VecT<N, S>& y0, const VecT<N, S>& f0, S dir,
               const StepperOptions& opt) {
    auto scaled_norm = [&](const VecT<N, S>& v, const VecT<N, S>& ref) {
        S s = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const S sc = S(opt.abs_tol) + S(opt.rel_tol) * std::abs(ref[i]);
            s += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(s / S(N));
    };
    const S d0 = scaled_norm(y0, y0);
    const S d1 = scaled_norm(f0, y0);
    S h0 = (d0 < S(1e-5) || d1 < S(1e-5)) ? S(1e-6) : S(0.01) * d0 / d1;
    h0 = std::min(h0, S(opt.max_step));

    VecT<N, S> y1, f1, df;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y0[i] + dir * h0 * f0[i];
    f(t0 + dir * h0, y1, f1);
    for (std::size_t i = 0; i < N; ++i) df[i] = f1[i] - f0[i];
    const S d2 = scaled_norm(df, y0) / h0;

    S h1;
    if (std::max(d1, d2) <= S(1e-15)) {
        h1 = std::max(S(1e-6), h0 * S(1e-3));
    } else {
        h1 = std::pow(S(0.01) / std::max(d1, d2), S(0.2));
    }
    return std::max(S(opt.min_step), std::min({S(100) * h0, h1, S(opt.max_step)}));
}

// Integrate y' = f(t, y) from t0 to t1 (either direction).  After each
// accepted step `on_step(t_prev, y_prev, t, y, f_t)` runs; returning false
// halts the integration.  The callback receives the derivative at the new
// point so callers can record slopes without extra evaluations.
// `step_limit(t, y)` caps the magnitude of the next attempted step; callers
// use it to force small steps where the right-hand side is about to lose
// smoothness (the rotation axis).
template <std::size_t N, typename S = double, typename RHS, typename Callback,
          typename StepLimit>
StepOutcome integrate_to(RHS&& f, S t0, VecT<N, S> y0, S t1, const StepperOptions& opt,
                         Callback&& on_step, StepLimit&& step_limit) {
    if (t1 == t0) return StepOutcome::reached_target;
    const S dir = (t1 > t0) ? S(1) : S(-1);

    VecT<N, S> k1, k7, y_new;
    f(t0, y0, k1);
    S t = t0;
    S h = initial_step<N, S>(f, t0, y0, k1, dir, opt);
    S prev_err = 1; // neutral seed for the PI controller

    while (dir * (t1 - t) > 0) {
        h = std::min(h, S(opt.max_step));
        h = std::min(h, std::max(step_limit(t, y0), S(2) * S(opt.min_step)));
        bool clipped = false;
        if (h >= dir * (t1 - t)) {
            h = dir * (t1 - t);
            clipped = true;
        }

        const S err = dopri_attempt<N, S>(f, t, y0, dir * h, k1, y_new, k7, opt);
        if (err <= S(1)) {
            const S t_prev = t;
            const VecT<N, S> y_prev = y0;
            t = clipped ? t1 : t + dir * h;
            y0 = y_new;
            k1 = k7; // FSAL
            if (!on_step(t_prev, y_prev, t, y0, k1)) return StepOutcome::halted;

            const S grow =
                S(0.9) * std::pow(std::max(err, S(1e-10)), S(-0.2)) *
                std::pow(prev_err, S(0.04));
            h = h * std::clamp(grow, S(0.2), S(5));
            prev_err = std::max(err, S(1e-10));
        } else {
            // A non-finite error norm (e.g. a stage left the domain of the
            // right-hand side) shrinks at the maximum rate.
            const S shrink = std::isfinite(err)
                                 ? std::clamp(S(0.9) * std::pow(err, S(-0.2)), S(0.1), S(0.9))
                                 : S(0.1);
            h = h * shrink;
            if (h < S(opt.min_step)) return StepOutcome::step_underflow;
        }
        if (h < S(opt.min_step)) return StepOutcome::step_underflow;
    }
    return StepOutcome::reached_target;
}

template <std::size_t N, typename S = double, typename RHS, typename Callback>
StepOutcome integrate_to(RHS&& f, S t0, VecT<N, S> y0, S t1, const StepperOptions& opt,
                         Callback&& on_step) {
    auto no_limit = [](S, const VecT<N, S>&) { return std::numeric_limits<S>::infinity(); };
    return integrate_to<N, S>(std::forward<RHS>(f), t0, std::move(y0), t1, opt,
                              std::forward<Callback>(on_step), no_limit);
}

// Convenience wrapper: integrate to t1 and return the final state.
// Throws solver_error on step underflow.
template <std::size_t N, typename S = double, typename RHS>
VecT<N, S> solve_to(RHS&& f, S t0, const VecT<N, S>& y0, S t1, const StepperOptions& opt) {
    VecT<N, S> out = y0;
    auto keep = [&](S, const VecT<N, S>&, S, const VecT<N, S>& y, const VecT<N, S>&) {
        out = y;
        return true;
    };
    const StepOutcome rc = integrate_to<N, S>(f, t0, y0, t1, opt, keep);
    if (rc == StepOutcome::step_underflow)
        throw solver_error("integrate: step size underflow before reaching target");
    return out;
}

} // namespace shrinker
