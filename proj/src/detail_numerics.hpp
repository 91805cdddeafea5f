// Shared numeric helpers for the solver translation units: a fixed 5-point
// Gauss-Legendre rule, cubic Hermite tables with a sorted-query hint,
// adaptive Simpson quadrature, and the right-to-left characterizing-ODE
// sweep for exponentially weighted inner/outer integral pairs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "shrinker/rk45.hpp"

namespace shrinker {
namespace detail {

// 5-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};

template <typename F>
double gl5(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) acc += kGlWeight[k] * f(mid + half * kGlNode[k]);
    return acc * half;
}

// ---------------------------------------------------------------------------
// Cubic Hermite interpolation over a strictly increasing node table with a
// cached interval hint (queries arrive in loosely sorted order).
// ---------------------------------------------------------------------------
struct HermiteTable {
    const std::vector<double>* xs = nullptr;
    const std::vector<double>* ys = nullptr;
    const std::vector<double>* ds = nullptr;
    mutable std::size_t hint = 0;

    std::size_t interval(double s) const {
        const auto& x = *xs;
        std::size_t i = std::min(hint, x.size() - 2);
        if (x[i] <= s && s <= x[i + 1]) return i;
        if (i + 2 < x.size() && x[i + 1] <= s && s <= x[i + 2]) return hint = i + 1;
        auto it = std::upper_bound(x.begin(), x.end(), s);
        if (it == x.begin()) return hint = 0;
        std::size_t j = static_cast<std::size_t>(it - x.begin()) - 1;
        return hint = std::min(j, x.size() - 2);
    }

    double value(double s) const {
        const auto& x = *xs;
        const std::size_t i = interval(s);
        const double h = x[i + 1] - x[i];
        const double t = (s - x[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (*ys)[i] * (2 * t3 - 3 * t2 + 1) + (*ds)[i] * h * (t3 - 2 * t2 + t) +
               (*ys)[i + 1] * (-2 * t3 + 3 * t2) + (*ds)[i + 1] * h * (t3 - t2);
    }

    double deriv(double s) const {
        const auto& x = *xs;
        const std::size_t i = interval(s);
        const double h = x[i + 1] - x[i];
        const double t = (s - x[i]) / h;
        const double t2 = t * t;
        return ((*ys)[i] * (6 * t2 - 6 * t) + (*ds)[i] * h * (3 * t2 - 4 * t + 1) +
                (*ys)[i + 1] * (-6 * t2 + 6 * t) + (*ds)[i + 1] * h * (3 * t2 - 2 * t)) /
               h;
    }
};

// Adaptive Simpson with recursion on the classic two-half error estimate.
template <typename F>
double adaptive_simpson_rec(F& f, double a, double m, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, 28);
}

// Node values of the inner integral J(t) = Integral_t^T q e^{-(Q(s)-Q(t))} g ds
// and of its outer cumulative O(t) = Integral_t^T J(tau)/tau^2 dtau (+ seeds),
// by one right-to-left pass of the characterizing system
//     J' = q (J - g),      O' = -J / t^2.
// Decreasing t is the contracting direction for J (a perturbation damps like
// e^{-Integral q}), so the pass is self-stabilizing: local stepper errors are
// flushed instead of accumulating, and the far seed only has to be accurate
// to the step tolerance because its error dies within the first O(1/q) of
// travel.  O rides along at stepper accuracy, which keeps the outer integral
// free of any interpolation-in-J error.  One sweep replaces a per-node
// exponential-weight quadrature; callers cross-check a few J nodes against
// that explicit quadrature.
struct SweepResult {
    std::vector<double> J;
    std::vector<double> O;
};

template <typename Qf, typename Gf>
SweepResult sweep_inner(const std::vector<double>& nodes, double seedJ, double seedO, Qf&& q,
                        Gf&& g) {
    StepperOptions opt;
    opt.rel_tol = opt.abs_tol = 1e-13;
    opt.max_step = 0.5;
    opt.min_step = 1e-14;
    auto rhs = [&](double t, const Vec<2>& y, Vec<2>& dy) {
        dy[0] = q(t) * (y[0] - g(t));
        dy[1] = -y[0] / (t * t);
    };
    SweepResult out;
    out.J.resize(nodes.size());
    out.O.resize(nodes.size());
    Vec<2> cur{seedJ, seedO};
    out.J.back() = cur[0];
    out.O.back() = cur[1];
    for (std::size_t i = nodes.size() - 1; i-- > 0;) {
        cur = solve_to<2>(rhs, nodes[i + 1], cur, nodes[i], opt);
        out.J[i] = cur[0];
        out.O[i] = cur[1];
    }
    return out;
}

}  // namespace detail
}  // namespace shrinker
