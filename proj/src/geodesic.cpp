// Profile-curve integration for rotationally symmetric shrinkers.
//
// The integrator below treats the rotation axis {r = 0} with some care:
// the alpha/r term in the turning rate is a removable singularity exactly
// when the curve meets the axis orthogonally, and every solution that
// reaches the axis does so orthogonally.  Near such a pole the solution
// admits the local expansion (h = arclength from the pole, ascending leg)
//
//     r(h) = h + O(h^3),
//     x(h) = x_b - x_b h^2 / (4 alpha + 4) + O(h^4),
//     theta(h) = theta_b + theta_dot_b h + O(h^3),
//     theta_dot_b = x_b sin(theta_b) / (2 alpha + 2),
//
// which the code uses both to launch trajectories from the axis and to
// snap terminal samples onto it.

#include "shrinker/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>

#include "shrinker/log.hpp"
#include "shrinker/rk45.hpp"

namespace shrinker {

namespace {

constexpr double kAxisTaylorStep = 1e-5;

// Fallback pole snap: radius below r_axis_eps with the tangent within this
// cosine of vertical.  The primary detection happens much earlier (see
// try_predictive_snap); this window only catches approaches that slipped
// past it, since off-orthogonal contamination grows like r^(-alpha) and for
// larger alpha no finite tolerance survives down to r ~ 1e-6.
constexpr double kAxisCosTol = 1e-4;

// Predictive pole snap: once the radius is below this (and below a series
// validity bound depending on the turning rate), compare the state against
// the pole expansion and extrapolate to the axis if it matches.
constexpr double kAxisSnapRadius = 0.05;

// Quick rejection threshold for the angle residual against the pole series.
// The residual on a true approach is the r^(-alpha)-amplified integration
// noise, which can reach ~1e-3 after several axis passages; only residuals
// clearly in swing territory are rejected without the verification fit.
constexpr double kAxisSnapSeriesReject = 5e-2;

// The pole fit matches the re-traced outgoing branch against an "anchor"
// sample recorded on the way down, at the largest radius not exceeding this
// value.  Up there the approach is still clean: the amplified contamination
// seen at the gate radius scales back down by (r_gate / r_anchor)^alpha.
constexpr double kAnchorRadius = 0.45;

// Acceptance for the secant fit of the pole abscissa: residual position
// mismatch at the anchor, and angle mismatch there.  True hits converge to
// ~1e-12 / ~1e-9; the angle test rejects shallow swings, whose turn shows
// up in the angle at the anchor long before it shows in the position.
constexpr double kSnapFitTol = 1e-8;
constexpr double kSnapThetaTol = 1e-4;

// Profile curves integrate in extended precision.  Around the cylinder line
// the flow has a mode growing like exp(s^2/4); double-precision roundoff
// injected near s = 0 surfaces as ~1e-7 drift by s = 10, which is visible
// next to the integration tolerances.  States are recorded in double.
using Real = long double;
using V3 = VecT<3, Real>;

// Raw first-order system in arclength: y = (x, r, theta).
// Returns NaN in the turning rate for r <= 0 so the error estimator rejects
// any stage that penetrates the axis; the snap logic handles legitimate
// axis approaches before the radius gets that small.
struct GeoSystem {
    Real alpha;

    void operator()(Real /*s*/, const V3& y, V3& dy) const {
        const Real r = y[1];
        const Real c = std::cos(y[2]);
        const Real sn = std::sin(y[2]);
        dy[0] = c;
        dy[1] = sn;
        dy[2] = (r > 0) ? Real(0.5) * y[0] * sn + (alpha / r - Real(0.5) * r) * c
                        : std::numeric_limits<Real>::quiet_NaN();
    }
};

// Off-orthogonal contamination of a pole approach is amplified like
// r^(-alpha) as the radius shrinks, so the integrator must not coast
// through the low-radius band at its cruising step size: capping the step
// at r/4 keeps per-step truncation error small there and guarantees the
// first sample inside the snap gate lands near the gate radius instead of
// far below it.
Real axis_step_limit(Real /*s*/, const V3& y) {
    const Real r = y[1];
    if (r < Real(0.25)) return std::max(r / 4, Real(1e-9));
    return std::numeric_limits<Real>::infinity();
}

double snap_theta_vertical(double theta) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    return half_pi + std::numbers::pi * std::round((theta - half_pi) / std::numbers::pi);
}

// Given a sample close to the axis with nearly vertical tangent, extrapolate
// to the pole itself using the quadratic expansion of x(r).
State snap_to_axis(const State& near, const DomainConfig& cfg) {
    State pole;
    const double denom = 1.0 - near.r * near.r / (4.0 * cfg.alpha + 4.0);
    pole.x = near.x / denom;
    pole.r = 0.0;
    pole.s = near.s + near.r;  // ds = dr + O(r^3) on an orthogonal approach
    pole.theta = snap_theta_vertical(near.theta);
    return pole;
}

// Local expansion around a pole at (x_b, 0) with vertical angle theta_b,
// parametrized by arclength h measured away from the pole along either the
// incoming or the outgoing side (the two sides obey the same series):
//
//   theta(h) = theta_b + a1 h + a3 h^3 + O(h^5),
//   x(h)     = x_b - (a1/2) h^2 - ((a3 - a1^3/6)/4) h^4 + O(h^6),
//   r(h)     = h - (a1^2/6) h^3 + O(h^5),
//   a1 = x_b / (2 alpha + 2),   a3 = a1 (1 - x_b a1) / (4 (3 + alpha)).
//
// (On the round-sphere solution x_b^2 = 2 alpha + 2 makes a3 vanish and the
// angle exactly linear in arclength, a useful spot check.)
struct PoleSeries {
    double a1 = 0;
    double a3 = 0;

    PoleSeries(double x_b, double alpha) {
        a1 = x_b / (2.0 * alpha + 2.0);
        a3 = a1 * (1.0 - x_b * a1) / (4.0 * (3.0 + alpha));
    }

    double theta_offset(double h) const { return a1 * h + a3 * h * h * h; }
    double x_offset(double h) const {
        const double h2 = h * h;
        return -0.5 * a1 * h2 - 0.25 * (a3 - a1 * a1 * a1 / 6.0) * h2 * h2;
    }
    double arclength_from_radius(double r) const {
        return r * (1.0 + a1 * a1 * r * r / 6.0);
    }
};

// First sample of an axis-started trajectory, one Taylor step off the pole.
State axis_taylor_state(const State& pole, const DomainConfig& cfg) {
    const double h = kAxisTaylorStep;
    const PoleSeries series(pole.x, cfg.alpha);
    State st;
    st.s = pole.s + h;
    st.r = h;
    st.x = pole.x + series.x_offset(h);
    st.theta = pole.theta + series.theta_offset(h);
    return st;
}

// Trace the outgoing branch of a trial pole until its radius first reaches
// r_target, and return the state there together with the arclength covered
// from the pole.  Since |dr/ds| <= 1, advancing by the remaining radius gap
// can never overshoot the target, which gives a derivative-free closure
// loop.  Returns nullopt if the branch turns back down or stalls before
// reaching the target.
std::optional<std::pair<State, double>> shoot_pole_to_radius(double x_b, double theta_launch,
                                                             double r_target,
                                                             const DomainConfig& cfg) {
    const State pole{0.0, x_b, 0.0, theta_launch};
    State cur = axis_taylor_state(pole, cfg);
    if (cur.r >= r_target) return std::nullopt;
    const double s_cap = 4.0 * r_target + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double gap = r_target - cur.r;
        if (gap <= 1e-12) return std::make_pair(cur, cur.s);
        if (cur.s > s_cap) break;
        State next;
        try {
            next = geodesic_state_at(cur, cur.s + gap, cfg);
        } catch (const solver_error&) {
            return std::nullopt;
        }
        if (next.r <= cur.r) return std::nullopt;  // turned back: a swing, not an exit
        cur = next;
    }
    return std::nullopt;
}

// Early pole detection.  The alpha/r term makes the axis an unstable
// endpoint: off-orthogonal contamination of an approach grows like
// r^(-alpha), so no integration accuracy survives to r ~ 1e-6 once alpha
// is 2 or larger.  The pole data must instead be recovered while the
// expansion above is valid and the contamination still small, i.e. at
// moderate radius.
//
// Detection pipeline, for each descending sample inside the gate radius:
//   1. series inversion gives a trial pole abscissa and an angle residual;
//      residuals in clear swing territory are rejected outright;
//   2. an anchor sample is picked higher up on the same monotone descent,
//      where the r^(-alpha) amplification has not yet eaten the state;
//   3. the trial pole's outgoing branch (the stable direction; it re-traces
//      the incoming curve with the angle's vertical moved by pi) is shot up
//      to the anchor radius, and a secant iteration on the pole abscissa
//      matches its position to the anchor.  Convergence with a small angle
//      mismatch at the anchor confirms the hit and fixes the pole to the
//      anchor's accuracy, not the gate sample's.
// Returns true and appends the pole sample on a hit.
bool try_predictive_snap(const State& st, const DomainConfig& cfg, std::vector<State>& pts) {
    if (std::sin(st.theta) >= -0.5 || std::abs(std::cos(st.theta)) >= 0.5) return false;
    // Gate radius: contamination of the incoming state grows like
    // (1/r)^alpha, so for larger alpha the detection must trigger further
    // out; the series-validity cap keeps the expansion's angle terms small
    // when the turning rate (~|x| a1) is large.
    const double a1_scale = std::abs(st.x) / (2.0 * cfg.alpha + 2.0);
    const double alpha_widen = std::sqrt(std::max(1.0, cfg.alpha / 2.0));
    const double r_gate = std::min({kAxisSnapRadius * alpha_widen, 0.12,
                                    0.03 / std::max(a1_scale, 1e-9)});
    if (st.r >= r_gate) return false;

    const double theta_b = snap_theta_vertical(st.theta);
    double x_b = st.x / (1.0 - st.r * st.r / (4.0 * cfg.alpha + 4.0));
    double h = st.r;
    for (int pass = 0; pass < 2; ++pass) {
        const PoleSeries series(x_b, cfg.alpha);
        h = series.arclength_from_radius(st.r);
        x_b = st.x - series.x_offset(h);
    }
    const PoleSeries series(x_b, cfg.alpha);
    const double rho = st.theta - (theta_b + series.theta_offset(h));
    if (std::abs(rho) >= kAxisSnapSeriesReject) {
        SHRINKER_LOG_DEBUG("snap series reject at s=%.6f r=%.3e rho=%.3e", st.s, st.r, rho);
        return false;
    }

    // Anchor: walk back along the monotone descent to the highest recorded
    // sample with radius at most kAnchorRadius.  Falling back to the gate
    // sample itself keeps short legs working, at reduced accuracy.
    State anchor = st;
    for (std::size_t i = pts.size(); i-- > 0;) {
        const State& cand = pts[i];
        if (cand.r <= anchor.r) break;       // descent monotonicity broken
        if (cand.r > kAnchorRadius) break;   // high enough
        anchor = cand;
    }

    // Secant iteration on the pole abscissa.  The outgoing branch of the
    // trial pole, launched with the vertical moved by pi, re-traces the
    // incoming curve; its position at the anchor radius responds to the
    // abscissa with slope ~1.
    const double theta_launch = theta_b + std::numbers::pi;
    double f_prev = 0.0;
    double xb_prev = x_b;
    State shot_state{};
    double shot_len = 0.0;
    bool converged = false;
    double f = 0.0;
    for (int it = 0; it < 10; ++it) {
        const auto shot = shoot_pole_to_radius(x_b, theta_launch, anchor.r, cfg);
        if (!shot) {
            SHRINKER_LOG_DEBUG("snap shot lost at s=%.6f x_b=%.12f it=%d", st.s, x_b, it);
            return false;
        }
        shot_state = shot->first;
        shot_len = shot->second;
        f = shot_state.x - anchor.x;
        if (std::abs(f) < kSnapFitTol * 0.01) {
            converged = true;
            break;
        }
        double slope = 1.0;
        if (it > 0) {
            const double dx = x_b - xb_prev;
            if (std::abs(dx) > 1e-16) {
                slope = (f - f_prev) / dx;
                if (!(std::abs(slope) > 0.2) || !(std::abs(slope) < 5.0)) slope = 1.0;
            }
        }
        xb_prev = x_b;
        f_prev = f;
        x_b -= f / slope;
        if (std::abs(x_b - xb_prev) < 1e-14) {
            converged = true;
            break;
        }
    }
    const double ang_err = std::abs((shot_state.theta - std::numbers::pi) - anchor.theta);
    SHRINKER_LOG_DEBUG("snap fit s=%.6f r=%.4e anchor_r=%.3f x_b=%.12f rho=%+.3e f=%+.3e "
                       "ang=%.3e conv=%d",
                       st.s, st.r, anchor.r, x_b, rho, f, ang_err, int(converged));
    if (!converged && std::abs(f) >= kSnapFitTol) return false;
    if (ang_err >= kSnapThetaTol) return false;

    pts.push_back(State{anchor.s + shot_len, x_b, 0.0, theta_b});
    return true;
}

struct LegResult {
    std::vector<State> pts;  // includes the start state
    Termination term = Termination::reached_length;
};

// Signed distance to the admissible window, positive inside.
double window_margin(const State& st, const DomainWindow& win) {
    return std::min({st.x - win.x_min, win.x_max - st.x, win.r_max - st.r});
}

// Locate the window exit between two accepted steps by bisection on
// re-integrated states, so the terminal sample lies on the boundary.
State refine_window_exit(const State& inside, double s_outside, const DomainWindow& win,
                         const DomainConfig& cfg) {
    double lo = inside.s;
    double hi = s_outside;
    State best = geodesic_state_at(inside, hi, cfg);
    for (int it = 0; it < 64 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        const State st = geodesic_state_at(inside, mid, cfg);
        if (window_margin(st, win) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
            best = st;
        }
    }
    return best;
}

// One continuous leg from a strictly interior start (r > 0) until the target
// arclength, the axis, the window boundary, or step failure.
LegResult run_leg(const State& start, double s_target, const DomainWindow& win,
                  const DomainConfig& cfg) {
    LegResult leg;
    leg.pts.push_back(start);
    if (window_margin(start, win) <= 0.0) {
        leg.term = Termination::left_window;
        return leg;
    }

    const GeoSystem sys{Real(cfg.alpha)};
    const StepperOptions opt = StepperOptions::from(cfg);
    bool halted_on_axis = false;
    bool halted_on_window = false;

    auto on_step = [&](Real /*s_prev*/, const V3& /*y_prev*/, Real s, const V3& y,
                       const V3& /*f*/) -> bool {
        State st{static_cast<double>(s), static_cast<double>(y[0]),
                 static_cast<double>(y[1]), static_cast<double>(y[2])};
        if (try_predictive_snap(st, cfg, leg.pts)) {
            halted_on_axis = true;
            return false;
        }
        if (st.r < cfg.r_axis_eps && std::abs(std::cos(st.theta)) < kAxisCosTol) {
            leg.pts.push_back(snap_to_axis(st, cfg));
            halted_on_axis = true;
            return false;
        }
        if (window_margin(st, win) <= 0.0) {
            const State& prev = leg.pts.back();
            leg.pts.push_back(refine_window_exit(prev, st.s, win, cfg));
            halted_on_window = true;
            return false;
        }
        leg.pts.push_back(st);
        return true;
    };

    const StepOutcome rc =
        integrate_to<3, Real>(sys, Real(start.s), V3{Real(start.x), Real(start.r), Real(start.theta)},
                              Real(s_target), opt, on_step, axis_step_limit);
    if (halted_on_axis) {
        leg.term = Termination::hit_axis;
    } else if (halted_on_window) {
        leg.term = Termination::left_window;
    } else if (rc == StepOutcome::step_underflow) {
        leg.term = Termination::step_underflow;
    } else {
        leg.term = Termination::reached_length;
    }
    return leg;
}

DegenerateLine detect_degenerate(const std::vector<State>& pts, const DomainConfig& cfg) {
    const double r_cyl = cfg.cylinder_radius();
    bool raxis = true;
    bool cyl = cfg.alpha > 0.0;
    for (const State& st : pts) {
        if (std::abs(st.x) > 1e-9 || std::abs(std::cos(st.theta)) > 1e-9) raxis = false;
        if (std::abs(st.r - r_cyl) > 1e-6 || std::abs(std::sin(st.theta)) > 1e-6) cyl = false;
        if (!raxis && !cyl) break;
    }
    if (raxis) return DegenerateLine::r_axis;
    if (cyl) return DegenerateLine::cylinder_line;
    return DegenerateLine::none;
}

// Bisect an event function g between two trajectory states.  The left state
// must be strictly off the axis; the mini re-integration runs at a tolerance
// well below event_eps so the bracket, not the interpolant, limits accuracy.
template <typename G>
State refine_event(const State& left, const State& right, G g, const DomainConfig& cfg) {
    double lo = left.s;
    double hi = right.s;
    double g_lo = g(left);
    State best = right;
    for (int it = 0; it < 64 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        State st;
        try {
            st = geodesic_state_at(left, mid, cfg);
        } catch (const solver_error&) {
            // The trial arclength overshot a pole (right may be a snapped
            // axis sample); treat it as lying beyond the crossing.
            hi = mid;
            continue;
        }
        const double gm = g(st);
        if (gm == 0.0) return st;
        if ((gm > 0.0) == (g_lo > 0.0)) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            best = st;
        }
    }
    return best;
}

ProfileCurve assemble_curve(std::vector<State> pts, Termination term, const DomainConfig& cfg) {
    ProfileCurve curve;
    curve.alpha = cfg.alpha;
    curve.termination = term;
    curve.degenerate = detect_degenerate(pts, cfg);

    curve.samples.reserve(pts.size());
    for (const State& st : pts) {
        Sample smp;
        smp.state = st;
        smp.scalars = derived_scalars(st.x, st.r, st.theta, cfg);
        curve.samples.push_back(smp);
    }

    curve.events = detect_events(curve, cfg);

    // Thread the refined events back into the sample list so downstream
    // consumers (CSV rows, arc splitting) see them in arclength order.
    for (const Event& ev : curve.events) {
        auto at = std::lower_bound(curve.samples.begin(), curve.samples.end(), ev.state.s,
                                   [](const Sample& smp, double s) { return smp.state.s < s; });
        if (at != curve.samples.end() && std::abs(at->state.s - ev.state.s) < 1e-12) {
            if (!at->event) at->event = ev.kind;
            continue;
        }
        if (at != curve.samples.begin() &&
            std::abs(std::prev(at)->state.s - ev.state.s) < 1e-12) {
            if (!std::prev(at)->event) std::prev(at)->event = ev.kind;
            continue;
        }
        Sample smp;
        smp.state = ev.state;
        smp.scalars = derived_scalars(ev.state.x, ev.state.r, ev.state.theta, cfg);
        smp.event = ev.kind;
        curve.samples.insert(at, smp);
    }
    return curve;
}

void validate_interior_start(const State& init) {
    if (!std::isfinite(init.x) || !std::isfinite(init.r) || !std::isfinite(init.theta) ||
        !std::isfinite(init.s)) {
        throw domain_error("initial state has non-finite components");
    }
    if (init.r < 0.0) {
        throw domain_error("initial radius must be nonnegative");
    }
}

}  // namespace

GeodesicRhs geodesic_rhs(double x, double r, double theta, const DomainConfig& cfg) {
    cfg.validate();
    if (!(r > 0.0)) {
        throw domain_error("geodesic_rhs requires r > 0; use derived_scalars for axis limits");
    }
    GeodesicRhs rhs;
    rhs.dx = std::cos(theta);
    rhs.dr = std::sin(theta);
    rhs.dtheta = 0.5 * x * std::sin(theta) + (cfg.alpha / r - 0.5 * r) * std::cos(theta);
    return rhs;
}

double ssode_rhs(double x, double u, double du, const DomainConfig& cfg) {
    cfg.validate();
    if (!(u > 0.0)) {
        throw domain_error("ssode_rhs requires u > 0");
    }
    const double phi = 0.5 * x * du + cfg.alpha / u - 0.5 * u;
    return phi * (1.0 + du * du);
}

double rgraph_rhs(double r, double f, double df, const DomainConfig& cfg) {
    cfg.validate();
    if (!(r > 0.0)) {
        throw domain_error("rgraph_rhs requires r > 0");
    }
    return ((0.5 * r - cfg.alpha / r) * df - 0.5 * f) * (1.0 + df * df);
}

DerivedScalars derived_scalars(double x, double r, double theta, const DomainConfig& cfg) {
    cfg.validate();
    if (r < 0.0) {
        throw domain_error("derived_scalars requires r >= 0");
    }
    const double c = std::cos(theta);
    const double sn = std::sin(theta);

    DerivedScalars d;
    d.Lambda = x * sn - r * c;
    if (r > 0.0) {
        d.kappa = 0.5 * x * sn + (cfg.alpha / r - 0.5 * r) * c;
        d.H = cfg.alpha * c / r - d.kappa;
    } else {
        // Orthogonal axis limits: the alpha/r singularity cancels against
        // cos(theta) -> 0 and leaves kappa = Lambda / (2 alpha + 2), while
        // all alpha + 1 principal curvatures agree at the pole.
        d.kappa = d.Lambda / (2.0 * cfg.alpha + 2.0);
        d.H = -0.5 * d.Lambda;
    }
    if (std::abs(c) > 1e-12) {
        d.Psi = d.Lambda / c;
        d.Phi = d.kappa / c;
    } else {
        d.Psi = std::numeric_limits<double>::quiet_NaN();
        d.Phi = std::numeric_limits<double>::quiet_NaN();
    }
    return d;
}

State geodesic_state_at(const State& left, double s_target, const DomainConfig& cfg) {
    cfg.validate();
    if (s_target == left.s) return left;
    if (s_target < left.s) {
        throw domain_error("geodesic_state_at integrates forward only");
    }
    if (!(left.r > 0.0)) {
        throw domain_error("geodesic_state_at requires an off-axis base state");
    }
    const GeoSystem sys{Real(cfg.alpha)};
    StepperOptions opt = StepperOptions::from(cfg);
    opt.rel_tol = 1e-13;
    opt.abs_tol = 1e-13;
    opt.min_step = std::min(opt.min_step, 1e-14);
    V3 out{Real(left.x), Real(left.r), Real(left.theta)};
    auto keep = [&](Real, const V3&, Real, const V3& y, const V3&) {
        out = y;
        return true;
    };
    const StepOutcome rc = integrate_to<3, Real>(sys, Real(left.s), out, Real(s_target), opt,
                                                 keep, axis_step_limit);
    if (rc == StepOutcome::step_underflow) {
        throw solver_error("geodesic_state_at: step underflow (axis in the way?)");
    }
    return State{s_target, static_cast<double>(out[0]), static_cast<double>(out[1]),
                 static_cast<double>(out[2])};
}

ProfileCurve integrate_geodesic(const State& init, double max_length, const DomainWindow& window,
                                const DomainConfig& cfg) {
    cfg.validate();
    validate_interior_start(init);
    if (!(max_length > 0.0) || !std::isfinite(max_length)) {
        throw domain_error("max_length must be positive and finite");
    }
    if (!window.contains(init.x, init.r)) {
        throw domain_error("initial state lies outside the integration window");
    }

    std::vector<State> pts;
    State leg_start = init;
    if (init.r == 0.0) {
        if (std::abs(std::sin(init.theta) - 1.0) > 1e-9) {
            throw domain_error(
                "axis starts must point up the radius direction (sin(theta) = 1)");
        }
        pts.push_back(init);
        leg_start = axis_taylor_state(init, cfg);
    }

    LegResult leg = run_leg(leg_start, init.s + max_length, window, cfg);
    pts.insert(pts.end(), leg.pts.begin(), leg.pts.end());
    return assemble_curve(std::move(pts), leg.term, cfg);
}

ProfileCurve integrate_geodesic_through_axis(const State& init, double max_length,
                                             int max_bounces, const DomainWindow& window,
                                             const DomainConfig& cfg) {
    cfg.validate();
    validate_interior_start(init);
    if (!(max_length > 0.0) || !std::isfinite(max_length)) {
        throw domain_error("max_length must be positive and finite");
    }
    if (max_bounces < 0) {
        throw domain_error("max_bounces must be nonnegative");
    }
    if (!window.contains(init.x, init.r)) {
        throw domain_error("initial state lies outside the integration window");
    }

    std::vector<State> pts;
    State leg_start = init;
    if (init.r == 0.0) {
        if (std::abs(std::sin(init.theta) - 1.0) > 1e-9) {
            throw domain_error(
                "axis starts must point up the radius direction (sin(theta) = 1)");
        }
        pts.push_back(init);
        leg_start = axis_taylor_state(init, cfg);
    }

    const double s_target = init.s + max_length;
    Termination term = Termination::reached_length;
    int bounces = 0;
    for (;;) {
        LegResult leg = run_leg(leg_start, s_target, window, cfg);
        pts.insert(pts.end(), leg.pts.begin(), leg.pts.end());
        term = leg.term;
        if (term != Termination::hit_axis || bounces >= max_bounces) break;

        // Pass through the pole: the mirrored continuation reverses the
        // turning direction, so theta jumps to -theta while the tangent
        // keeps tracing the same smooth curve through the axis.
        State pole = pts.back();
        pole.theta = -pole.theta;
        ++bounces;
        leg_start = axis_taylor_state(pole, cfg);
    }
    return assemble_curve(std::move(pts), term, cfg);
}

std::vector<Event> detect_events(const ProfileCurve& curve, const DomainConfig& cfg) {
    cfg.validate();
    std::vector<Event> events;
    const auto& samples = curve.samples;
    if (samples.empty()) return events;

    const double r_cyl = cfg.cylinder_radius();

    // Pole contacts are events in their own right, and since the tangent is
    // vertical there (axis contact is orthogonal), each pole also counts as
    // a vertical-tangent point: on the round sphere the vertical points ARE
    // the poles, and oscillation counts rely on that bookkeeping.
    for (const Sample& smp : samples) {
        if (smp.state.r == 0.0) {
            events.push_back(Event{EventKind::axis_hit, smp.state});
            events.push_back(Event{EventKind::vertical, smp.state});
        }
    }

    const auto by_position = [](const Event& lhs, const Event& rhs) {
        if (lhs.state.s != rhs.state.s) return lhs.state.s < rhs.state.s;
        return static_cast<int>(lhs.kind) < static_cast<int>(rhs.kind);
    };

    // On a degenerate line the marker functions below are identically zero
    // (up to integration noise), so their sign flips are noise rather than
    // isolated crossings; record no marker events there.
    if (curve.degenerate != DegenerateLine::none) {
        std::sort(events.begin(), events.end(), by_position);
        return events;
    }

    struct Scan {
        EventKind kind;
        std::function<double(const State&)> g;
        bool skip_on_axis;  // suppress near a pole where the function is
                            // identically at its limit, not crossing
    };
    const Scan scans[] = {
        {EventKind::vertical, [](const State& st) { return std::cos(st.theta); }, true},
        {EventKind::horizontal, [](const State& st) { return std::sin(st.theta); }, false},
        {EventKind::raxis_crossing, [](const State& st) { return st.x; }, false},
        {EventKind::cylinder_crossing, [r_cyl](const State& st) { return st.r - r_cyl; }, false},
    };

    for (const Scan& scan : scans) {
        // Exact zero at the very first sample counts (integrations often
        // start on a symmetry line, e.g. theta = 0 or x = 0).
        const State& first = samples.front().state;
        if (first.r > 0.0 && scan.g(first) == 0.0) {
            events.push_back(Event{scan.kind, first});
        }
        for (size_t i = 1; i < samples.size(); ++i) {
            const State& a = samples[i - 1].state;
            const State& b = samples[i].state;
            if (b.s <= a.s) continue;  // pole junction duplicates
            if (scan.skip_on_axis && (a.r == 0.0 || b.r == 0.0)) continue;
            if (a.r == 0.0) continue;  // cannot re-integrate from a pole;
                                       // the Taylor gap is 1e-5 long and
                                       // event-free by construction
            const double ga = scan.g(a);
            const double gb = scan.g(b);
            if (gb == 0.0) {
                if (b.r > 0.0 || !scan.skip_on_axis) {
                    events.push_back(Event{scan.kind, b});
                }
                continue;
            }
            if (ga == 0.0) continue;  // recorded at the previous pair
            if ((ga > 0.0) != (gb > 0.0)) {
                const State ev = refine_event(a, b, scan.g, cfg);
                events.push_back(Event{scan.kind, ev});
            }
        }
    }

    std::sort(events.begin(), events.end(), by_position);
    return events;
}

std::vector<GraphArc> graph_view(const ProfileCurve& curve, const DomainConfig& cfg) {
    cfg.validate();
    std::vector<GraphArc> arcs;
    const auto& samples = curve.samples;
    if (samples.size() < 2) return arcs;

    // Split the curve at vertical tangents and poles; between consecutive
    // split points cos(theta) keeps one sign and x is strictly monotone, so
    // the piece is the graph of a profile function u(x) = r.
    std::vector<size_t> cuts;
    cuts.push_back(0);
    for (size_t i = 0; i < samples.size(); ++i) {
        const bool is_cut = (samples[i].event && (*samples[i].event == EventKind::vertical ||
                                                  *samples[i].event == EventKind::axis_hit)) ||
                            samples[i].state.r == 0.0;
        if (is_cut && i != 0 && i + 1 != samples.size()) cuts.push_back(i);
    }
    cuts.push_back(samples.size() - 1);
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    for (size_t c = 0; c + 1 < cuts.size(); ++c) {
        const size_t lo = cuts[c];
        const size_t hi = cuts[c + 1];
        GraphArc arc;
        arc.s_begin = samples[lo].state.s;
        arc.s_end = samples[hi].state.s;

        int direction = 0;
        for (size_t i = lo; i <= hi; ++i) {
            const State& st = samples[i].state;
            const double cth = std::cos(st.theta);
            if (st.r <= 0.0 || std::abs(cth) <= 1e-9) continue;
            if (direction == 0) direction = cth > 0.0 ? 1 : -1;
            arc.x.push_back(st.x);
            arc.u.push_back(st.r);
            arc.du.push_back(std::tan(st.theta));
        }
        if (arc.x.size() < 2 || direction == 0) continue;
        arc.forward = direction > 0;
        if (!arc.forward) {
            std::reverse(arc.x.begin(), arc.x.end());
            std::reverse(arc.u.begin(), arc.u.end());
            std::reverse(arc.du.begin(), arc.du.end());
        }
        // Drop any non-monotone stragglers right at the cut points, where
        // the tangent is within roundoff of vertical.
        while (arc.x.size() >= 2 && !(arc.x[1] > arc.x[0])) {
            arc.x.erase(arc.x.begin());
            arc.u.erase(arc.u.begin());
            arc.du.erase(arc.du.begin());
        }
        while (arc.x.size() >= 2 && !(arc.x[arc.x.size() - 1] > arc.x[arc.x.size() - 2])) {
            arc.x.pop_back();
            arc.u.pop_back();
            arc.du.pop_back();
        }
        if (arc.x.size() < 2) continue;
        arcs.push_back(std::move(arc));
    }
    return arcs;
}

ProfileCurve curve_from_samples(const std::vector<double>& s, const std::vector<double>& x,
                                const std::vector<double>& r, const std::vector<double>& theta,
                                const DomainConfig& cfg) {
    cfg.validate();
    const size_t n = s.size();
    if (n < 2) {
        throw domain_error("curve_from_samples needs at least two samples");
    }
    if (x.size() != n || r.size() != n || theta.size() != n) {
        throw domain_error("curve_from_samples requires columns of equal length");
    }
    std::vector<State> pts;
    pts.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s[i]) || !std::isfinite(x[i]) || !std::isfinite(r[i]) ||
            !std::isfinite(theta[i])) {
            throw domain_error("curve_from_samples requires finite samples");
        }
        if (r[i] < 0.0) {
            throw domain_error("curve_from_samples requires r >= 0");
        }
        if (i > 0 && !(s[i] > s[i - 1])) {
            throw domain_error("curve_from_samples requires strictly increasing arclength");
        }
        pts.push_back(State{s[i], x[i], r[i], theta[i]});
    }
    const Termination term =
        pts.back().r == 0.0 ? Termination::hit_axis : Termination::reached_length;
    return assemble_curve(std::move(pts), term, cfg);
}

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::vertical: return "vertical";
        case EventKind::horizontal: return "horizontal";
        case EventKind::raxis_crossing: return "raxis_crossing";
        case EventKind::cylinder_crossing: return "cylinder_crossing";
        case EventKind::axis_hit: return "axis_hit";
    }
    return "unknown";
}

const char* termination_name(Termination term) {
    switch (term) {
        case Termination::reached_length: return "reached_length";
        case Termination::hit_axis: return "hit_axis";
        case Termination::left_window: return "left_window";
        case Termination::step_underflow: return "step_underflow";
    }
    return "unknown";
}

}  // namespace shrinker
