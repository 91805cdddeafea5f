// Scratch calibration driver (not installed, not part of the test suite).
// Prints measured integrator behavior on exactly solvable trajectories so
// tolerances in the real tests can be pinned to evidence:
//   1. cylinder drift: how far roundoff pushes the constant solution
//      r = sqrt(2 alpha) over a long arclength window,
//   2. sphere closure: error in the conserved combination x^2 + r^2 on the
//      circle through (0, sqrt(2 alpha + 2)),
//   3. step-control order check on a smooth nonlinear problem.

#include <cmath>
#include <cstdio>

#include "shrinker/config.hpp"
#include "shrinker/geodesic.hpp"
#include "shrinker/rk45.hpp"

using namespace shrinker;

static void cylinder_drift(int n) {
    DomainConfig cfg = DomainConfig::with_dimension(n);
    const double rc = cfg.cylinder_radius();
    State init{0.0, 0.0, rc, 0.0};
    DomainWindow win;
    ProfileCurve curve = integrate_geodesic(init, 10.0, win, cfg);
    double max_dr = 0.0, max_dth = 0.0;
    for (const auto& smp : curve.samples) {
        max_dr = std::max(max_dr, std::abs(smp.state.r - rc));
        max_dth = std::max(max_dth, std::abs(std::sin(smp.state.theta)));
    }
    std::printf("cylinder n=%d: samples=%zu max|r-rc|=%.3e max|sin(theta)|=%.3e degenerate=%d\n",
                n, curve.samples.size(), max_dr, max_dth, static_cast<int>(curve.degenerate));
}

static void sphere_closure(int n, double tol) {
    DomainConfig cfg = DomainConfig::with_dimension(n);
    cfg.rel_tol = tol;
    cfg.abs_tol = tol;
    const double R2 = 2.0 * (cfg.alpha + 1.0);
    State init{0.0, 0.0, std::sqrt(R2), 0.0};
    DomainWindow win;
    ProfileCurve curve =
        integrate_geodesic_through_axis(init, 4.0 * std::numbers::pi * std::sqrt(R2), 8, win, cfg);
    double max_def = 0.0, max_def_10 = 0.0;
    for (const auto& smp : curve.samples) {
        const double v = smp.state.x * smp.state.x + smp.state.r * smp.state.r;
        max_def = std::max(max_def, std::abs(v - R2));
        if (smp.state.s <= 10.0) max_def_10 = std::max(max_def_10, std::abs(v - R2));
    }
    int axis_hits = 0, horizontals = 0, verticals = 0;
    for (const auto& ev : curve.events) {
        if (ev.kind == EventKind::axis_hit) ++axis_hits;
        if (ev.kind == EventKind::horizontal) ++horizontals;
        if (ev.kind == EventKind::vertical) ++verticals;
    }
    const State& last = curve.samples.back().state;
    std::printf("sphere n=%d tol=%.0e: samples=%zu dev=%.3e dev10=%.3e term=%s axis=%d hor=%d "
                "ver=%d s_end=%.6f theta_end=%.12f\n",
                n, tol, curve.samples.size(), max_def, max_def_10,
                termination_name(curve.termination), axis_hits, horizontals, verticals, last.s,
                last.theta);
    if (std::getenv("CAL_DUMP")) {
        for (const auto& smp : curve.samples) {
            const State& st = smp.state;
            if (st.r < 0.03 || (st.s > 5.0 && st.s < 6.5)) {
                std::printf("  s=%.9f x=%+.9f r=%.3e cos=%+.3e sin=%+.6f theta=%+.9f\n", st.s,
                            st.x, st.r, std::cos(st.theta), std::sin(st.theta), st.theta);
            }
        }
    }
}

// y'' = -y as a 2-vector system, integrated over [0, 2 pi]; exact solution
// returns to the start, so the defect measures the controller's accuracy.
static void order_check() {
    auto rhs = [](double, const Vec<2>& y, Vec<2>& dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    for (double tol : {1e-6, 1e-8, 1e-10, 1e-12}) {
        StepperOptions opt;
        opt.rel_tol = tol;
        opt.abs_tol = tol;
        opt.max_step = 0.5;
        Vec<2> y = solve_to<2>(rhs, 0.0, {1.0, 0.0}, 2.0 * std::numbers::pi, opt);
        std::printf("circle tol=%.0e: err=(%.3e, %.3e)\n", tol, y[0] - 1.0, y[1]);
    }
}

static void rhs_spot_checks() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    const double g1 = ssode_rhs(1.0, std::sqrt(2.0), std::sqrt(2.0), cfg);
    std::printf("ssode(1,sqrt2,sqrt2,a=1) = %.17g  (expect %.17g)\n", g1,
                3.0 * std::sqrt(2.0) / 2.0);
    const double g2 = rgraph_rhs(2.0, 0.0, 1.0, cfg);
    std::printf("rgraph(2,0,1,a=1) = %.17g  (expect 1)\n", g2);
    GeodesicRhs g3 = geodesic_rhs(0.0, std::sqrt(2.0), 0.0, cfg);
    std::printf("geodesic(0,sqrt2,0,a=1) dtheta = %.17g (expect 0)\n", g3.dtheta);
    DerivedScalars d = derived_scalars(0.0, std::sqrt(4.0), 0.0, DomainConfig::with_alpha(1.0));
    std::printf("H at sphere point (0,2,theta=0,a=1) = %.17g (expect sqrt(4)/2=1? no: alpha/r - "
                "kappa)\n",
                d.H);
    DerivedScalars ds = derived_scalars(0.0, 2.0, 0.0, DomainConfig::with_dimension(2));
    std::printf("sphere n=2 at top (0,2): H=%.17g (expect %.17g)\n", ds.H, std::sqrt(4.0) / 2.0);
}

int main() {
    order_check();
    rhs_spot_checks();
    for (int n : {2, 3, 7}) cylinder_drift(n);
    for (int n : {2, 3, 7}) sphere_closure(n, 1e-10);
    for (double tol : {1e-12, 1e-14, 1e-15, 1e-16}) sphere_closure(7, tol);
    sphere_closure(3, 1e-13);
    sphere_closure(2, 1e-13);
    return 0;
}
