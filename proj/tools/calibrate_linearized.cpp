// Calibration harness for the plane-limit linearization: measures the
// quantities the unit tests freeze (solution values, residuals, the r -> 0
// limit, the slope-family convergence table) so tolerances can be pinned to
// observed headroom.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "shrinker/config.hpp"
#include "shrinker/ends.hpp"
#include "shrinker/linearized.hpp"

using namespace shrinker;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

double value_at(const LinearizedSolution& s, double r) {
    for (std::size_t i = 0; i < s.size(); ++i)
        if (std::abs(s.r[i] - r) < 1e-9) return s.g[i];
    std::fprintf(stderr, "value_at: %g is not a grid node\n", r);
    return 0.0;
}

void run_solve() {
    for (const double alpha : {1.0, 2.0, 6.0}) {
        const auto t0 = std::chrono::steady_clock::now();
        LinearizedConfig lc;
        const DomainConfig cfg = DomainConfig::with_alpha(alpha);
        const LinearizedSolution s = solve_linearized(lc, cfg);
        std::printf(
            "solve alpha=%g: n=%zu c1=%.12g defect=%.3e identity=%.3e\n"
            "      g(rmin)=%.12g limit=%.12g gap=%.3e signchg=%d at r=%.9g  (%.0f ms)\n",
            alpha, s.size(), s.c1, s.defect, s.identity_residual, s.g.front(), s.limit_value,
            s.limit_mismatch, s.sign_changes, s.sign_change_r, ms_since(t0));
        std::printf("      g(1)=%.12g g(3)=%.12g g(10)=%.12g g(20)=%.12g dg(rmin)=%.6g\n",
                    value_at(s, 1.0), value_at(s, 3.0), value_at(s, 10.0), value_at(s, 20.0),
                    s.dg.front());
    }
}

void run_scale() {
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    LinearizedConfig lc;
    const LinearizedSolution unit = solve_linearized(lc, cfg);
    lc.seed_slope = 2.5;
    const LinearizedSolution scaled = solve_linearized(lc, cfg);
    double dev = 0.0, devd = 0.0;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        dev = std::max(dev, std::abs(scaled.g[i] - 2.5 * unit.g[i]));
        devd = std::max(devd, std::abs(scaled.dg[i] - 2.5 * unit.dg[i]));
    }
    std::printf("scale lambda=2.5: sup|g_l - l g|=%.3e sup|g_l' - l g'|=%.3e\n", dev, devd);
    std::printf("      c1 ratio=%.15g identity ratio=%.8g limit ratio=%.12g\n",
                scaled.c1 / unit.c1, scaled.identity_residual / unit.identity_residual,
                scaled.limit_value / unit.limit_value);
}

void run_line() {
    // Pure-line trial g = r is not a solution; the representation must
    // reject it with a visible residual on [0.1, 5].
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    LinearizedConfig lc;
    const LinearizedSolution real = solve_linearized(lc, cfg);
    LinearizedSolution line;
    line.r = real.r;
    line.g = real.r;
    line.dg.assign(real.size(), 1.0);
    line.slope = 1.0;
    line.c1 = 0.0;
    const double sup = linearized_identity_residual(line, 0.1, 5.0, cfg);
    const double near5 = linearized_identity_residual(line, 4.95, 5.0, cfg);
    const double real_sup = linearized_identity_residual(real, 0.1, 5.0, cfg);
    std::printf("line trial: sup resid [0.1,5]=%.6g  near r=5: %.6g  (real solution: %.3e)\n",
                sup, near5, real_sup);
}

void run_resolution() {
    // Double the mesh everywhere: the identity residual and the limit value
    // should be resolution-stable.
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    LinearizedConfig lc;
    const LinearizedSolution a = solve_linearized(lc, cfg);
    lc.h_uniform = 0.025;
    lc.geo_ratio = 1.1;
    const LinearizedSolution b = solve_linearized(lc, cfg);
    std::printf("resolution: identity %.3e -> %.3e  g(rmin) %.12g -> %.12g  limit %.12g -> %.12g\n",
                a.identity_residual, b.identity_residual, a.g.front(), b.g.front(),
                a.limit_value, b.limit_value);
    std::printf("            c1 %.12g -> %.12g  g(20) %.12g -> %.12g\n", a.c1, b.c1,
                value_at(a, 20.0), value_at(b, 20.0));
}

void run_profile() {
    // Residual anatomy: where in r does sup|g - I[g]| live?  Slices plus
    // single-node magnitudes expose the error profile's shape.
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    LinearizedConfig lc;
    const LinearizedSolution s = solve_linearized(lc, cfg);
    const double slices[][2] = {{0.1, 0.2}, {0.2, 0.5}, {0.5, 1.0}, {1.0, 2.0},
                                {2.0, 5.0}, {5.0, 10.0}, {10.0, 15.0}, {15.0, 20.0}};
    for (const auto& w : slices)
        std::printf("profile [%g, %g]: %.6e\n", w[0], w[1],
                    linearized_identity_residual(s, w[0], w[1], cfg));
    for (const double target : {0.1, 0.3, 0.7, 1.0, 2.0, 4.0, 7.0, 10.0, 13.0, 16.0, 19.0, 20.0}) {
        double best = s.r.front();
        for (const double rr : s.r)
            if (std::abs(rr - target) < std::abs(best - target)) best = rr;
        std::printf("node %-8.6g |g-I|=%.6e\n", best,
                    linearized_identity_residual(s, best, best, cfg));
    }
}

void run_sigma() {
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    LinearizedConfig lc;
    EndSolverConfig ec;
    const auto t0 = std::chrono::steady_clock::now();
    const SigmaLimitTable t = sigma_limit_check({0.25, 0.125, 0.0625}, lc, ec, cfg);
    for (const auto& row : t.rows)
        std::printf(
            "sigma_hat=%-7g sup_err=%.6e envelope=%d min_x=%.6g dips_negative=%d r_turn=%.6g\n",
            row.sigma_hat, row.sup_error, row.envelope_ok ? 1 : 0, row.min_x,
            row.dips_negative ? 1 : 0, row.r_turn);
    for (std::size_t k = 0; k < t.orders.size(); ++k)
        std::printf("order[%zu]=%.4f\n", k, t.orders[k]);
    std::printf("sigma table (%.0f ms)\n", ms_since(t0));
}

void run_trap() {
    const DomainConfig cfg = DomainConfig::with_alpha(1.0);
    for (const double r0 : {3.0, 2.0}) {
        const TrapProbe p = probe_slope_trap(r0, 1.0, 0.0, 40.0, cfg);
        std::printf("trap r0=%g: slope_negative=%d crossed=%d r_cross=%.9g\n", r0,
                    p.slope_negative_throughout ? 1 : 0, p.crossed_zero ? 1 : 0, p.r_cross);
    }
}

}  // namespace

int main(int argc, char** argv) {
    const std::string which = argc > 1 ? argv[1] : "all";
    const bool all = which == "all";
    if (all || which == "solve") run_solve();
    if (all || which == "scale") run_scale();
    if (all || which == "line") run_line();
    if (all || which == "resolution") run_resolution();
    if (which == "profile") run_profile();
    if (all || which == "sigma") run_sigma();
    if (all || which == "trap") run_trap();
    return 0;
}
