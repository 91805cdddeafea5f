// Calibration harness for the conical-end machinery: measures convergence
// laws, operator residuals, contraction factors, and property margins so the
// unit-test tolerances can be frozen against observed magnitudes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "shrinker/config.hpp"
#include "shrinker/ends.hpp"
#include "shrinker/geodesic.hpp"
#include "shrinker/rk45.hpp"

using namespace shrinker;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Local cubic Hermite for cross-grid comparisons.
double hermite_at(const EndGrid& g, double s, bool deriv) {
    std::size_t lo = 0, hi = g.size() - 1;
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (g.x[mid] <= s) lo = mid; else hi = mid;
    }
    const double h = g.x[lo + 1] - g.x[lo];
    const double t = (s - g.x[lo]) / h, t2 = t * t, t3 = t2 * t;
    if (!deriv) {
        return g.u[lo] * (2 * t3 - 3 * t2 + 1) + g.du[lo] * h * (t3 - 2 * t2 + t) +
               g.u[lo + 1] * (-2 * t3 + 3 * t2) + g.du[lo + 1] * h * (t3 - t2);
    }
    return (g.u[lo] * (6 * t2 - 6 * t) + g.du[lo] * h * (3 * t2 - 4 * t + 1) +
            g.u[lo + 1] * (-6 * t2 + 6 * t) + g.du[lo + 1] * h * (3 * t2 - 2 * t)) /
           h;
}

double value_at(const EndGrid& g, double x) {
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g.x[i] - x) < 1e-9) return g.u[i];
    return hermite_at(g, x, false);
}

void run_ivp(double alpha, double sigma) {
    DomainConfig cfg = DomainConfig::with_alpha(alpha);
    EndSolverConfig e;
    std::printf("== ivp alpha=%g sigma=%g ==\n", alpha, sigma);
    const double probes[] = {0.0, 4.0, 10.0, 25.0, 50.0};
    std::vector<std::vector<double>> rows;
    std::vector<double> as;
    for (double a = 64.0; a <= 4096.0 + 1; a *= 2.0) {
        IvpResult r = solve_end_ivp(sigma, a, e, cfg);
        std::vector<double> row;
        for (double p : probes) row.push_back(value_at(r.grid, p));
        rows.push_back(row);
        as.push_back(a);
        std::printf("a=%6.0f  env=%.3f genv=%.3f", a, r.envelope_sup, r.grad_envelope_sup);
        for (std::size_t j = 0; j < row.size(); ++j) std::printf("  u(%g)=%.12e", probes[j], row[j]);
        std::printf("\n");
    }
    for (std::size_t k = 1; k < rows.size(); ++k) {
        std::printf("diff a=%6.0f->%6.0f:", as[k - 1], as[k]);
        for (std::size_t j = 0; j < rows[k].size(); ++j)
            std::printf("  %9.3e", rows[k][j] - rows[k - 1][j]);
        std::printf("\n");
    }
}

// Defect of a table against the graph equation: worst one-interval
// re-integration mismatch (values and slopes), capped at x <= cap.
double table_defect(const EndGrid& g, double alpha, double cap) {
    struct Sys {
        double alpha;
        void operator()(double x, const Vec<2>& y, Vec<2>& dy) const {
            dy[0] = y[1];
            dy[1] = (y[0] > 0.0) ? (1.0 + y[1] * y[1]) * (0.5 * x * y[1] + alpha / y[0] - 0.5 * y[0])
                                 : std::numeric_limits<double>::quiet_NaN();
        }
    } sys{alpha};
    StepperOptions opt;
    opt.rel_tol = opt.abs_tol = 1e-13;
    opt.max_step = 1.0;
    opt.min_step = 1e-14;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        if (g.x[i + 1] > cap) break;
        const Vec<2> got = solve_to<2>(sys, g.x[i + 1], Vec<2>{g.u[i + 1], g.du[i + 1]}, g.x[i], opt);
        worst = std::max({worst, std::abs(got[0] - g.u[i]), std::abs(got[1] - g.du[i])});
    }
    return worst;
}

void run_extrap() {
    const double probes[] = {0.0, 4.0, 10.0, 25.0, 50.0};
    for (double sigma : {1.0, 0.5}) {
        DomainConfig cfg = DomainConfig::with_alpha(1.0);
        EndSolverConfig e;
        std::printf("== extrap sigma=%g ==\n", sigma);
        IvpResult prev = solve_end_ivp(sigma, 65.0, e, cfg);
        std::vector<double> last_ext;
        for (int k = 1; k <= 6; ++k) {
            const double a = 65.0 * std::pow(2.0, k);
            IvpResult cur = solve_end_ivp(sigma, a, e, cfg);
            // Extrapolate on the shared [0, x_max] nodes.
            EndGrid ext;
            std::vector<double> at_probes;
            for (std::size_t i = 0; i < prev.grid.size(); ++i) {
                if (prev.grid.x[i] > e.x_max * (1 + 1e-12)) break;
                ext.x.push_back(prev.grid.x[i]);
                ext.u.push_back(cur.grid.u[i] + (cur.grid.u[i] - prev.grid.u[i]) / 3.0);
                ext.du.push_back(cur.grid.du[i] + (cur.grid.du[i] - prev.grid.du[i]) / 3.0);
            }
            for (double p : probes) at_probes.push_back(value_at(ext, p));
            const double defect = table_defect(ext, cfg.alpha, e.x_max);
            std::printf("a=%6.0f defect=%.3e ext_u0=%.15e", a, defect, at_probes[0]);
            if (!last_ext.empty()) {
                std::printf(" | ext diffs:");
                for (std::size_t j = 0; j < at_probes.size(); ++j)
                    std::printf(" %9.2e", at_probes[j] - last_ext[j]);
            }
            std::printf("\n");
            last_ext = at_probes;
            prev = std::move(cur);
        }
    }
}

void run_diag() {
    for (double sigma : {0.05, 4.0, 8.0}) {
        DomainConfig cfg = DomainConfig::with_alpha(1.0);
        EndSolverConfig e;
        std::printf("== diag sigma=%g ==\n", sigma);
        for (double a : {65.0, 130.0, 260.0}) {
            try {
                IvpResult r = solve_end_ivp(sigma, a, e, cfg);
                // Per-interval defect profile on the raw table.
                struct Sys {
                    double alpha;
                    void operator()(double x, const Vec<2>& y, Vec<2>& dy) const {
                        dy[0] = y[1];
                        dy[1] = (y[0] > 0.0) ? (1.0 + y[1] * y[1]) *
                                                   (0.5 * x * y[1] + 1.0 / y[0] - 0.5 * y[0])
                                             : std::numeric_limits<double>::quiet_NaN();
                    }
                } sys{cfg.alpha};
                StepperOptions opt;
                opt.rel_tol = opt.abs_tol = 1e-13;
                opt.max_step = 1.0;
                opt.min_step = 1e-14;
                double worst = 0.0, worst_x = 0.0;
                for (std::size_t i = 0; i + 1 < r.grid.size(); ++i) {
                    if (r.grid.x[i + 1] > 50.0) break;
                    const Vec<2> got = solve_to<2>(
                        sys, r.grid.x[i + 1], Vec<2>{r.grid.u[i + 1], r.grid.du[i + 1]},
                        r.grid.x[i], opt);
                    const double d = std::max(std::abs(got[0] - r.grid.u[i]),
                                              std::abs(got[1] - r.grid.du[i]));
                    if (d > worst) {
                        worst = d;
                        worst_x = r.grid.x[i];
                    }
                }
                std::printf("a=%5.0f raw defect=%.3e at x=%.4f  u0=%.9e du(0)=%.3e\n", a, worst,
                            worst_x, r.grid.u.front(), r.grid.du.front());
            } catch (const std::exception& ex) {
                std::printf("a=%5.0f FAILED: %s\n", a, ex.what());
            }
        }
    }
}

void run_stiff() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    struct Sys {
        double alpha;
        void operator()(double x, const Vec<2>& y, Vec<2>& dy) const {
            dy[0] = y[1];
            dy[1] = (y[0] > 0.0)
                        ? (1.0 + y[1] * y[1]) * (0.5 * x * y[1] + alpha / y[0] - 0.5 * y[0])
                        : std::numeric_limits<double>::quiet_NaN();
        }
    } sys{1.0};
    for (double sigma : {4.0, 8.0}) {
        for (int clamped : {0, 1}) {
            const double a = 65.0;
            StepperOptions opt;
            opt.rel_tol = opt.abs_tol = 1e-12;
            opt.max_step = 1.0;
            opt.min_step = 1e-14;
            auto limit = [&](double x, const Vec<2>& y) {
                const double q = 0.5 * std::abs(x) * (1.0 + y[1] * y[1]);
                return clamped ? 2.0 / std::max(q, 1e-6) : 1.0;
            };
            try {
                std::size_t steps = 0;
                Vec<2> y{sigma * a, sigma};
                const double t0 = now_ms();
                integrate_to<2>(
                    sys, a, Vec<2>{sigma * a, sigma}, 50.0, opt,
                    [&](double, const Vec<2>&, double, const Vec<2>& ynew, const Vec<2>&) {
                        ++steps;
                        y = ynew;
                        return true;
                    },
                    limit);
                // Defect of one interval [49, 50] re-integrated with clamp.
                Vec<2> y2 = y;
                integrate_to<2>(
                    sys, 50.0, y, 49.0, opt,
                    [&](double, const Vec<2>&, double, const Vec<2>& yn, const Vec<2>&) {
                        y2 = yn;
                        return true;
                    },
                    limit);
                Vec<2> back = y2;
                integrate_to<2>(
                    sys, 49.0, y2, 50.0, opt,
                    [&](double, const Vec<2>&, double, const Vec<2>& yn, const Vec<2>&) {
                        back = yn;
                        return true;
                    },
                    limit);
                std::printf(
                    "stiff sigma=%g clamp=%d: u(50)=%.12e du=%.12e dev=%.3e steps=%zu "
                    "roundtrip_err=%.3e (%.0f ms)\n",
                    sigma, clamped, y[0], y[1], y[0] - sigma * 50.0, steps,
                    std::max(std::abs(back[0] - y[0]), std::abs(back[1] - y[1])), now_ms() - t0);
            } catch (const std::exception& ex) {
                std::printf("stiff sigma=%g clamp=%d FAILED: %s\n", sigma, clamped, ex.what());
            }
        }
    }
}

void run_cauchy() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    EndSolverConfig e;
    IvpResult r20 = solve_end_ivp(1.0, 20.0, e, cfg);
    IvpResult r40 = solve_end_ivp(1.0, 40.0, e, cfg);
    std::printf("cauchy: u20(0)=%.15e u40(0)=%.15e |diff|=%.3e\n", r20.grid.u.front(),
                r40.grid.u.front(), std::abs(r40.grid.u.front() - r20.grid.u.front()));
    std::printf("envelope sup on [1,20] (a=20): %.6f  grad %.6f\n", r20.envelope_sup,
                r20.grad_envelope_sup);
}

void run_family() {
    for (double alpha : {1.0, 2.0, 6.0}) {
        DomainConfig cfg = DomainConfig::with_alpha(alpha);
        EndSolverConfig e;
        for (double sigma : {0.05, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double t0 = now_ms();
            try {
                ConicalEnd end = solve_end(sigma, e, cfg);
                std::printf(
                    "family alpha=%g sigma=%-5g u0=%.12e resid=%.3e a_last=%g runs=%zu  (%.0f ms)\n",
                    alpha, sigma, end.u0, end.residual, end.a_used.back(), end.a_used.size(),
                    now_ms() - t0);
            } catch (const std::exception& ex) {
                std::printf("family alpha=%g sigma=%-5g FAILED: %s\n", alpha, sigma, ex.what());
            }
        }
    }
}

EndGrid deviation_of(const ConicalEnd& end, double b) {
    EndGrid v;
    for (std::size_t i = 0; i < end.grid.size(); ++i) {
        if (end.grid.x[i] < b - 1e-12) continue;
        v.x.push_back(end.grid.x[i]);
        v.u.push_back(end.grid.u[i] - end.sigma * end.grid.x[i]);
        v.du.push_back(end.grid.du[i] - end.sigma);
    }
    return v;
}

void run_norm() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    EndSolverConfig e;
    e.x_max = 120.0;
    ConicalEnd end = solve_end(1.0, e, cfg);
    EndGrid v = deviation_of(end, 4.0);
    for (double t : {4.2, 7.0, 20.0, 60.0}) {
        const double norm = tail_weight_normalization(1.0, v, t, e, cfg);
        std::printf("norm t=%-5g  |1-norm|=%.3e\n", t, std::abs(norm - 1.0));
    }
}

void run_fixedpoint() {
    for (double sigma : {0.5, 1.0, 2.0}) {
        DomainConfig cfg = DomainConfig::with_alpha(1.0);
        EndSolverConfig e;
        e.x_max = 120.0;
        ConicalEnd end = solve_end(sigma, e, cfg);
        const double b = std::max(4.0, std::sqrt(8.0 * (1.0 + sigma * sigma)) / sigma);
        EndGrid v = deviation_of(end, b);
        const double t0 = now_ms();
        EndGrid tv = apply_T(sigma, v, e, cfg);
        const double t1 = now_ms();
        double c0 = 0.0, c1 = 0.0, bound = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v.x[i] > 50.0) break;
            c0 = std::max(c0, std::abs(tv.u[i] - v.u[i]));
            c1 = std::max(c1, std::abs(tv.du[i] - v.du[i]));
            bound = std::max(bound, tv.u[i] * (sigma * v.x[i]) / (2.0 * cfg.alpha));
        }
        std::printf("fixedpoint sigma=%g b=%.3f  C0=%.3e C1=%.3e  Tv*sx/2a<=%.3f (%.0f ms)\n",
                    sigma, b, c0, c1, bound, t1 - t0);
    }
}

void run_picard() {
    for (double sigma : {0.5, 1.0, 2.0}) {
        DomainConfig cfg = DomainConfig::with_alpha(1.0);
        EndSolverConfig e;
        const double t0 = now_ms();
        ConicalEnd pic = picard_solve(sigma, e, cfg);
        const double t1 = now_ms();
        const PicardRecord& r = *pic.picard;
        // Agreement with the shooting construction.
        ConicalEnd ivp = solve_end(sigma, e, cfg);
        double sup = 0.0, sup_d = 0.0;
        for (std::size_t i = 0; i < pic.grid.size(); ++i) {
            const double x = pic.grid.x[i];
            sup = std::max(sup, std::abs(pic.grid.u[i] - value_at(ivp.grid, x)));
            sup_d = std::max(sup_d, std::abs(pic.grid.du[i] - hermite_at(ivp.grid, x, true)));
        }
        std::printf(
            "picard sigma=%g b=%.3f iters=%d tau=%.4f step=%.2e resid=%.2e u0=%.9e "
            "sup|pic-ivp|=%.3e sup'=%.3e (%.0f ms)\n",
            sigma, r.b, r.iterations, r.tau_hat, r.final_step, pic.residual, pic.u0, sup, sup_d,
            t1 - t0);
    }
}

void run_identity() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    EndSolverConfig e;

    // Cylinder arc on [0.5, 5].
    EndGrid cyl;
    const double rc = std::sqrt(2.0);
    for (double x = 0.5; x <= 5.0 + 1e-9; x += 0.025) {
        cyl.x.push_back(x);
        cyl.u.push_back(rc);
        cyl.du.push_back(0.0);
    }
    IdentityReport rep = evaluate_general_identity(cyl, 1.0, false, e, cfg);
    std::printf("identity cylinder: resid=%.3e c1=%.6f c2=%.6f annih=%.3e\n", rep.residual,
                rep.homogeneous_c1, rep.homogeneous_c2, rep.annihilation);

    // Shooting arc anchored at a=10.
    IvpResult arc = solve_end_ivp(1.0, 10.0, e, cfg);
    rep = evaluate_general_identity(arc.grid, 1.0, false, e, cfg);
    std::printf("identity sigma-arc a=10: resid=%.3e c1=%.6f c2=%.3e annih=%.3e\n", rep.residual,
                rep.homogeneous_c1, rep.homogeneous_c2, rep.annihilation);

    // Infinite-anchor variant on a fully converged end, window (2, 40).
    EndSolverConfig e40 = e;
    e40.x_max = 40.0;
    ConicalEnd end = solve_end(1.0, e40, cfg);
    EndGrid tail40;
    for (std::size_t i = 0; i < end.grid.size(); ++i) {
        if (end.grid.x[i] < 2.0 - 1e-12) continue;
        tail40.x.push_back(end.grid.x[i]);
        tail40.u.push_back(end.grid.u[i]);
        tail40.du.push_back(end.grid.du[i]);
    }
    rep = evaluate_general_identity(tail40, 2.0, true, e40, cfg);
    std::printf("identity infinite (2,40): resid=%.3e c1=%.6f annih=%.3e\n", rep.residual,
                rep.homogeneous_c1, rep.annihilation);
    // Doubled-resolution quadrature oracle.
    EndSolverConfig e2 = e40;
    e2.quad_rel_tol = 1e-13;
    e2.quad_tail_eps = 1e-16;
    IdentityReport rep2 = evaluate_general_identity(tail40, 2.0, true, e2, cfg);
    std::printf("identity infinite tight-quad: resid=%.3e  delta=%.3e\n", rep2.residual,
                std::abs(rep2.residual - rep.residual));
}

void run_sgrid() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    EndSolverConfig e;
    e.x_max = 120.0;
    ConicalEnd end = solve_end(1.0, e, cfg);

    // Inverse graph f(r) = x with f' = 1/u', nodes at r_i = u(x_i).
    EndGrid f;
    for (std::size_t i = 0; i < end.grid.size(); ++i) {
        if (end.grid.x[i] < 1.0) continue;
        f.x.push_back(end.grid.u[i]);
        f.u.push_back(end.grid.x[i]);
        f.du.push_back(1.0 / end.grid.du[i]);
    }
    const double t0 = now_ms();
    EndGrid sf = apply_S(1.0, f, e, cfg);
    const double t1 = now_ms();
    double c0 = 0.0, envC = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = f.x[i];
        if (r < 3.0 || r > 30.0) continue;
        c0 = std::max(c0, std::abs(sf.u[i] - f.u[i]));
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = f.x[i];
        envC = std::max(envC, std::abs(sf.u[i] - r / 1.0) * r / cfg.alpha);
    }
    std::printf("sgrid fixed-point C0 on [3,30]: %.3e  envelope C=%.3f (%.0f ms)\n", c0, envC,
                t1 - t0);

    // Zero input: S(0) must be exactly r/sigma.
    EndGrid zero;
    for (double r = 1.0; r <= 60.0 + 1e-9; r += 0.25) {
        zero.x.push_back(r);
        zero.u.push_back(0.0);
        zero.du.push_back(0.0);
    }
    EndGrid sz = apply_S(2.0, zero, e, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < sz.size(); ++i)
        worst = std::max(worst, std::abs(sz.u[i] - sz.x[i] / 2.0));
    std::printf("sgrid zero-input |S0 - r/sigma| = %.3e\n", worst);
}

void run_blowup() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    const double rt2 = std::sqrt(2.0);
    for (double x0 : {1.0, 2.0, 5.0}) {
        BlowupReport rep = blowup_experiment(rt2, x0, cfg);
        std::printf(
            "blowup sigma=rt2 x0=%g: x_inf=%.6f angle_bound=%.6f ratio=%.4f cyl=%d angle_ok=%d "
            "ratio_ok=%d tan_ok=%d cmp_ok=%d\n",
            x0, rep.x_inf, rep.angle_bound, rep.x_inf / x0, rep.cylinder_case,
            rep.within_angle_bound, rep.within_ratio_bound, rep.tangent_bound_ok,
            rep.comparison_ok);
    }
    BlowupReport rep = blowup_experiment(1.0, 5.0, cfg);
    std::printf("blowup sigma=1 x0=5: x_inf=%.6f bound=%.6f angle_ok=%d tan_ok=%d cmp_ok=%d\n",
                rep.x_inf, rep.angle_bound, rep.within_angle_bound, rep.tangent_bound_ok,
                rep.comparison_ok);
}

void run_props() {
    DomainConfig cfg = DomainConfig::with_alpha(1.0);
    EndSolverConfig e;
    for (double sigma : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        ConicalEnd end = solve_end(sigma, e, cfg);
        PropertyReport rep = verify_end_properties(end, e, cfg);
        std::printf(
            "props sigma=%-4g cone=%d margin=%.3e u0_below=%d u0_margin=%.3e decay_u=%.4f "
            "decay_du=%.4f meanconv=%d strict=%d conv_resid=%.3e\n",
            sigma, rep.cone_domination, rep.cone_margin, rep.u0_below_cylinder, rep.u0_margin,
            rep.decay_exp_u, rep.decay_exp_du, rep.mean_convex, rep.strictly_convex,
            rep.convexity_identity_residual);
    }
}

}  // namespace

int main(int argc, char** argv) {
    const std::string which = argc > 1 ? argv[1] : "all";
    auto want = [&](const char* name) { return which == "all" || which == name; };
    if (want("stiff")) run_stiff();
    if (want("diag")) run_diag();
    if (want("extrap")) run_extrap();
    if (want("ivp")) {
        run_ivp(1.0, 1.0);
        run_ivp(1.0, 0.25);
        run_ivp(6.0, 0.5);
    }
    if (want("cauchy")) run_cauchy();
    if (want("family")) run_family();
    if (want("norm")) run_norm();
    if (want("fixedpoint")) run_fixedpoint();
    if (want("picard")) run_picard();
    if (want("identity")) run_identity();
    if (want("sgrid")) run_sgrid();
    if (want("blowup")) run_blowup();
    if (want("props")) run_props();
    return 0;
}
