#pragma once
// Cone-asymptotic graphical ends r = u(x) of the rotationally symmetric
// shrinker equation, built two independent ways:
//
//   1. backward shooting: integrate the profile ODE leftward from far-field
//      cone data u(a) = sigma*a, u'(a) = sigma, then drive the anchor a to
//      infinity through a doubling schedule;
//   2. fixed-point iteration of the tail integral operator T on the
//      deviation v = u - sigma*x over a tail domain [b, infinity).
//
// The module also evaluates the exact integral representation of solutions
// (variation of parameters around the frozen linear operator annihilated by
// x -> x), the companion operator S for inverse graphs x = f(r), finite-time
// graph blow-up experiments, and the qualitative property checks (cone
// domination, decay rates, mean convexity, strict convexity).

#include <cstddef>
#include <optional>
#include <vector>

#include "shrinker/config.hpp"

namespace shrinker {

// Graph table: strictly increasing x, value u, slope du.  Depending on the
// operation this holds a full profile u(x), a deviation v(x) = u - sigma*x,
// or an inverse graph f(r) (then "x" is the radius variable).
struct EndGrid {
    std::vector<double> x;
    std::vector<double> u;
    std::vector<double> du;
    std::size_t size() const { return x.size(); }
};

// Outcome of the fixed-point construction.
struct PicardRecord {
    double b = 0.0;           // left edge of the tail domain actually used
    int iterations = 0;       // applications of the tail operator
    double final_step = 0.0;  // C1 norm of the last update
    double tau_hat = 0.0;     // sup of successive C1-step ratios (must be < 1)
};

struct ConicalEnd {
    double sigma = 0.0;
    double alpha = 0.0;
    EndGrid grid;                       // profile on [0, x_max] (tail: [b, x_max])
    std::vector<double> a_used;         // anchors consumed by the schedule
    std::optional<PicardRecord> picard; // present when built by fixed point
    double residual = 0.0;              // sup ODE defect of the grid (re-integration)
    double u0 = 0.0;                    // profile value at the left grid edge
};

struct EndSolverConfig {
    double a0 = 0.0;               // first anchor; 0 picks max(64, 1.3*x_max, 3*sqrt(2 alpha)/sigma)
    int max_doublings = 8;         // schedule length cap
    double richardson_tol = 1e-8;  // stop: successive u(0) difference below this
    int min_doublings = 2;         // never stop before this many doublings
    double picard_b = 0.0;         // 0 picks max(4, sqrt(8 alpha (1+sigma^2))/sigma)
    int picard_b_retries = 3;      // b doublings allowed on divergence
    double quad_tail_eps = 1e-14;  // inner-integral cut where e^{-w} drops below
    double quad_rel_tol = 1e-12;   // adaptive Simpson tolerance on the inner integral
    double x_max = 50.0;           // right edge of reported grids
    double x_work_factor = 2.4;    // work grids extend to max(120, factor*x_max)
    double h_uniform = 0.05;       // node spacing on [1, x_max]
    double geo_first = 1e-3;       // first positive node of the geometric band (0,1)
    double geo_ratio = 1.2;        // geometric band growth ratio
    void validate() const;
};

// Backward-shot approximant on [0, a]: far-field cone data at x = a
// integrated leftward to the axis of symmetry.  envelope_sup and
// grad_envelope_sup are the worst ratios of |u - sigma x| against
// 2 alpha/(sigma x) and of |u' - sigma| against 2 alpha/(sigma x^2)
// over nodes with x >= 1 (<= 1 means the bound holds).
struct IvpResult {
    EndGrid grid;
    double envelope_sup = 0.0;
    double grad_envelope_sup = 0.0;
};
IvpResult solve_end_ivp(double sigma, double a, const EndSolverConfig& ecfg,
                        const DomainConfig& cfg);

// Full end on [0, x_max] via the anchor-doubling schedule with a
// convergence stop measured at x = 0.  Throws solver_error when the
// schedule is exhausted without meeting richardson_tol.
ConicalEnd solve_end(double sigma, const EndSolverConfig& ecfg, const DomainConfig& cfg);

// One application of the tail integral operator to a deviation grid v on
// [b, x_end]: [T v](x) = 2 alpha x Integral_x^inf t^-2 J(t) dt with
// J(t) = Integral_0^inf e^{-w} / u(s(w)) dw, w the cumulative exponent
// substitution, u = v + sigma s (model tail beyond the grid).  Returns the
// new deviation and its derivative (T v)'(x) = [T v](x)/x - (2 alpha/x) J(x)
// on the same nodes.  Throws domain_error if v is not admissible
// (v <= 0 somewhere, or |v'| >= 4 alpha/(sigma x^2)); accepts v = 0 exactly.
EndGrid apply_T(double sigma, const EndGrid& v, const EndSolverConfig& ecfg,
                const DomainConfig& cfg);

// Self-test of the exponent-substitution quadrature behind apply_T: the
// weight normalization Integral_t^inf Q'(s) e^{-(Q(s)-Q(t))} ds, which is
// exactly 1 for every admissible deviation grid and every t in its span.
double tail_weight_normalization(double sigma, const EndGrid& v, double t,
                                 const EndSolverConfig& ecfg, const DomainConfig& cfg);

// Fixed-point construction of the tail: iterate apply_T from v = 0 until the
// C1 step falls below 1e-10.  Grid spans [b, x_max]; the record stores the
// measured contraction factor.  Doubles b and retries on divergence.
ConicalEnd picard_solve(double sigma, const EndSolverConfig& ecfg, const DomainConfig& cfg);

// Variation-of-parameters reconstruction of a graphical arc from its
// right-endpoint data: u(x) = c1 x + c2 u2(x) + particular double integral,
// where u2 is the integral-defined second homogeneous solution of the
// frozen linear operator (whose first solution is x -> x) and the
// inhomogeneity is (1+u'^2) alpha / u.  residual is the sup mismatch over
// [x_lo, arc end]; annihilation is the frozen-operator residual on x -> x.
// With infinite_tail the reconstruction uses the anchor-free tail form: the
// cone slope and the two leading decay coefficients are pinned by u, u', and
// the equation's own u'' at the right endpoint, c2 = 0 by taking a -> infinity
// with the model tail.  Otherwise the finite right endpoint supplies the
// Cauchy data.
struct IdentityReport {
    double residual = 0.0;
    double homogeneous_c1 = 0.0;  // u(a)/a
    double homogeneous_c2 = 0.0;  // u(a) - a u'(a)
    double annihilation = 0.0;
};
IdentityReport evaluate_general_identity(const EndGrid& arc, double x_lo, bool infinite_tail,
                                         const EndSolverConfig& ecfg, const DomainConfig& cfg);

// Companion operator for inverse graphs x = f(r):
// [S f](r) = r/sigma - alpha r Integral_r^inf t^-2 Integral_0^inf
//            (2 f'(s)/s) e^{-w} dw dt, same substitution machinery.
EndGrid apply_S(double sigma, const EndGrid& f, const EndSolverConfig& ecfg,
                const DomainConfig& cfg);

// Forward run from cone data u(x0) = sigma x0, u'(x0) = sigma (so the
// shooting quantity x u' - u vanishes at x0) until the graph becomes
// vertical, in arclength form.  Checks the angle-comparison upper bound on
// the blow-up abscissa, the ratio bound active when u(x0) >= sqrt(2 alpha),
// the pointwise tangent lower bound, and the per-sample comparison
// inequality Psi' > Psi/2 >= 0.
struct BlowupReport {
    double x_inf = 0.0;
    double angle_bound = 0.0;  // x0 + (sigma x0/alpha)(pi/2 - arctan sigma)
    bool within_angle_bound = false;
    bool cylinder_case = false;      // u(x0) >= sqrt(2 alpha)
    bool within_ratio_bound = false; // x_inf <= (1 + 1/alpha) x0, when cylinder_case
    bool tangent_bound_ok = false;   // u' >= tan(alpha (x-x0)/(sigma x0) + arctan sigma)
    bool comparison_ok = false;      // Psi' > Psi/2 >= 0 at all graphical samples
};
BlowupReport blowup_experiment(double sigma, double x0, const DomainConfig& cfg);

// Qualitative checks on a computed end.  decay exponents are least-squares
// slopes in log-log coordinates over the calibrated far-field window.
struct PropertyReport {
    bool cone_domination = false;  // u > sigma x strictly at all nodes
    double cone_margin = 0.0;      // min over nodes of u - sigma x
    bool u0_below_cylinder = false;
    double u0_margin = 0.0;        // sqrt(2 alpha) - u(0)
    double decay_exp_u = 0.0;      // slope of log|u - sigma x| vs log x
    double decay_exp_du = 0.0;     // slope of log|u' - sigma| vs log x
    bool mean_convex = false;      // H > 0 at all nodes (Psi < 0)
    bool strictly_convex = false;  // u'' > 0 and 0 < u' < sigma at interior nodes
    double convexity_identity_residual = 0.0;  // ODE u'' vs twice-differentiated tail form
    bool cylinder_equality_case = false;       // degenerate sigma = 0 member
};
PropertyReport verify_end_properties(const ConicalEnd& end, const EndSolverConfig& ecfg,
                                     const DomainConfig& cfg);

}  // namespace shrinker
