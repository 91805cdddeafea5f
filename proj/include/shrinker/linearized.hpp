#pragma once

// Linearization of the radial-graph equation at the plane limit: the unit
// solution g of
//
//     g''(r) = (r/2 - alpha/r) g'(r) - g(r)/2,
//
// normalized to asymptotic slope 1 at infinity, together with its integral
// representation
//
//     g(r) = slope*r - alpha r Int_r^inf t^-2 Int_t^inf g'(s) e^{(t^2-s^2)/4} ds dt,
//
// and the finite-difference link to the reciprocal-slope family of conical
// ends: writing the end with cone slope sigma as a graph x(r) over the radial
// axis, sigma*x(r) converges to g(r) at first order in 1/sigma.

#include <cstddef>
#include <vector>

#include "shrinker/config.hpp"
#include "shrinker/ends.hpp"

namespace shrinker {

struct LinearizedConfig {
    double r_min = 1e-3;      // innermost grid node (the equation is singular at r = 0)
    double r_max = 40.0;      // far seed radius
    double h_uniform = 0.05;  // target node spacing on [1, r_max]
    double geo_ratio = 1.2;   // descending mesh ratio on (r_min, 1)
    double seed_slope = 1.0;  // asymptotic slope of the far-field seed (nonzero)
    double quad_rel_tol = 1e-12;  // tolerance of the cross-check quadrature

    void validate() const;  // throws domain_error on unusable settings
};

// The computed solution on an ascending grid over [r_min, r_max], plus the
// diagnostics frozen at solve time.  Backward integration from r_max avoids
// the singular point; the r -> 0 limit comes from the integral representation
// instead of the equation.
struct LinearizedSolution {
    std::vector<double> r;
    std::vector<double> g;
    std::vector<double> dg;
    double slope = 1.0;  // normalization tag: g(r)/r -> slope as r -> infinity
    double c1 = 0.0;     // fitted 1/r coefficient of the far-field seed

    double identity_residual = 0.0;  // sup |g - I[g]| over [0.1, r_max/2]
    double defect = 0.0;             // sup re-integration defect over [0.01, r_max]
    double limit_value = 0.0;        // -alpha Int_0^inf g'(s) e^{-s^2/4} ds
    double limit_mismatch = 0.0;     // |g(r_min) - limit_value|
    int sign_changes = 0;            // observed sign changes of g along the grid
    double sign_change_r = 0.0;      // location of the last sign change (0 if none)

    std::size_t size() const { return r.size(); }
};

// One row of the slope-family limit table: the end with cone slope
// 1/sigma_hat, read as a graph x(r) over the radial axis and rescaled by
// 1/sigma_hat, compared against g on a fixed window.
struct SigmaLimitRow {
    double sigma_hat = 0.0;  // reciprocal cone slope of the end used
    double sup_error = 0.0;  // sup over window nodes of |x(r)/sigma_hat - g(r)|
    bool envelope_ok = false;    // x'(r)/sigma_hat < (1 - 2 alpha/r^2)^{-1} where defined
    double min_x = 0.0;          // minimum of the continued graph below the window
    bool dips_negative = false;  // min_x < 0: the graph crosses the radial axis
    double r_turn = 0.0;         // height at which the continuation turns vertical
};

struct SigmaLimitTable {
    std::vector<SigmaLimitRow> rows;  // in the order of the supplied sigma_hat list
    std::vector<double> orders;       // empirical order between consecutive rows
    double window_lo = 0.0;
    double window_hi = 0.0;
};

// Result of the slope-trap probe: integrating the linearized equation
// forward from a state with g > 0 and g' <= 0, the slope must stay negative
// until the solution crosses zero, and the crossing must occur.
struct TrapProbe {
    bool slope_negative_throughout = false;  // g' < 0 strictly after the start
    bool crossed_zero = false;               // g reached 0 before r_hi
    double r_cross = 0.0;                    // first crossing location (0 if none)
};

// Solve the linearized equation backward from r_max with the two-term
// asymptotic seed g = slope*r + c1/r; c1 is fitted by one Newton correction
// on the integral-representation residual at r_max/2.  Throws domain_error
// on bad configuration and solver_error if the stepper underflows near the
// singular point or a solution invariant fails.
LinearizedSolution solve_linearized(const LinearizedConfig& lcfg, const DomainConfig& cfg);

// Sup-norm residual of the integral representation over [r_lo, r_hi] (grid
// nodes).  Works for any grid data, solution or not; the representation
// distinguishes true solutions.  Throws solver_error on a quadrature
// cross-check failure.
double linearized_identity_residual(const LinearizedSolution& sol, double r_lo, double r_hi,
                                    const DomainConfig& cfg);

// Default window [0.1, r_max/2].
double linearized_identity_residual(const LinearizedSolution& sol, const DomainConfig& cfg);

// Compare rescaled conical ends against g on the window [3, 10] for each
// reciprocal slope in `sigma_hats` (the linearized solve uses unit slope
// regardless of lcfg.seed_slope).  Also continues each end's graph x(r)
// below the window to record the negative dip and the vertical turn.
// Throws domain_error if an end does not span the window ("increase the
// cone slope").
SigmaLimitTable sigma_limit_check(const std::vector<double>& sigma_hats,
                                  const LinearizedConfig& lcfg, const EndSolverConfig& ecfg,
                                  const DomainConfig& cfg);

// Integrate the linearized equation forward from (r0, g0, dg0) with g0 > 0
// and dg0 <= 0 up to r_hi, and report the slope trap: once the slope is
// nonpositive it stays negative, forcing a zero crossing.
TrapProbe probe_slope_trap(double r0, double g0, double dg0, double r_hi,
                           const DomainConfig& cfg);

}  // namespace shrinker
