#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace shrinker {

// Thrown when an argument violates a documented precondition (bad alpha,
// nonpositive radius, sigma out of range, ...).
class domain_error : public std::invalid_argument {
public:
    explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when an iteration or integration fails to reach its target
// (step underflow, divergent fixed-point iteration, no bracket, ...).
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// Shared numerical configuration for every solver in the library.
//
// alpha is the weight of the 1/r term in the profile-curve equation; the
// hypersurface of revolution in R^{n+1} corresponds to alpha = n - 1, and
// any real alpha >= 0 is accepted.  Tolerances below are the knobs shared
// by the integrators; module-specific settings live in their own structs.
struct DomainConfig {
    double alpha = 1.0;

    double rel_tol = 1e-10;       // relative tolerance of the adaptive stepper
    double abs_tol = 1e-10;       // absolute tolerance of the adaptive stepper
    double max_step = 0.1;        // largest accepted arclength / x step
    double min_step = 1e-12;      // below this the stepper reports underflow
    double r_axis_eps = 1e-6;     // radius below which the axis snap engages
    double event_eps = 1e-10;     // refinement target for event locations

    static DomainConfig with_alpha(double a) {
        DomainConfig c;
        c.alpha = a;
        c.validate();
        return c;
    }

    // Convenience for the geometric case: surface dimension n >= 2.
    static DomainConfig with_dimension(int n) {
        if (n < 2) throw domain_error("DomainConfig: dimension n must be >= 2");
        return with_alpha(static_cast<double>(n - 1));
    }

    // Radius of the invariant cylinder line r = sqrt(2 alpha).
    double cylinder_radius() const { return std::sqrt(2.0 * alpha); }

    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw domain_error("DomainConfig: alpha must be finite and >= 0");
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw domain_error("DomainConfig: tolerances must be positive");
        if (!(max_step > 0.0) || !(min_step > 0.0) || !(min_step < max_step))
            throw domain_error("DomainConfig: need 0 < min_step < max_step");
        if (!(r_axis_eps > 0.0) || !(event_eps > 0.0))
            throw domain_error("DomainConfig: need positive r_axis_eps and event_eps");
    }
};

// Rectangular integration window in the half-plane.  A trajectory sample
// leaving the window terminates the run; r <= 0 is handled separately by
// the axis logic, so only the outer bounds appear here.
struct DomainWindow {
    double x_min = -60.0;
    double x_max = 60.0;
    double r_max = 60.0;

    bool contains(double x, double r) const {
        return x >= x_min && x <= x_max && r <= r_max;
    }
};

} // namespace shrinker
