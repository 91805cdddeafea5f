#pragma once

// Profile curves of rotationally symmetric self-shrinkers.
//
// A hypersurface of revolution in R^{n+1} generated by a planar curve
// gamma(s) = (x(s), r(s)) in the half-plane {r > 0} is a self-shrinker
// exactly when gamma is a unit-speed solution of
//
//     x' = cos(theta)
//     r' = sin(theta)
//     theta' = (x/2) sin(theta) + (alpha/r - r/2) cos(theta),
//
// with alpha = n - 1; these are the geodesics of the conformal metric
// r^{2 alpha} exp(-(x^2 + r^2)/2) (dx^2 + dr^2).  This header provides the
// right-hand sides (including the two graph forms), the adaptive
// integrator with event detection and axis handling, and the derived
// pointwise scalars used everywhere else in the library.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace shrinker {

// Unit-speed state along a profile curve.  theta is the unwrapped tangent
// angle, so cos(theta) = dx/ds and sin(theta) = dr/ds.
struct State {
    double s = 0.0;
    double x = 0.0;
    double r = 0.0;
    double theta = 0.0;
};

struct GeodesicRhs {
    double dx;
    double dr;
    double dtheta;
};

// Pointwise quantities attached to every sample:
//   kappa  - planar curvature theta' of the profile curve
//   H      - mean curvature of the revolved hypersurface,
//            H = alpha cos(theta)/r - kappa  (equals -Lambda/2 on solutions)
//   Lambda - x sin(theta) - r cos(theta) = -<gamma, nu>, the graph-free
//            shrinker defect (nu = (-sin theta, cos theta))
//   Psi    - x u' - u expressed intrinsically as Lambda / cos(theta);
//            NaN at non-graphical points (cos theta = 0)
//   Phi    - the graphical curvature factor kappa / cos(theta), so that
//            u'' = Phi (1 + u'^2); NaN at non-graphical points
struct DerivedScalars {
    double H = 0.0;
    double Psi = 0.0;
    double Phi = 0.0;
    double Lambda = 0.0;
    double kappa = 0.0;
};

enum class EventKind : std::int32_t {
    vertical = 0,          // cos(theta) = 0
    horizontal = 1,        // sin(theta) = 0
    raxis_crossing = 2,    // x = 0
    cylinder_crossing = 3, // r = sqrt(2 alpha)
    axis_hit = 4,          // r = 0 endpoint (always orthogonal)
};

const char* event_kind_name(EventKind k);

struct Event {
    EventKind kind;
    State state;
};

enum class Termination : std::int32_t {
    reached_length = 0,
    hit_axis = 1,
    left_window = 2,
    step_underflow = 3,
};

const char* termination_name(Termination t);

enum class DegenerateLine : std::int32_t {
    none = 0,
    r_axis = 1,        // x == 0, vertical line through the origin
    cylinder_line = 2, // r == sqrt(2 alpha)
};

struct Sample {
    State state;
    DerivedScalars scalars;
    // Set when this row was inserted (or coincides with) a refined event.
    std::optional<EventKind> event;
};

struct ProfileCurve {
    std::vector<Sample> samples;
    std::vector<Event> events;
    Termination termination = Termination::reached_length;
    DegenerateLine degenerate = DegenerateLine::none;
    double alpha = 1.0;

    double length() const { return samples.empty() ? 0.0 : samples.back().state.s; }
};

// A maximal graphical arc of a curve: between consecutive vertical points
// the curve is a graph u(x).  Tables are sorted by increasing x regardless
// of traversal direction; `forward` records whether the curve ran with
// cos(theta) > 0 on the arc.
struct GraphArc {
    std::vector<double> x;
    std::vector<double> u;
    std::vector<double> du; // u' = tan(theta)
    double s_begin = 0.0;
    double s_end = 0.0;
    bool forward = true;
};

// --- right-hand sides ---------------------------------------------------

// Geodesic system at (x, r, theta).  Throws domain_error for r <= 0.
GeodesicRhs geodesic_rhs(double x, double r, double theta, const DomainConfig& cfg);

// Graph over the rotation axis: u'' = [x u'/2 + alpha/u - u/2](1 + u'^2).
// Throws domain_error for u <= 0.
double ssode_rhs(double x, double u, double du, const DomainConfig& cfg);

// Graph over the r-axis: f'' = [(r/2 - alpha/r) f' - f/2](1 + f'^2).
// Throws domain_error for r <= 0.
double rgraph_rhs(double r, double f, double df, const DomainConfig& cfg);

// Derived scalars at a state; r = 0 is allowed (axis endpoint limits).
DerivedScalars derived_scalars(double x, double r, double theta, const DomainConfig& cfg);

// --- integration ---------------------------------------------------------

// Integrate the geodesic through `init` for at most `max_length` of
// arclength.  init.r > 0 starts in the open half-plane; init.r = 0
// requires sin(init.theta) = +1 (an ascending orthogonal-axis start, via
// the analytic continuation through the pole).  The curve terminates at
// the axis, at the window boundary, at the length cap, or on step
// underflow.  Samples carry derived scalars; events are refined to
// cfg.event_eps and inserted as flagged rows.
ProfileCurve integrate_geodesic(const State& init, double max_length,
                                const DomainWindow& window, const DomainConfig& cfg);

// Same, but an orthogonal axis hit reflects through the pole and the
// integration continues on the other side (at most `max_bounces` times).
// Across a bounce the stored tangent angle jumps from theta to -theta;
// arclength stays continuous.  Used for closure shooting, where compact
// surfaces pass through the rotation axis.
ProfileCurve integrate_geodesic_through_axis(const State& init, double max_length,
                                             int max_bounces, const DomainWindow& window,
                                             const DomainConfig& cfg);

// Recompute the event list of a curve from its samples (sign changes of
// cos theta, sin theta, x, r - sqrt(2 alpha), refined by bisection with
// local re-integration).  Exact zeros at the first sample are reported;
// the terminal axis endpoint, if any, is reported as axis_hit.
std::vector<Event> detect_events(const ProfileCurve& curve, const DomainConfig& cfg);

// Split a curve into maximal graphical arcs over the x-axis.
std::vector<GraphArc> graph_view(const ProfileCurve& curve, const DomainConfig& cfg);

// Re-integrate from a sample toward larger s and return the state at
// arclength `s_target` (used by event refinement and by consumers needing
// dense values between samples).  `left` must satisfy left.s <= s_target
// and left.r > 0.
State geodesic_state_at(const State& left, double s_target, const DomainConfig& cfg);

// Build a curve from raw samples (s, x, r, theta), recomputing derived
// scalars, events, and the degenerate-line flag.  Used to ingest externally
// produced tables; samples must be strictly increasing in s.
ProfileCurve curve_from_samples(const std::vector<double>& s, const std::vector<double>& x,
                                const std::vector<double>& r,
                                const std::vector<double>& theta, const DomainConfig& cfg);

} // namespace shrinker
