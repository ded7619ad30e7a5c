#pragma once

#include <iosfwd>
#include <vector>

#include "cvarlq/lp.hpp"
#include "cvarlq/policy.hpp"

namespace cvarlq {

/// Discretization of the augmented state space plus control candidates.
struct Grid2 {
    std::vector<double> x_nodes;  // strictly increasing
    std::vector<double> s_nodes;  // strictly increasing
    std::vector<double> u_nodes;  // strictly increasing
};

/// Value tables over x_nodes × s_nodes, one layer per time step, plus the
/// argmin control tables. Layer N is the exact terminal max(x²Qf − s, 0).
struct ValueGrid {
    Grid2 grids;
    std::vector<Mat> V;              // N+1 layers, |x_nodes| x |s_nodes|
    std::vector<Mat> policy_tables;  // N layers
    double Qf_scalar = 0.0;          // quadratic growth rate for x extrapolation

    /// Bilinear interpolation inside the grid; constant extrapolation of the
    /// boundary node in s; quadratic Qf-style extrapolation in x.
    double eval(int t, double x, double s) const;
};

/// Finite scalar disturbance support with second-moment cap sigma2; the
/// adversary may pick any probability vector in the moment polytope.
struct FiniteDisturbance {
    std::vector<double> points;
    double sigma2 = 0.0;
};

/// Robust value iteration (scalar problems): at each node the inner sup over
/// the moment polytope is a linear program, the outer min scans u_nodes with
/// an optional golden-section polish of the bracketing cell.
/// Throws Error(Unsupported) for n > 1 and propagates LP infeasibility when
/// the moment polytope is empty.
ValueGrid robust_value_iteration(const LqProblem& problem, const FiniteDisturbance& dist,
                                 const Grid2& grids, bool golden_refine = true);

/// Same sweep with a known zero-mean Gaussian disturbance; the expectation is
/// Gauss–Hermite quadrature of the given order (>= 8). Requires
/// gauss_std² <= Sigma.
ValueGrid known_dist_value_iteration(const LqProblem& problem, double gauss_std,
                                     int quad_order, const Grid2& grids,
                                     bool golden_refine = true);

/// Wraps the argmin tables as a nearest-node GridPolicy.
Policy extract_policy(const ValueGrid& vg);

/// E[max(Z − s, 0)] for a fixed finite distribution and policy, computed two
/// ways — exhaustive path enumeration and the backward conditional-
/// expectation recursion — asserting agreement to 1e-10 before returning the
/// enumeration value. Guards N <= 4 and support size <= 4 (tree is k^N).
double w_recursion_oracle(const LqProblem& problem, const FiniteDisturbance& dist,
                          const std::vector<double>& probs, const Policy& policy,
                          double x, double s);

struct BoundReport {
    bool pass = false;
    double max_violation = 0.0;  // max over nodes of V̄_0 − V̂_0
    double eps_grid = 0.0;
    double worst_x = 0.0;
    double worst_s = 0.0;
};

/// Grid-level check that V̄_0 <= a_0 + max(x²P_0 − s, 0) + eps_grid, with
/// eps_grid estimated from local second differences of the computed table.
BoundReport verify_upper_bound(const ValueGrid& vg, const AcvarSchedule& schedule);

/// Structural diagnostics for a computed grid. The exact value function is
/// nonnegative, non-increasing in s, and convex in x; the interpolated sweep
/// reproduces the first two to rounding (without argmin refinement) while
/// convexity holds up to a discretization gap that vanishes under mesh
/// refinement. Tests assert accordingly.
struct GridInvariantReport {
    bool terminal_exact = true;
    double min_value = 0.0;             // most negative table entry
    double worst_s_increase = 0.0;      // max over rows of V(s_{j+1}) - V(s_j)
    double worst_convexity_gap = 0.0;   // max over columns of -(undivided D2 in x)
};

GridInvariantReport check_value_grid(const ValueGrid& vg, const LqProblem& problem);

/// Coverage envelope per the declared rule: x-range x0 ± 6σ√N inflated by
/// closed-loop LQR spectral growth, u-range ±2|K_lqr|x_max, s-range from the
/// closed-loop stage-cost scale up to 1.5 x_max² P_0.
Grid2 default_grids(const LqProblem& problem, double x0, int nx, int ns, int nu);

/// Uniformly spaced nodes, inclusive of both endpoints.
std::vector<double> linspace(double lo, double hi, int count);

/// CSV export with columns (t, x, s, value, u_star); the terminal layer has
/// no control and is omitted.
void export_csv(const ValueGrid& vg, std::ostream& os);

/// Gauss–Hermite nodes/weights (physicists' convention) via Golub–Welsch.
void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace cvarlq
