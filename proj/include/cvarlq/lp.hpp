#pragma once

#include <vector>

#include "cvarlq/linalg.hpp"

namespace cvarlq {

/// Small dense LP in the form
///   maximize cᵀp  s.t.  eq_rows p = eq_rhs,  ineq_rows p <= ineq_rhs,  p >= 0.
/// Desk scale only (k <= 64 variables).
struct LpInstance {
    Vec c;
    Mat eq_rows;    // may have zero rows
    Vec eq_rhs;
    Mat ineq_rows;  // may have zero rows
    Vec ineq_rhs;

    int k() const { return static_cast<int>(c.size()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    Vec p;
};

/// Two-phase primal simplex on a dense tableau with Bland's anti-cycling
/// rule. Returns an optimal basic feasible solution, or diagnoses
/// Infeasible/Unbounded. Throws Error(CycleLimitExceeded) if the pivot
/// budget is exhausted (should be unreachable under Bland's rule).
LpSolution solve_max(const LpInstance& instance);

/// Test oracle: all basic feasible solutions by exhaustive basis
/// enumeration. Throws Error(TooLarge) for k > 10.
std::vector<Vec> enumerate_vertices(const LpInstance& instance);

/// Builds the inner-adversary LP over the moment polytope
///   { p >= 0, sum p = 1, sum w_j p_j = 0, sum w_j w_jᵀ p_j ⪯ Sigma }
/// for a finite scalar support. The moment constraint is linear only for
/// scalar disturbances; throws Error(Unsupported) for dimension > 1 (the
/// general case is a semidefinite program).
LpInstance moment_polytope_lp(const std::vector<Vec>& support, const Mat& Sigma,
                              const Vec& objective);

/// Scalar-support convenience overload.
LpInstance moment_polytope_lp(const std::vector<double>& support, double sigma2,
                              const Vec& objective);

} // namespace cvarlq
