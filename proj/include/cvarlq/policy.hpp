#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "cvarlq/riccati.hpp"

namespace cvarlq {

/// G̃ = P − PB(R + BᵀPB)⁻¹BᵀP for a PD cost-to-go P. Satisfies 0 ≺ G̃ ⪯ P.
Mat g_tilde(const Mat& P_next, const LqProblem& problem);

/// ĥ(x, s, M11) = xᵀ(Aᵀ(G̃⁻¹ − M11⁻¹)⁻¹A + Q)x − s with G̃ = g_tilde(P_next).
/// Requires M11 ≻ G̃; throws Error(InnerMatrixNotPD) otherwise.
double h_hat(const Vec& x, double s, const Mat& M11, const Mat& P_next,
             const LqProblem& problem);

/// Assembles the (3n+m+1)-dimensional certification matrix
///   Φ + Q̄ᵀuP̄ + (Q̄ᵀuP̄)ᵀ,  Φ = [[M − G_s, (K^x)ᵀ], [K^x, H⁻¹]],
/// with M = diag(M11, M22). Block layout (0-based coordinates):
///   [0, n)            M11 rows
///   [n]               M22 / budget coordinate
///   [n+1, 2n+1)       successor block of H
///   [2n+1, 3n+1)      state block of H
///   [3n+1, 3n+m+1)    control block of H — the only rows u touches,
///                     paired with column n.
/// Symmetrized before returning. Pass u = 0 to obtain Φ itself.
Mat assemble_lmi(const Vec& x, double s, const Vec& u, const Mat& M11, double M22,
                 const Mat& P_next, const LqProblem& problem);

/// Numerical witness that the chosen control keeps the assembled matrix
/// positive (semi)definite at M = diag(M11, M22).
struct LmiCertificate {
    int t = 0;
    Mat M11;
    double M22 = 0.0;
    Vec u;
    double min_eig = 0.0;
    bool passed = false;
};

/// Risk-averse control step: M11* = P_{t+1} + L, M22* = max(ĥ, 0) plus a
/// slack delta = slack_rel * max(1, |ĥ|) restoring strict feasibility, and
/// u = K_t x (the quadratic minimizer; independent of s by construction).
/// The certificate passes iff min_eig >= -1e-9 (1 + ‖Φ‖_F); a failure
/// signals a conditioning bug, never expected behavior.
std::pair<Vec, LmiCertificate> synthesize_acvar_control(
    const Vec& x, double s, int t, const AcvarSchedule& schedule,
    const LqProblem& problem, double slack_rel = 1e-7);

struct ZeroPolicy {};

struct LinearFeedback {
    std::vector<Mat> K;  // one m x n gain per t
};

/// Linear state feedback from an AcvarSchedule. When certify is set, every
/// rollout step also assembles and checks the LMI certificate (an eigen
/// decomposition per step); leave it off for large Monte-Carlo sweeps.
struct AcvarCertified {
    AcvarSchedule schedule;
    bool certify = false;
    double lmi_slack = 1e-7;
};

/// Tabulated controller over an (x, s) grid; control is looked up at the
/// nearest grid node (controls are never interpolated across the value
/// function's kink). Scalar state only.
struct GridPolicy {
    std::vector<double> x_nodes;
    std::vector<double> s_nodes;
    std::vector<Mat> tables;  // N tables, |x_nodes| x |s_nodes|
};

struct Policy {
    std::variant<ZeroPolicy, LinearFeedback, AcvarCertified, GridPolicy> impl;

    static Policy zero() { return {ZeroPolicy{}}; }
    static Policy linear_feedback(std::vector<Mat> K) { return {LinearFeedback{std::move(K)}}; }
    static Policy acvar(AcvarSchedule schedule, bool certify = false) {
        return {AcvarCertified{std::move(schedule), certify}};
    }
    static Policy grid(GridPolicy g) { return {std::move(g)}; }

    /// Control at augmented state (x, s) and time t.
    Vec control(const Vec& x, double s, int t, const LqProblem& problem) const;
};

struct StepResult {
    Vec x_next;
    double s_next = 0.0;
    Vec u;
    double cost = 0.0;
};

/// One augmented-state transition: u from the policy, c = stage_cost(x, u),
/// x' = Ax + Bu + w, s' = s − c.
StepResult rollout_step(const Policy& policy, const Vec& x, double s, int t,
                        const Vec& w, const LqProblem& problem);

/// s_0 = x_0ᵀ P_0 x_0.
double initial_budget(const Vec& x0, const AcvarSchedule& schedule);

/// Closed form of inf_s s + (a_0 + max(x_0ᵀP_0x_0 − s, 0))/α, attained at
/// the kink s* = x_0ᵀP_0x_0: returns x_0ᵀP_0x_0 + a_0/α.
double upper_bound_J(const Vec& x0, double alpha, const AcvarSchedule& schedule);

} // namespace cvarlq
