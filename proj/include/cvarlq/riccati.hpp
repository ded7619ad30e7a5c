#pragma once

#include <vector>

#include "cvarlq/model.hpp"

namespace cvarlq {

/// Backward schedule of the risk-averse recursion
///   P_t = Aᵀ(P_{t+1}⁻¹ + BR⁻¹Bᵀ − (P_{t+1}+L)⁻¹)⁻¹A + Q,
///   a_t = a_{t+1} + tr(Σ(P_{t+1}+L)),
/// with P_N = Qf, a_N = 0, parameterized by the risk matrix L > 0.
///
/// S and K are derived objects: S[t] = (P_{t+1}⁻¹ − (P_{t+1}+L)⁻¹)⁻¹ is the
/// effective cost-to-go matrix at step t and K[t] the gain minimizing
/// uᵀRu + (Ax+Bu)ᵀ S[t] (Ax+Bu), so that completing the square reproduces
/// P_t exactly.
struct AcvarSchedule {
    Mat L;
    std::vector<Mat> P;       // size N+1, indexed by t
    std::vector<double> a;    // size N+1, indexed by t
    std::vector<Mat> S;       // size N;  S[t] is S_{t+1}
    std::vector<Mat> K;       // size N;  u_t = K[t] x_t
    int N = 0;
};

/// LEQR schedule: P̄_t = Aᵀ(P̄_{t+1}⁻¹ + BR⁻¹Bᵀ − γΣ)⁻¹A + Q, feasible only
/// while Σ⁻¹ − γP̄_{t+1} stays positive definite. Infeasibility is data, not
/// an error; Pbar entries below failed_at are left empty.
struct LeqrSchedule {
    double gamma = 0.0;
    std::vector<Mat> Pbar;    // size N+1, indexed by t
    std::vector<Mat> Ptilde;  // size N; Ptilde[t] = (P̄_{t+1}⁻¹ − γΣ)⁻¹
    std::vector<Mat> K;       // size N
    bool feasible = true;
    int failed_at = -1;       // first (largest) t whose step failed
};

/// Soft-constrained LQ game schedule (requires R = I). Only invertibility of
/// each P̂_t is demanded; definiteness is recorded by the caller if wanted.
struct LqGameSchedule {
    double lambda = 0.0;
    std::vector<Mat> Phat;    // size N+1, indexed by t
    bool feasible = true;
    int failed_at = -1;
};

/// Risk-neutral LQR schedule.
struct LqrSchedule {
    std::vector<Mat> P;  // size N+1
    std::vector<Mat> K;  // size N
};

AcvarSchedule acvar_recursion(const LqProblem& problem, const Mat& L);

LeqrSchedule leqr_recursion(const LqProblem& problem, double gamma);

/// sup{γ > 0 : leqr_recursion feasible}, bracketing + bisection to absolute
/// width tol. Throws Error(NoFeasibleGamma) if even γ = 1e-12 fails.
double critical_gamma(const LqProblem& problem, double tol);

LqGameSchedule lq_game_recursion(const LqProblem& problem, double lambda);

LqrSchedule lqr_recursion(const LqProblem& problem);

/// ‖P_0^{acvar}(L_scale·I) − P_0^{lqr}‖_F / ‖P_0^{lqr}‖_F.
double acvar_lqr_limit_gap(const LqProblem& problem, double L_scale);

} // namespace cvarlq
