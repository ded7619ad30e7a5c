#include "cvarlq/riccati.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

namespace cvarlq {

namespace {

std::string step_msg(const char* what, int t) {
    return std::string(what) + " at t=" + std::to_string(t);
}

// Gain minimizing uᵀRu + (Ax+Bu)ᵀ M (Ax+Bu) for a PD weight M.
Mat feedback_gain(const LqProblem& p, const Mat& M, int t) {
    const Mat BtM = p.B.transpose() * M;
    return -spd_solve(p.R + BtM * p.B, BtM * p.A, step_msg("gain solve", t).c_str());
}

} // namespace

AcvarSchedule acvar_recursion(const LqProblem& p, const Mat& L) {
    const int n = p.n();
    if (L.rows() != n || L.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "acvar_recursion: L must be n x n");
    }
    if (!is_positive_definite(L)) {
        throw Error(ErrorKind::NotPositiveDefinite, "acvar_recursion: L must be positive definite");
    }

    AcvarSchedule sched;
    sched.L = symmetrized(L);
    sched.N = p.N;
    sched.P.assign(p.N + 1, Mat());
    sched.a.assign(p.N + 1, 0.0);
    sched.S.assign(p.N, Mat());
    sched.K.assign(p.N, Mat());
    sched.P[p.N] = symmetrized(p.Qf);
    sched.a[p.N] = 0.0;

    const Mat BRinvBt = p.B * spd_solve(p.R, p.B.transpose(), "acvar: R");
    for (int t = p.N - 1; t >= 0; --t) {
        const Mat& Pn = sched.P[t + 1];
        const Mat Pn_inv = spd_inverse(Pn, step_msg("acvar: P_{t+1}", t).c_str());
        const Mat PL_inv = spd_inverse(Pn + sched.L, step_msg("acvar: P_{t+1}+L", t).c_str());
        // Always PD: P ≺ P+L implies P⁻¹ ≻ (P+L)⁻¹.
        const Mat inner = Pn_inv + BRinvBt - PL_inv;
        sched.P[t] =
            symmetrized(p.A.transpose() * spd_solve(inner, p.A, step_msg("acvar: inner", t).c_str()) + p.Q);
        sched.a[t] = sched.a[t + 1] + (p.Sigma * (Pn + sched.L)).trace();
        sched.S[t] = spd_inverse(Pn_inv - PL_inv, step_msg("acvar: S", t).c_str());
        sched.K[t] = feedback_gain(p, sched.S[t], t);
    }
    return sched;
}

LeqrSchedule leqr_recursion(const LqProblem& p, double gamma) {
    if (!(gamma > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "leqr_recursion: gamma must be > 0");
    }
    LeqrSchedule sched;
    sched.gamma = gamma;
    sched.Pbar.assign(p.N + 1, Mat());
    sched.Ptilde.assign(p.N, Mat());
    sched.K.assign(p.N, Mat());
    sched.Pbar[p.N] = symmetrized(p.Qf);

    const Mat Sigma_inv = spd_inverse(p.Sigma, "leqr: Sigma");
    const Mat BRinvBt = p.B * spd_solve(p.R, p.B.transpose(), "leqr: R");
    for (int t = p.N - 1; t >= 0; --t) {
        const Mat& Pn = sched.Pbar[t + 1];
        if (!is_positive_definite(Sigma_inv - gamma * Pn)) {
            sched.feasible = false;
            sched.failed_at = t;
            return sched;
        }
        const Mat Pn_inv = spd_inverse(Pn, step_msg("leqr: P_{t+1}", t).c_str());
        sched.Ptilde[t] = spd_inverse(Pn_inv - gamma * p.Sigma, step_msg("leqr: Ptilde", t).c_str());
        sched.K[t] = feedback_gain(p, sched.Ptilde[t], t);
        const Mat inner = Pn_inv + BRinvBt - gamma * p.Sigma;
        sched.Pbar[t] =
            symmetrized(p.A.transpose() * spd_solve(inner, p.A, step_msg("leqr: inner", t).c_str()) + p.Q);
    }
    return sched;
}

double critical_gamma(const LqProblem& p, double tol) {
    if (!(tol > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "critical_gamma: tol must be > 0");
    }
    double lo = 1e-12;
    if (!leqr_recursion(p, lo).feasible) {
        throw Error(ErrorKind::NoFeasibleGamma, "critical_gamma: no feasible gamma (even 1e-12)");
    }
    double hi = 1.0;
    int guard = 0;
    while (leqr_recursion(p, hi).feasible) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 200) {
            throw Error(ErrorKind::ConditioningFailure, "critical_gamma: no infeasible bracket found");
        }
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (leqr_recursion(p, mid).feasible) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

LqGameSchedule lq_game_recursion(const LqProblem& p, double lambda) {
    if (!(lambda > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "lq_game_recursion: lambda must be > 0");
    }
    // The recursion is stated under R = I_m.
    if ((p.R - Mat::Identity(p.m(), p.m())).cwiseAbs().maxCoeff() > 1e-12) {
        throw Error(ErrorKind::RNotIdentity, "lq_game_recursion: requires R = I");
    }
    LqGameSchedule sched;
    sched.lambda = lambda;
    sched.Phat.assign(p.N + 1, Mat());
    sched.Phat[p.N] = symmetrized(p.Qf);

    const Mat BBt = p.B * p.B.transpose();
    const double inv_l2 = 1.0 / (lambda * lambda);
    for (int t = p.N - 1; t >= 0; --t) {
        const Mat& Pn = sched.Phat[t + 1];
        if (!is_invertible(Pn)) {
            sched.feasible = false;
            sched.failed_at = t + 1;
            return sched;
        }
        const Mat inner = Pn.inverse() + BBt - inv_l2 * p.Sigma;
        if (!is_invertible(inner)) {
            sched.feasible = false;
            sched.failed_at = t;
            return sched;
        }
        sched.Phat[t] = symmetrized(p.A.transpose() * inner.inverse() * p.A + p.Q);
    }
    if (!is_invertible(sched.Phat[0])) {
        sched.feasible = false;
        sched.failed_at = 0;
    }
    return sched;
}

LqrSchedule lqr_recursion(const LqProblem& p) {
    LqrSchedule sched;
    sched.P.assign(p.N + 1, Mat());
    sched.K.assign(p.N, Mat());
    sched.P[p.N] = symmetrized(p.Qf);
    for (int t = p.N - 1; t >= 0; --t) {
        const Mat& Pn = sched.P[t + 1];
        const Mat BtP = p.B.transpose() * Pn;
        sched.K[t] = -spd_solve(p.R + BtP * p.B, BtP * p.A, step_msg("lqr: gain", t).c_str());
        const Mat Gtilde = Pn - BtP.transpose() * spd_solve(p.R + BtP * p.B, BtP, step_msg("lqr", t).c_str());
        sched.P[t] = symmetrized(p.A.transpose() * Gtilde * p.A + p.Q);
    }
    return sched;
}

double acvar_lqr_limit_gap(const LqProblem& p, double L_scale) {
    const AcvarSchedule ac = acvar_recursion(p, L_scale * Mat::Identity(p.n(), p.n()));
    const LqrSchedule lqr = lqr_recursion(p);
    return (ac.P[0] - lqr.P[0]).norm() / lqr.P[0].norm();
}

} // namespace cvarlq
