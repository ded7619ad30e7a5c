#include "cvarlq/policy.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace cvarlq {

namespace {

// Index of the grid node nearest to v; nodes are sorted ascending.
std::size_t nearest_node(const std::vector<double>& nodes, double v) {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.begin()) return 0;
    if (it == nodes.end()) return nodes.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    return (v - nodes[hi - 1] <= nodes[hi] - v) ? hi - 1 : hi;
}

} // namespace

Mat g_tilde(const Mat& P_next, const LqProblem& p) {
    const Mat BtP = p.B.transpose() * P_next;
    return symmetrized(P_next - BtP.transpose() * spd_solve(p.R + BtP * p.B, BtP, "g_tilde"));
}

double h_hat(const Vec& x, double s, const Mat& M11, const Mat& P_next,
             const LqProblem& p) {
    if (x.size() != p.n() || M11.rows() != p.n() || M11.cols() != p.n()) {
        throw Error(ErrorKind::DimensionMismatch, "h_hat: dimension mismatch");
    }
    const Mat Gt = g_tilde(P_next, p);
    const Mat inner = spd_inverse(Gt, "h_hat: g_tilde") - spd_inverse(M11, "h_hat: M11");
    if (!is_positive_definite(inner)) {
        throw Error(ErrorKind::InnerMatrixNotPD, "h_hat: G̃⁻¹ − M11⁻¹ is not positive definite");
    }
    return x.dot((p.A.transpose() * spd_solve(inner, p.A, "h_hat: inner") + p.Q) * x) - s;
}

Mat assemble_lmi(const Vec& x, double s, const Vec& u, const Mat& M11, double M22,
                 const Mat& P_next, const LqProblem& p) {
    const int n = p.n();
    const int m = p.m();
    if (x.size() != n || u.size() != m || M11.rows() != n || M11.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "assemble_lmi: dimension mismatch");
    }
    const int dim = 3 * n + m + 1;

    // H = [[P, P[A B]], [[A B]ᵀP, [A B]ᵀP[A B] + diag(Q,R)]]; PD because its
    // Schur complement w.r.t. the top-left block is diag(Q,R).
    Mat AB(n, n + m);
    AB << p.A, p.B;
    Mat H(2 * n + m, 2 * n + m);
    H.topLeftCorner(n, n) = P_next;
    H.topRightCorner(n, n + m) = P_next * AB;
    H.bottomLeftCorner(n + m, n) = H.topRightCorner(n, n + m).transpose();
    Mat QR = Mat::Zero(n + m, n + m);
    QR.topLeftCorner(n, n) = p.Q;
    QR.bottomRightCorner(m, m) = p.R;
    H.bottomRightCorner(n + m, n + m) = AB.transpose() * P_next * AB + QR;

    Mat Kx = Mat::Zero(2 * n + m, n + 1);
    Kx.topLeftCorner(n, n) = Mat::Identity(n, n);
    Kx.block(n, n, n, 1) = x;

    Mat out = Mat::Zero(dim, dim);
    out.topLeftCorner(n, n) = M11;
    out(n, n) = M22 + s;  // M22 − (−s): G_s carries −s in its corner
    out.block(0, n + 1, n + 1, 2 * n + m) = Kx.transpose();
    out.block(n + 1, 0, 2 * n + m, n + 1) = Kx;
    out.bottomRightCorner(2 * n + m, 2 * n + m) = spd_inverse(H, "assemble_lmi: H");

    // Q̄ᵀuP̄ touches exactly the control rows paired with column n.
    for (int i = 0; i < m; ++i) {
        out(3 * n + 1 + i, n) += u(i);
        out(n, 3 * n + 1 + i) += u(i);
    }
    return symmetrized(out);
}

std::pair<Vec, LmiCertificate> synthesize_acvar_control(
    const Vec& x, double s, int t, const AcvarSchedule& schedule,
    const LqProblem& p, double slack_rel) {
    if (t < 0 || t >= schedule.N) {
        throw Error(ErrorKind::InvalidArgument, "synthesize_acvar_control: t out of range");
    }
    const Mat& P_next = schedule.P[t + 1];
    const Mat M11 = P_next + schedule.L;
    const double hh = h_hat(x, s, M11, P_next, p);
    const double delta = slack_rel * std::max(1.0, std::abs(hh));
    const double M22 = std::max(hh, 0.0) + delta;
    const Vec u = schedule.K[t] * x;

    const Mat phi = assemble_lmi(x, s, Vec::Zero(p.m()), M11, M22, P_next, p);
    Mat full = phi;
    for (int i = 0; i < p.m(); ++i) {
        full(3 * p.n() + 1 + i, p.n()) += u(i);
        full(p.n(), 3 * p.n() + 1 + i) += u(i);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(full, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues()(0);
    const double eps_lmi = 1e-9 * (1.0 + phi.norm());

    LmiCertificate cert;
    cert.t = t;
    cert.M11 = M11;
    cert.M22 = M22;
    cert.u = u;
    cert.min_eig = min_eig;
    cert.passed = min_eig >= -eps_lmi;
    return {u, cert};
}

Vec Policy::control(const Vec& x, double s, int t, const LqProblem& p) const {
    if (std::holds_alternative<ZeroPolicy>(impl)) {
        return Vec::Zero(p.m());
    }
    if (const auto* lf = std::get_if<LinearFeedback>(&impl)) {
        return lf->K.at(static_cast<std::size_t>(t)) * x;
    }
    if (const auto* ac = std::get_if<AcvarCertified>(&impl)) {
        if (ac->certify) {
            auto [u, cert] = synthesize_acvar_control(x, s, t, ac->schedule, p, ac->lmi_slack);
            if (!cert.passed) {
                throw Error(ErrorKind::CertificateFailed,
                            "LMI certificate failed at t=" + std::to_string(t) +
                                " (min_eig=" + std::to_string(cert.min_eig) + ")");
            }
            return u;
        }
        return ac->schedule.K.at(static_cast<std::size_t>(t)) * x;
    }
    const auto& gp = std::get<GridPolicy>(impl);
    const Mat& table = gp.tables.at(static_cast<std::size_t>(t));
    const std::size_t ix = nearest_node(gp.x_nodes, x(0));
    const std::size_t is = nearest_node(gp.s_nodes, s);
    return Vec::Constant(1, table(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(is)));
}

StepResult rollout_step(const Policy& policy, const Vec& x, double s, int t,
                        const Vec& w, const LqProblem& p) {
    if (w.size() != p.n()) {
        throw Error(ErrorKind::DimensionMismatch, "rollout_step: w dimension mismatch");
    }
    StepResult r;
    r.u = policy.control(x, s, t, p);
    r.cost = stage_cost(p, x, r.u);
    r.x_next = p.A * x + p.B * r.u + w;
    r.s_next = s - r.cost;
    return r;
}

double initial_budget(const Vec& x0, const AcvarSchedule& schedule) {
    return quad_form(schedule.P[0], x0);
}

double upper_bound_J(const Vec& x0, double alpha, const AcvarSchedule& schedule) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorKind::BadAlpha, "upper_bound_J: alpha must be in (0, 1]");
    }
    return quad_form(schedule.P[0], x0) + schedule.a[0] / alpha;
}

} // namespace cvarlq
