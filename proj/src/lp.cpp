#include "cvarlq/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvarlq {

namespace {

constexpr double kPivotRelTol = 1e-11;
constexpr int kMaxPivots = 100000;

// Dense tableau in standard equality form: rows x (cols + 1), last column is
// the rhs. Basis tracks the basic variable of each row.
struct Tableau {
    int rows = 0;
    int cols = 0;  // structural + slack + artificial
    std::vector<double> a;  // (rows + 1) x (cols + 1), last row = objective
    std::vector<int> basis;

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * (cols + 1) + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * (cols + 1) + j]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }

    void pivot(int prow, int pcol) {
        const double inv = 1.0 / at(prow, pcol);
        for (int j = 0; j <= cols; ++j) at(prow, j) *= inv;
        at(prow, pcol) = 1.0;
        for (int i = 0; i <= rows; ++i) {
            if (i == prow) continue;
            const double f = at(i, pcol);
            if (f == 0.0) continue;
            for (int j = 0; j <= cols; ++j) at(i, j) -= f * at(prow, j);
            at(i, pcol) = 0.0;
        }
        basis[prow] = pcol;
    }

    // Bland's rule: entering = lowest-index column with reduced cost below
    // -tol; leaving = lexicographic min ratio (ties broken by lowest basic
    // index). Returns Optimal/Unbounded.
    LpStatus run_simplex(const std::vector<bool>& allowed, int* pivot_budget) {
        for (;;) {
            const double tol = kPivotRelTol * std::max(1.0, max_abs());
            int enter = -1;
            for (int j = 0; j < cols; ++j) {
                if (allowed[j] && at(rows, j) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::Optimal;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows; ++i) {
                const double aij = at(i, enter);
                if (aij > tol) {
                    const double ratio = at(i, cols) / aij;
                    if (ratio < best_ratio - 1e-15 ||
                        (std::abs(ratio - best_ratio) <= 1e-15 &&
                         (leave < 0 || basis[i] < basis[leave]))) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            pivot(leave, enter);
            if (--(*pivot_budget) <= 0) {
                throw Error(ErrorKind::CycleLimitExceeded, "simplex pivot budget exhausted");
            }
        }
    }
};

void check_instance(const LpInstance& ins) {
    const int k = ins.k();
    if (k < 1 || k > 64) {
        throw Error(ErrorKind::TooLarge, "lp: variable count must be in [1, 64]");
    }
    if ((ins.eq_rows.size() > 0 && ins.eq_rows.cols() != k) ||
        (ins.ineq_rows.size() > 0 && ins.ineq_rows.cols() != k) ||
        ins.eq_rows.rows() != ins.eq_rhs.size() ||
        ins.ineq_rows.rows() != ins.ineq_rhs.size()) {
        throw Error(ErrorKind::DimensionMismatch, "lp: constraint shape mismatch");
    }
    if (!ins.c.allFinite() ||
        (ins.eq_rows.size() > 0 && !ins.eq_rows.allFinite()) ||
        (ins.ineq_rows.size() > 0 && !ins.ineq_rows.allFinite()) ||
        (ins.eq_rhs.size() > 0 && !ins.eq_rhs.allFinite()) ||
        (ins.ineq_rhs.size() > 0 && !ins.ineq_rhs.allFinite())) {
        throw Error(ErrorKind::InvalidArgument, "lp: non-finite entries");
    }
}

// Standard equality form: [eq; ineq + slack] p_ext = rhs, rows flipped so
// rhs >= 0.
void build_standard_form(const LpInstance& ins, Mat& A, Vec& b) {
    const int k = ins.k();
    const int ne = static_cast<int>(ins.eq_rows.rows());
    const int ng = static_cast<int>(ins.ineq_rows.rows());
    const int rows = ne + ng;
    A = Mat::Zero(rows, k + ng);
    b = Vec::Zero(rows);
    for (int i = 0; i < ne; ++i) {
        A.row(i).head(k) = ins.eq_rows.row(i);
        b(i) = ins.eq_rhs(i);
    }
    for (int i = 0; i < ng; ++i) {
        A.row(ne + i).head(k) = ins.ineq_rows.row(i);
        A(ne + i, k + i) = 1.0;
        b(ne + i) = ins.ineq_rhs(i);
    }
    for (int i = 0; i < rows; ++i) {
        if (b(i) < 0.0) {
            A.row(i) = -A.row(i);
            b(i) = -b(i);
        }
    }
}

} // namespace

LpSolution solve_max(const LpInstance& ins) {
    check_instance(ins);
    const int k = ins.k();

    Mat A;
    Vec b;
    build_standard_form(ins, A, b);
    const int rows = static_cast<int>(A.rows());
    const int nv = static_cast<int>(A.cols());  // structural + slack

    Tableau t;
    t.rows = rows;
    t.cols = nv + rows;  // + artificials
    t.a.assign(static_cast<std::size_t>(rows + 1) * (t.cols + 1), 0.0);
    t.basis.resize(rows);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < nv; ++j) t.at(i, j) = A(i, j);
        t.at(i, nv + i) = 1.0;
        t.at(i, t.cols) = b(i);
        t.basis[i] = nv + i;
    }

    int budget = kMaxPivots;
    std::vector<bool> allowed(t.cols, true);

    if (rows > 0) {
        // Phase 1: minimize the sum of artificials. Objective row = -sum of
        // constraint rows, expressed in the current (artificial) basis.
        for (int j = 0; j <= t.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < rows; ++i) s += t.at(i, j);
            t.at(rows, j) = -s;
        }
        for (int i = 0; i < rows; ++i) t.at(rows, nv + i) = 0.0;

        t.run_simplex(allowed, &budget);
        const double feas_tol = 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff());
        if (-t.at(rows, t.cols) > feas_tol) {
            return {LpStatus::Infeasible, 0.0, Vec()};
        }
        // Drive any remaining basic artificials out; a row with no eligible
        // pivot is redundant and harmless (its rhs is ~0).
        for (int i = 0; i < rows; ++i) {
            if (t.basis[i] >= nv) {
                const double tol = kPivotRelTol * std::max(1.0, t.max_abs());
                for (int j = 0; j < nv; ++j) {
                    if (std::abs(t.at(i, j)) > tol) {
                        t.pivot(i, j);
                        break;
                    }
                }
            }
        }
        for (int j = nv; j < t.cols; ++j) allowed[j] = false;
    }

    // Phase 2: minimize -cᵀp. Express the objective in the current basis.
    for (int j = 0; j <= t.cols; ++j) t.at(rows, j) = 0.0;
    for (int j = 0; j < k; ++j) t.at(rows, j) = -ins.c(j);
    for (int i = 0; i < rows; ++i) {
        const int bj = t.basis[i];
        if (bj < k) {
            const double coef = t.at(rows, bj);
            if (coef != 0.0) {
                for (int j = 0; j <= t.cols; ++j) t.at(rows, j) -= coef * t.at(i, j);
                t.at(rows, bj) = 0.0;
            }
        }
    }

    const LpStatus status = t.run_simplex(allowed, &budget);
    if (status == LpStatus::Unbounded) return {LpStatus::Unbounded, 0.0, Vec()};

    Vec p = Vec::Zero(k);
    for (int i = 0; i < rows; ++i) {
        if (t.basis[i] < k) p(t.basis[i]) = t.at(i, t.cols);
    }
    return {LpStatus::Optimal, ins.c.dot(p), p};
}

std::vector<Vec> enumerate_vertices(const LpInstance& ins) {
    check_instance(ins);
    if (ins.k() > 10) {
        throw Error(ErrorKind::TooLarge, "enumerate_vertices: k must be <= 10");
    }
    Mat A;
    Vec b;
    build_standard_form(ins, A, b);
    const int rows = static_cast<int>(A.rows());
    const int nv = static_cast<int>(A.cols());

    std::vector<Vec> vertices;
    if (rows == 0) {
        vertices.push_back(Vec::Zero(ins.k()));
        return vertices;
    }
    if (rows > nv) return vertices;

    std::vector<int> idx(rows);
    for (int i = 0; i < rows; ++i) idx[i] = i;

    auto push_unique = [&](const Vec& p) {
        for (const Vec& q : vertices) {
            if ((p - q).cwiseAbs().maxCoeff() <= 1e-9) return;
        }
        vertices.push_back(p);
    };

    // All column subsets of size `rows` as candidate bases.
    for (;;) {
        Mat Bm(rows, rows);
        for (int i = 0; i < rows; ++i) Bm.col(i) = A.col(idx[i]);
        Eigen::FullPivLU<Mat> lu(Bm);
        if (lu.isInvertible()) {
            Vec xb = lu.solve(b);
            if ((xb.array() >= -1e-10).all()) {
                Vec full = Vec::Zero(nv);
                for (int i = 0; i < rows; ++i) full(idx[i]) = xb(i);
                push_unique(full.head(ins.k()));
            }
        }
        int pos = rows - 1;
        while (pos >= 0 && idx[pos] == nv - rows + pos) --pos;
        if (pos < 0) break;
        ++idx[pos];
        for (int i = pos + 1; i < rows; ++i) idx[i] = idx[i - 1] + 1;
    }
    return vertices;
}

LpInstance moment_polytope_lp(const std::vector<Vec>& support, const Mat& Sigma,
                              const Vec& objective) {
    if (support.empty()) {
        throw Error(ErrorKind::InvalidArgument, "moment_polytope_lp: empty support");
    }
    if (support.front().size() != 1 || Sigma.rows() != 1 || Sigma.cols() != 1) {
        throw Error(ErrorKind::Unsupported,
                    "moment_polytope_lp: the moment constraint is linear only for scalar "
                    "disturbances; dimension > 1 requires a semidefinite program");
    }
    std::vector<double> pts(support.size());
    for (std::size_t j = 0; j < support.size(); ++j) pts[j] = support[j](0);
    return moment_polytope_lp(pts, Sigma(0, 0), objective);
}

LpInstance moment_polytope_lp(const std::vector<double>& support, double sigma2,
                              const Vec& objective) {
    const int k = static_cast<int>(support.size());
    if (objective.size() != k) {
        throw Error(ErrorKind::DimensionMismatch, "moment_polytope_lp: objective size mismatch");
    }
    LpInstance ins;
    ins.c = objective;
    ins.eq_rows = Mat::Zero(2, k);
    ins.eq_rhs = Vec::Zero(2);
    ins.ineq_rows = Mat::Zero(1, k);
    ins.ineq_rhs = Vec::Constant(1, sigma2);
    for (int j = 0; j < k; ++j) {
        ins.eq_rows(0, j) = 1.0;
        ins.eq_rows(1, j) = support[j];
        ins.ineq_rows(0, j) = support[j] * support[j];
    }
    ins.eq_rhs(0) = 1.0;
    return ins;
}

} // namespace cvarlq
