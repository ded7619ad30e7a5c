#include "cvarlq/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace cvarlq {

bool is_positive_definite(const Mat& M) {
    if (M.rows() != M.cols() || M.rows() == 0) return false;
    const Mat S = symmetrized(M);
    const Eigen::Index n = S.rows();
    const double tol = 1e-12 * std::max(1.0, S.trace() / static_cast<double>(n));

    // Unpivoted Cholesky so the pivot threshold is applied exactly as stated.
    Mat L = Mat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = S(j, j) - L.row(j).head(j).squaredNorm();
        if (!(pivot >= tol)) return false;
        L(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            L(i, j) = (S(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
        }
    }
    return true;
}

bool is_positive_semidefinite(const Mat& M, double scale) {
    if (M.rows() != M.cols() || M.rows() == 0) return false;
    const double tol = 1e-12 * std::max(1.0, scale);
    return smallest_eigenvalue(symmetrized(M)) >= -tol;
}

Mat spd_solve(const Mat& M, const Mat& B, const char* context) {
    Eigen::LLT<Mat> llt(symmetrized(M));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::ConditioningFailure,
                    std::string("Cholesky factorization failed: ") + context);
    }
    return llt.solve(B);
}

Mat spd_inverse(const Mat& M, const char* context) {
    return symmetrized(spd_solve(M, Mat::Identity(M.rows(), M.cols()), context));
}

bool is_invertible(const Mat& M) {
    if (M.rows() != M.cols() || M.rows() == 0) return false;
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    return sv(sv.size() - 1) > 1e-12 * sv(0);
}

double smallest_eigenvalue(const Mat& M_symmetric) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M_symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double spectral_radius(const Mat& M) {
    return M.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace cvarlq
