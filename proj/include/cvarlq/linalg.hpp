#pragma once

#include <Eigen/Dense>

#include "cvarlq/errors.hpp"

namespace cvarlq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// (M + Mᵀ)/2.
inline Mat symmetrized(const Mat& M) { return 0.5 * (M + M.transpose()); }

/// Positive-definiteness test: Cholesky on the symmetrized matrix, failing
/// if any pivot drops below 1e-12 * max(1, trace/n).
bool is_positive_definite(const Mat& M);

/// Semidefinite variant used for ambiguity-set membership: smallest
/// eigenvalue of the symmetrized matrix >= -1e-12 * max(1, scale).
bool is_positive_semidefinite(const Mat& M, double scale);

/// Solve M X = B for symmetric positive definite M via Cholesky.
/// Throws Error(ConditioningFailure) when the factorization fails.
Mat spd_solve(const Mat& M, const Mat& B, const char* context);

/// Inverse of a symmetric positive definite matrix, symmetrized on return.
Mat spd_inverse(const Mat& M, const char* context);

/// xᵀ M x.
inline double quad_form(const Mat& M, const Vec& x) { return x.dot(M * x); }

/// Smallest singular value > 1e-12 * largest.
bool is_invertible(const Mat& M);

double smallest_eigenvalue(const Mat& M_symmetric);

double spectral_radius(const Mat& M);

} // namespace cvarlq
