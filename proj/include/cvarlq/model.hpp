#pragma once

#include <string>
#include <vector>

#include "cvarlq/linalg.hpp"
#include "cvarlq/rng.hpp"

namespace cvarlq {

/// Finite-horizon linear-quadratic problem instance. Plain data; run
/// validate() before feeding it to the solvers. All types in this module
/// are immutable after construction and safe to share across threads.
struct LqProblem {
    Mat A;      ///< n x n state transition
    Mat B;      ///< n x m input map
    Mat Q;      ///< n x n state stage cost, Q > 0
    Mat R;      ///< m x m control stage cost, R > 0
    Mat Qf;     ///< n x n terminal cost, Qf > 0
    Mat Sigma;  ///< n x n maximal disturbance covariance, Sigma > 0
    int N = 0;  ///< horizon length

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    static LqProblem scalar(double A, double B, double Q, double R, double Qf,
                            double Sigma, int N);
};

/// Physical state plus the running cost budget S_t.
struct AugmentedState {
    Vec x;
    double s = 0.0;
};

struct ValidationIssue {
    ErrorKind kind;
    std::string field;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string to_string() const;
};

/// Checks every LqProblem invariant and reports all violations at once.
ValidationReport validate(const LqProblem& problem);

/// xᵀQx + uᵀRu. Throws Error(DimensionMismatch) on shape errors.
double stage_cost(const LqProblem& problem, const Vec& x, const Vec& u);

/// Expected cumulative cost of the all-zero control policy when every
/// disturbance covariance equals Sigma; an upper bound over the whole
/// ambiguity set. Built from the stacked-dynamics matrices
/// F = [A; A²; …; A^N] and the block lower-triangular G with (i,j) block
/// A^(i-j).
double zero_policy_bound(const LqProblem& problem, const Vec& x0);

/// Zero-mean disturbance family inside the moment ambiguity set
/// {zero mean, covariance ⪯ Sigma}. Zero mean is enforced by construction;
/// covariance membership is checked against a problem's Sigma via
/// in_ambiguity_set(). Sampling consumes a fixed number of uniforms per
/// draw so that streams stay aligned across policies.
class DisturbanceSpec {
public:
    enum class Kind { Gaussian, ScaledRademacher, Uniform, FiniteSupport };

    static DisturbanceSpec gaussian(const Mat& cov);
    static DisturbanceSpec scaled_rademacher(const Vec& scale);
    static DisturbanceSpec uniform(const Vec& halfwidth);
    static DisturbanceSpec finite_support(const std::vector<Vec>& points,
                                          const std::vector<double>& probs);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::string name() const;

    Mat covariance() const;
    bool in_ambiguity_set(const Mat& Sigma) const;

    Vec sample(RandomStream& stream) const;

    const std::vector<Vec>& points() const { return points_; }
    const std::vector<double>& probs() const { return probs_; }

private:
    DisturbanceSpec() = default;

    Kind kind_ = Kind::Gaussian;
    int dim_ = 0;
    Mat cov_;          // Gaussian
    Mat cov_factor_;   // Gaussian: L with L Lᵀ = cov
    Vec scale_;        // ScaledRademacher
    Vec halfwidth_;    // Uniform
    std::vector<Vec> points_;     // FiniteSupport
    std::vector<double> probs_;   // FiniteSupport
    std::vector<double> cum_;     // FiniteSupport CDF
};

} // namespace cvarlq
