#include "cvarlq/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace cvarlq {

LqProblem LqProblem::scalar(double A, double B, double Q, double R, double Qf,
                            double Sigma, int N) {
    LqProblem p;
    p.A = Mat::Constant(1, 1, A);
    p.B = Mat::Constant(1, 1, B);
    p.Q = Mat::Constant(1, 1, Q);
    p.R = Mat::Constant(1, 1, R);
    p.Qf = Mat::Constant(1, 1, Qf);
    p.Sigma = Mat::Constant(1, 1, Sigma);
    p.N = N;
    return p;
}

std::string ValidationReport::to_string() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (const auto& issue : issues) {
        os << issue.field << ": " << issue.detail << "\n";
    }
    return os.str();
}

ValidationReport validate(const LqProblem& p) {
    ValidationReport report;
    auto add = [&](ErrorKind kind, const std::string& field, const std::string& detail) {
        report.issues.push_back({kind, field, detail});
    };

    const int n = p.n();
    const int m = p.m();
    auto check_square = [&](const Mat& M, int size, const char* name) {
        if (M.rows() != size || M.cols() != size) {
            std::ostringstream os;
            os << "expected " << size << "x" << size << ", got " << M.rows() << "x" << M.cols();
            add(ErrorKind::DimensionMismatch, name, os.str());
            return false;
        }
        return true;
    };

    if (n == 0 || p.A.cols() != n) {
        add(ErrorKind::DimensionMismatch, "A", "A must be square and nonempty");
    }
    if (p.B.rows() != n) {
        std::ostringstream os;
        os << "A is " << n << "x" << n << " but B has " << p.B.rows() << " rows";
        add(ErrorKind::DimensionMismatch, "A,B", os.str());
    }
    if (m == 0) add(ErrorKind::DimensionMismatch, "B", "B must have at least one column");

    const bool q_ok = check_square(p.Q, n, "Q");
    const bool r_ok = check_square(p.R, m, "R");
    const bool qf_ok = check_square(p.Qf, n, "Qf");
    const bool sig_ok = check_square(p.Sigma, n, "Sigma");

    auto check_pd = [&](const Mat& M, bool shape_ok, const char* name) {
        if (shape_ok && !is_positive_definite(M)) {
            add(ErrorKind::NotPositiveDefinite, name, "matrix is not symmetric positive definite");
        }
    };
    check_pd(p.Q, q_ok, "Q");
    check_pd(p.R, r_ok, "R");
    check_pd(p.Qf, qf_ok, "Qf");
    check_pd(p.Sigma, sig_ok, "Sigma");

    if (p.N < 1) add(ErrorKind::BadHorizon, "N", "horizon must be >= 1");
    return report;
}

double stage_cost(const LqProblem& p, const Vec& x, const Vec& u) {
    if (x.size() != p.n() || u.size() != p.m()) {
        throw Error(ErrorKind::DimensionMismatch, "stage_cost: x or u dimension mismatch");
    }
    return quad_form(p.Q, x) + quad_form(p.R, u);
}

double zero_policy_bound(const LqProblem& p, const Vec& x0) {
    const int n = p.n();
    const int N = p.N;
    if (x0.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "zero_policy_bound: x0 dimension mismatch");
    }

    // Powers of A by repeated multiplication; exactness over speed at desk scale.
    std::vector<Mat> Apow(static_cast<std::size_t>(N) + 1);
    Apow[0] = Mat::Identity(n, n);
    for (int k = 1; k <= N; ++k) Apow[k] = Apow[k - 1] * p.A;

    Mat F(N * n, n);
    for (int i = 1; i <= N; ++i) F.middleRows((i - 1) * n, n) = Apow[i];

    Mat G = Mat::Zero(N * n, N * n);
    for (int i = 1; i <= N; ++i) {
        for (int j = 1; j <= i; ++j) {
            G.block((i - 1) * n, (j - 1) * n, n, n) = Apow[i - j];
        }
    }

    Mat Qbar = Mat::Zero(N * n, N * n);
    for (int i = 0; i < N - 1; ++i) Qbar.block(i * n, i * n, n, n) = p.Q;
    Qbar.block((N - 1) * n, (N - 1) * n, n, n) = p.Qf;

    Mat SigmaBar = Mat::Zero(N * n, N * n);
    for (int i = 0; i < N; ++i) SigmaBar.block(i * n, i * n, n, n) = p.Sigma;

    const Mat Fx = F * x0;
    return quad_form(p.Q, x0) + (Fx.transpose() * Qbar * Fx).value() +
           (G * SigmaBar * G.transpose() * Qbar).trace();
}

DisturbanceSpec DisturbanceSpec::gaussian(const Mat& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
        throw Error(ErrorKind::DimensionMismatch, "gaussian: covariance must be square");
    }
    if (!is_positive_semidefinite(cov, cov.trace() / static_cast<double>(cov.rows()))) {
        throw Error(ErrorKind::NotPositiveDefinite, "gaussian: covariance must be PSD");
    }
    DisturbanceSpec d;
    d.kind_ = Kind::Gaussian;
    d.dim_ = static_cast<int>(cov.rows());
    d.cov_ = symmetrized(cov);
    // LDLt handles the semidefinite case (including cov = 0).
    Eigen::SelfAdjointEigenSolver<Mat> es(d.cov_);
    Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    d.cov_factor_ = es.eigenvectors() * lam.asDiagonal();
    return d;
}

DisturbanceSpec DisturbanceSpec::scaled_rademacher(const Vec& scale) {
    DisturbanceSpec d;
    d.kind_ = Kind::ScaledRademacher;
    d.dim_ = static_cast<int>(scale.size());
    d.scale_ = scale;
    return d;
}

DisturbanceSpec DisturbanceSpec::uniform(const Vec& halfwidth) {
    DisturbanceSpec d;
    d.kind_ = Kind::Uniform;
    d.dim_ = static_cast<int>(halfwidth.size());
    d.halfwidth_ = halfwidth;
    return d;
}

DisturbanceSpec DisturbanceSpec::finite_support(const std::vector<Vec>& points,
                                                const std::vector<double>& probs) {
    if (points.empty() || points.size() != probs.size()) {
        throw Error(ErrorKind::DimensionMismatch, "finite_support: points/probs size mismatch");
    }
    const int n = static_cast<int>(points.front().size());
    double total = 0.0;
    Vec mean = Vec::Zero(n);
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (points[j].size() != n) {
            throw Error(ErrorKind::DimensionMismatch, "finite_support: inconsistent point dims");
        }
        if (probs[j] < 0.0) {
            throw Error(ErrorKind::InvalidArgument, "finite_support: negative probability");
        }
        total += probs[j];
        mean += probs[j] * points[j];
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "finite_support: probabilities must sum to 1");
    }
    if (mean.cwiseAbs().maxCoeff() > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "finite_support: mean must be zero");
    }
    DisturbanceSpec d;
    d.kind_ = Kind::FiniteSupport;
    d.dim_ = n;
    d.points_ = points;
    d.probs_ = probs;
    d.cum_.resize(probs.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        acc += probs[j];
        d.cum_[j] = acc;
    }
    d.cum_.back() = 1.0;
    return d;
}

std::string DisturbanceSpec::name() const {
    switch (kind_) {
        case Kind::Gaussian: return "gaussian";
        case Kind::ScaledRademacher: return "rademacher";
        case Kind::Uniform: return "uniform";
        case Kind::FiniteSupport: return "finite";
    }
    return "?";
}

Mat DisturbanceSpec::covariance() const {
    switch (kind_) {
        case Kind::Gaussian:
            return cov_;
        case Kind::ScaledRademacher:
            return scale_.cwiseProduct(scale_).asDiagonal();
        case Kind::Uniform:
            return (halfwidth_.cwiseProduct(halfwidth_) / 3.0).asDiagonal();
        case Kind::FiniteSupport: {
            Mat c = Mat::Zero(dim_, dim_);
            for (std::size_t j = 0; j < points_.size(); ++j) {
                c += probs_[j] * points_[j] * points_[j].transpose();
            }
            return c;
        }
    }
    return Mat();
}

bool DisturbanceSpec::in_ambiguity_set(const Mat& Sigma) const {
    if (Sigma.rows() != dim_) return false;
    const double scale = Sigma.trace() / static_cast<double>(dim_);
    return is_positive_semidefinite(Sigma - covariance(), scale);
}

Vec DisturbanceSpec::sample(RandomStream& stream) const {
    switch (kind_) {
        case Kind::Gaussian: {
            Vec z(dim_);
            for (int i = 0; i < dim_; ++i) z(i) = stream.next_normal();
            return cov_factor_ * z;
        }
        case Kind::ScaledRademacher: {
            Vec w(dim_);
            for (int i = 0; i < dim_; ++i) {
                w(i) = stream.next_uniform() < 0.5 ? -scale_(i) : scale_(i);
            }
            return w;
        }
        case Kind::Uniform: {
            Vec w(dim_);
            for (int i = 0; i < dim_; ++i) {
                w(i) = (2.0 * stream.next_uniform() - 1.0) * halfwidth_(i);
            }
            return w;
        }
        case Kind::FiniteSupport: {
            const double u = stream.next_uniform();
            for (std::size_t j = 0; j < cum_.size(); ++j) {
                if (u <= cum_[j]) return points_[j];
            }
            return points_.back();
        }
    }
    return Vec::Zero(dim_);
}

} // namespace cvarlq
