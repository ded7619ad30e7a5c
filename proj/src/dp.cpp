#include "cvarlq/dp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cvarlq/parallel.hpp"

namespace cvarlq {

namespace {

void require_scalar(const LqProblem& p, const char* who) {
    if (p.n() != 1 || p.m() != 1) {
        throw Error(ErrorKind::Unsupported,
                    std::string(who) + ": robust/grid DP requires scalar disturbances "
                                       "(n = m = 1); higher dimensions need an SDP inner problem");
    }
}

void require_grids(const Grid2& g) {
    auto strictly_increasing = [](const std::vector<double>& v) {
        if (v.size() < 2) return false;
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (!(v[i] > v[i - 1])) return false;
        }
        return true;
    };
    if (!strictly_increasing(g.x_nodes) || !strictly_increasing(g.s_nodes) ||
        !strictly_increasing(g.u_nodes)) {
        throw Error(ErrorKind::InvalidArgument, "dp: grid nodes must be strictly increasing");
    }
}

// Cell index i with nodes[i] <= v <= nodes[i+1] (after clamping).
inline void locate(const std::vector<double>& nodes, double v, std::size_t& i, double& frac) {
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    if (hi == 0) hi = 1;
    if (hi >= nodes.size()) hi = nodes.size() - 1;
    i = hi - 1;
    frac = (v - nodes[i]) / (nodes[i + 1] - nodes[i]);
}

struct NodeChoice {
    double value = 0.0;
    double u = 0.0;
};

// Outer min over the control candidates with the declared tie-break
// (smallest |u|, then most negative), then one golden-section pass over the
// bracketing cell.
template <typename Objective>
NodeChoice minimize_over_u(const std::vector<double>& u_nodes, bool golden_refine,
                           Objective&& f) {
    NodeChoice best;
    best.value = f(u_nodes[0]);
    best.u = u_nodes[0];
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < u_nodes.size(); ++i) {
        const double v = f(u_nodes[i]);
        const double tie = 1e-12 * (1.0 + std::abs(best.value));
        if (v < best.value - tie) {
            best.value = v;
            best.u = u_nodes[i];
            best_i = i;
        } else if (std::abs(v - best.value) <= tie) {
            const double u = u_nodes[i];
            if (std::abs(u) < std::abs(best.u) - 1e-15 ||
                (std::abs(std::abs(u) - std::abs(best.u)) <= 1e-15 && u < best.u)) {
                best.u = u;
                best_i = i;
                best.value = std::min(best.value, v);
            }
        }
    }
    if (!golden_refine) return best;

    double a = u_nodes[best_i == 0 ? 0 : best_i - 1];
    double b = u_nodes[std::min(best_i + 1, u_nodes.size() - 1)];
    if (!(b > a)) return best;
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 32 && (b - a) > 1e-10 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    const double um = 0.5 * (a + b);
    const double fm = f(um);
    // Keep the node argmin (and its tie-break) unless the polish wins by a
    // margin above floating jitter.
    if (fm < best.value - 1e-12 * (1.0 + std::abs(best.value))) {
        best.value = fm;
        best.u = um;
    }
    return best;
}

void fill_terminal_layer(const LqProblem& p, ValueGrid& vg) {
    const auto& xs = vg.grids.x_nodes;
    const auto& ss = vg.grids.s_nodes;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ss.size(); ++j) {
            vg.V[static_cast<std::size_t>(p.N)](static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(j)) =
                std::max(vg.Qf_scalar * xs[i] * xs[i] - ss[j], 0.0);
        }
    }
}

// Backward sweep shared by the robust and known-distribution algorithms.
// `inner(t, x, s_next, u)` evaluates the layer-(t+1) objective over
// successor states for the stage decision (x, u) with post-cost budget
// s_next; vg must already carry the terminal layer and is filled in place so
// that `inner` can interpolate the previous layer through it.
template <typename Inner>
void run_sweep(const LqProblem& p, bool golden_refine, ValueGrid& vg, Inner&& inner) {
    const auto& grids = vg.grids;
    const std::size_t nx = grids.x_nodes.size();
    const std::size_t ns = grids.s_nodes.size();
    const double Q = p.Q(0, 0);
    const double R = p.R(0, 0);
    for (int t = p.N - 1; t >= 0; --t) {
        parallel_for(nx, [&](std::size_t i) {
            const double x = grids.x_nodes[i];
            for (std::size_t j = 0; j < ns; ++j) {
                const double s = grids.s_nodes[j];
                auto objective = [&](double u) {
                    const double c = Q * x * x + R * u * u;
                    return inner(t, x, s - c, u);
                };
                const NodeChoice choice =
                    minimize_over_u(grids.u_nodes, golden_refine, objective);
                vg.V[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)) = choice.value;
                vg.policy_tables[static_cast<std::size_t>(t)](
                    static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = choice.u;
            }
        });
    }
}

ValueGrid make_empty_grid(const LqProblem& p, const Grid2& grids) {
    ValueGrid vg;
    vg.grids = grids;
    vg.Qf_scalar = p.Qf(0, 0);
    const auto nx = static_cast<Eigen::Index>(grids.x_nodes.size());
    const auto ns = static_cast<Eigen::Index>(grids.s_nodes.size());
    vg.V.assign(static_cast<std::size_t>(p.N) + 1, Mat::Zero(nx, ns));
    vg.policy_tables.assign(static_cast<std::size_t>(p.N), Mat::Zero(nx, ns));
    return vg;
}

} // namespace

double ValueGrid::eval(int t, double x, double s) const {
    const auto& xs = grids.x_nodes;
    const auto& ss = grids.s_nodes;
    // s beyond the grid: constant continuation at the top (the value has
    // saturated at 0 there) and unit-slope continuation below the floor,
    // where the positive part is surely active so the exact s-slope is -1.
    // Keeping that slope preserves the stage-cost trade-off for successors
    // that dive below the floor.
    const double sc = std::min(std::max(s, ss.front()), ss.back());
    const double s_depth = s < ss.front() ? ss.front() - s : 0.0;
    // Quadratic Qf-style extrapolation in x.
    double xc = x;
    double x_growth = 0.0;
    if (x < xs.front() || x > xs.back()) {
        xc = std::min(std::max(x, xs.front()), xs.back());
        x_growth = std::max(Qf_scalar * (x * x - xc * xc), 0.0);
    }
    std::size_t i, j;
    double fx, fs;
    locate(xs, xc, i, fx);
    locate(ss, sc, j, fs);
    const Mat& layer = V[static_cast<std::size_t>(t)];
    const auto ei = static_cast<Eigen::Index>(i);
    const auto ej = static_cast<Eigen::Index>(j);
    const double v = (1.0 - fx) * ((1.0 - fs) * layer(ei, ej) + fs * layer(ei, ej + 1)) +
                     fx * ((1.0 - fs) * layer(ei + 1, ej) + fs * layer(ei + 1, ej + 1));
    return v + s_depth + x_growth;
}

ValueGrid robust_value_iteration(const LqProblem& p, const FiniteDisturbance& dist,
                                 const Grid2& grids, bool golden_refine) {
    require_scalar(p, "robust_value_iteration");
    require_grids(grids);
    if (dist.points.size() < 2) {
        throw Error(ErrorKind::InvalidArgument,
                    "robust_value_iteration: support needs at least 2 points");
    }
    const double wmin = *std::min_element(dist.points.begin(), dist.points.end());
    const double wmax = *std::max_element(dist.points.begin(), dist.points.end());
    if (wmin > 0.0 || wmax < 0.0) {
        throw Error(ErrorKind::InvalidArgument,
                    "robust_value_iteration: zero must lie in the convex hull of the support");
    }

    const double A = p.A(0, 0);
    const double B = p.B(0, 0);
    const std::size_t k = dist.points.size();
    const LpInstance base =
        moment_polytope_lp(dist.points, dist.sigma2, Vec::Zero(static_cast<Eigen::Index>(k)));

    ValueGrid vg = make_empty_grid(p, grids);
    fill_terminal_layer(p, vg);

    auto inner = [&](int t, double x, double s_next, double u) {
        LpInstance ins = base;
        const double y = A * x + B * u;
        for (std::size_t jj = 0; jj < k; ++jj) {
            ins.c(static_cast<Eigen::Index>(jj)) = vg.eval(t + 1, y + dist.points[jj], s_next);
        }
        const LpSolution sol = solve_max(ins);
        if (sol.status == LpStatus::Infeasible) {
            throw Error(ErrorKind::InvalidArgument,
                        "robust_value_iteration: moment polytope is empty for this support");
        }
        if (sol.status == LpStatus::Unbounded) {
            throw Error(ErrorKind::ConditioningFailure,
                        "robust_value_iteration: inner LP unbounded");
        }
        return sol.value;
    };
    run_sweep(p, golden_refine, vg, inner);
    return vg;
}

ValueGrid known_dist_value_iteration(const LqProblem& p, double gauss_std, int quad_order,
                                     const Grid2& grids, bool golden_refine) {
    require_scalar(p, "known_dist_value_iteration");
    require_grids(grids);
    if (quad_order < 8) {
        throw Error(ErrorKind::InvalidArgument,
                    "known_dist_value_iteration: quad_order must be >= 8");
    }
    if (gauss_std * gauss_std > p.Sigma(0, 0) * (1.0 + 1e-12)) {
        throw Error(ErrorKind::InvalidArgument,
                    "known_dist_value_iteration: gauss_std^2 must not exceed Sigma");
    }
    std::vector<double> xi, wq;
    gauss_hermite(quad_order, xi, wq);
    const double inv_sqrt_pi = 0.5641895835477562869;
    const double scale = 1.4142135623730950488 * gauss_std;
    const double A = p.A(0, 0);
    const double B = p.B(0, 0);

    ValueGrid vg = make_empty_grid(p, grids);
    fill_terminal_layer(p, vg);

    auto inner = [&](int t, double x, double s_next, double u) {
        const double y = A * x + B * u;
        double acc = 0.0;
        for (std::size_t q = 0; q < xi.size(); ++q) {
            acc += wq[q] * vg.eval(t + 1, y + scale * xi[q], s_next);
        }
        return acc * inv_sqrt_pi;
    };
    run_sweep(p, golden_refine, vg, inner);
    return vg;
}

Policy extract_policy(const ValueGrid& vg) {
    GridPolicy gp;
    gp.x_nodes = vg.grids.x_nodes;
    gp.s_nodes = vg.grids.s_nodes;
    gp.tables = vg.policy_tables;
    return Policy::grid(std::move(gp));
}

namespace {

double w_tree(const LqProblem& p, const FiniteDisturbance& dist,
              const std::vector<double>& probs, const Policy& policy, int t, double x,
              double s) {
    if (t == p.N) return std::max(p.Qf(0, 0) * x * x - s, 0.0);
    const Vec xv = Vec::Constant(1, x);
    const double u = policy.control(xv, s, t, p)(0);
    const double c = p.Q(0, 0) * x * x + p.R(0, 0) * u * u;
    double acc = 0.0;
    for (std::size_t j = 0; j < dist.points.size(); ++j) {
        if (probs[j] == 0.0) continue;
        acc += probs[j] * w_tree(p, dist, probs, policy, t + 1,
                                 p.A(0, 0) * x + p.B(0, 0) * u + dist.points[j], s - c);
    }
    return acc;
}

void enumerate_paths(const LqProblem& p, const FiniteDisturbance& dist,
                     const std::vector<double>& probs, const Policy& policy, int t, double x,
                     double s, double z, double prob, double s0, double& acc) {
    if (prob == 0.0) return;
    if (t == p.N) {
        acc += prob * std::max(z + p.Qf(0, 0) * x * x - s0, 0.0);
        return;
    }
    const Vec xv = Vec::Constant(1, x);
    const double u = policy.control(xv, s, t, p)(0);
    const double c = p.Q(0, 0) * x * x + p.R(0, 0) * u * u;
    for (std::size_t j = 0; j < dist.points.size(); ++j) {
        enumerate_paths(p, dist, probs, policy, t + 1,
                        p.A(0, 0) * x + p.B(0, 0) * u + dist.points[j], s - c, z + c,
                        prob * probs[j], s0, acc);
    }
}

} // namespace

double w_recursion_oracle(const LqProblem& p, const FiniteDisturbance& dist,
                          const std::vector<double>& probs, const Policy& policy, double x,
                          double s) {
    require_scalar(p, "w_recursion_oracle");
    if (p.N > 4 || dist.points.size() > 4) {
        throw Error(ErrorKind::TreeTooLarge, "w_recursion_oracle: requires N <= 4 and k <= 4");
    }
    if (probs.size() != dist.points.size()) {
        throw Error(ErrorKind::DimensionMismatch, "w_recursion_oracle: probs size mismatch");
    }
    double total = 0.0;
    for (double q : probs) {
        if (q < 0.0) throw Error(ErrorKind::InvalidArgument, "w_recursion_oracle: negative prob");
        total += q;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "w_recursion_oracle: probs must sum to 1");
    }

    double a = 0.0;
    enumerate_paths(p, dist, probs, policy, 0, x, s, 0.0, 1.0, s, a);
    const double b = w_tree(p, dist, probs, policy, 0, x, s);
    if (std::abs(a - b) > 1e-10 * (1.0 + std::abs(a))) {
        throw Error(ErrorKind::ConditioningFailure,
                    "w_recursion_oracle: path enumeration and W-recursion disagree");
    }
    return a;
}

BoundReport verify_upper_bound(const ValueGrid& vg, const AcvarSchedule& schedule) {
    const auto& xs = vg.grids.x_nodes;
    const auto& ss = vg.grids.s_nodes;
    const Mat& V0 = vg.V[0];
    const double P0 = schedule.P[0](0, 0);
    const double a0 = schedule.a[0];

    // Interpolation-error allowance from undivided second differences.
    double d2 = 0.0;
    for (Eigen::Index i = 1; i + 1 < V0.rows(); ++i) {
        for (Eigen::Index j = 0; j < V0.cols(); ++j) {
            d2 = std::max(d2, std::abs(V0(i + 1, j) - 2.0 * V0(i, j) + V0(i - 1, j)));
        }
    }
    for (Eigen::Index i = 0; i < V0.rows(); ++i) {
        for (Eigen::Index j = 1; j + 1 < V0.cols(); ++j) {
            d2 = std::max(d2, std::abs(V0(i, j + 1) - 2.0 * V0(i, j) + V0(i, j - 1)));
        }
    }

    BoundReport report;
    report.eps_grid = 0.25 * d2 + 1e-8;
    report.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ss.size(); ++j) {
            const double vhat = a0 + std::max(P0 * xs[i] * xs[i] - ss[j], 0.0);
            const double viol =
                V0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - vhat;
            if (viol > report.max_violation) {
                report.max_violation = viol;
                report.worst_x = xs[i];
                report.worst_s = ss[j];
            }
        }
    }
    report.pass = report.max_violation <= report.eps_grid;
    return report;
}

GridInvariantReport check_value_grid(const ValueGrid& vg, const LqProblem& p) {
    GridInvariantReport rep;
    const auto& xs = vg.grids.x_nodes;
    const auto& ss = vg.grids.s_nodes;
    const double Qf = p.Qf(0, 0);

    const Mat& VN = vg.V.back();
    for (std::size_t i = 0; i < xs.size() && rep.terminal_exact; ++i) {
        for (std::size_t j = 0; j < ss.size(); ++j) {
            if (VN(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) !=
                std::max(Qf * xs[i] * xs[i] - ss[j], 0.0)) {
                rep.terminal_exact = false;
                break;
            }
        }
    }
    for (const Mat& layer : vg.V) {
        rep.min_value = std::min(rep.min_value, layer.minCoeff());
        for (Eigen::Index i = 0; i < layer.rows(); ++i) {
            for (Eigen::Index j = 0; j + 1 < layer.cols(); ++j) {
                rep.worst_s_increase =
                    std::max(rep.worst_s_increase, layer(i, j + 1) - layer(i, j));
            }
        }
        for (Eigen::Index j = 0; j < layer.cols(); ++j) {
            for (Eigen::Index i = 1; i + 1 < layer.rows(); ++i) {
                rep.worst_convexity_gap =
                    std::max(rep.worst_convexity_gap,
                             -(layer(i + 1, j) - 2.0 * layer(i, j) + layer(i - 1, j)));
            }
        }
    }
    return rep;
}

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        v[static_cast<std::size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return v;
}

Grid2 default_grids(const LqProblem& p, double x0, int nx, int ns, int nu) {
    require_scalar(p, "default_grids");
    const LqrSchedule lqr = lqr_recursion(p);
    double k_max = 0.0;
    for (const Mat& K : lqr.K) k_max = std::max(k_max, std::abs(K(0, 0)));
    const double rho = std::abs(p.A(0, 0) + p.B(0, 0) * lqr.K[0](0, 0));
    const double sigma = std::sqrt(p.Sigma(0, 0));
    const double x_max = (std::abs(x0) + 6.0 * sigma * std::sqrt(static_cast<double>(p.N))) *
                         std::max(1.0, std::pow(rho, p.N));
    const double u_max = std::max(2.0 * k_max * x_max, 1e-6);
    const double c_closed =
        p.Q(0, 0) * x_max * x_max + p.R(0, 0) * (k_max * x_max) * (k_max * x_max);
    const double s_lo = -static_cast<double>(p.N) * std::max(c_closed, 1e-6);
    const double s_hi = 1.5 * x_max * x_max * lqr.P[0](0, 0);

    Grid2 g;
    g.x_nodes = linspace(-x_max, x_max, nx);
    g.s_nodes = linspace(s_lo, s_hi, ns);
    g.u_nodes = linspace(-u_max, u_max, nu);
    return g;
}

void export_csv(const ValueGrid& vg, std::ostream& os) {
    os << "t,x,s,value,u_star\n";
    char buf[160];
    for (std::size_t t = 0; t < vg.policy_tables.size(); ++t) {
        for (std::size_t i = 0; i < vg.grids.x_nodes.size(); ++i) {
            for (std::size_t j = 0; j < vg.grids.s_nodes.size(); ++j) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", t,
                              vg.grids.x_nodes[i], vg.grids.s_nodes[j],
                              vg.V[t](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                              vg.policy_tables[t](static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)));
                os << buf;
            }
        }
    }
}

void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    if (order < 1) throw Error(ErrorKind::InvalidArgument, "gauss_hermite: order must be >= 1");
    Mat J = Mat::Zero(order, order);
    for (int i = 1; i < order; ++i) {
        const double b = std::sqrt(static_cast<double>(i) / 2.0);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    nodes.resize(static_cast<std::size_t>(order));
    weights.resize(static_cast<std::size_t>(order));
    const double sqrt_pi = 1.7724538509055160273;
    for (int i = 0; i < order; ++i) {
        nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        weights[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
    }
}

} // namespace cvarlq
