#include "cvarlq/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvarlq/parallel.hpp"

namespace cvarlq {

namespace {

// Neumaier-compensated sum in the given order.
double compensated_sum(const std::vector<double>& v) {
    double s = 0.0;
    double comp = 0.0;
    for (double x : v) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            comp += (s - t) + x;
        } else {
            comp += (x - t) + s;
        }
        s = t;
    }
    return s + comp;
}

double tail_mean(const std::vector<double>& sorted_desc, std::size_t k) {
    std::vector<double> head(sorted_desc.begin(),
                             sorted_desc.begin() + static_cast<std::ptrdiff_t>(k));
    return compensated_sum(head) / static_cast<double>(k);
}

std::size_t tail_count(std::size_t n, double alpha) {
    const double raw = alpha * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::min(std::max<std::size_t>(k, 1), n);
}

} // namespace

double empirical_cvar(const std::vector<double>& samples, double alpha) {
    if (samples.empty()) {
        throw Error(ErrorKind::EmptySample, "empirical_cvar: empty sample");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorKind::BadAlpha, "empirical_cvar: alpha must be in (0, 1]");
    }
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    return tail_mean(sorted, tail_count(sorted.size(), alpha));
}

std::vector<double> rollout_costs(const LqProblem& p, const Policy& policy,
                                  const DisturbanceSpec& dist, const Vec& x0, double s0,
                                  long trials, const SeedSchedule& seeds) {
    if (trials < 1) throw Error(ErrorKind::InvalidArgument, "rollout_costs: trials must be >= 1");
    if (x0.size() != p.n() || dist.dim() != p.n()) {
        throw Error(ErrorKind::DimensionMismatch, "rollout_costs: x0/disturbance dimension");
    }
    std::vector<double> z(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
        Vec x = x0;
        double s = s0;
        double acc = 0.0;
        for (int t = 0; t < p.N; ++t) {
            RandomStream stream = seeds.stream(trial, t);
            const Vec w = dist.sample(stream);
            const StepResult step = rollout_step(policy, x, s, t, w, p);
            acc += step.cost;
            x = step.x_next;
            s = step.s_next;
        }
        acc += quad_form(p.Qf, x);
        if (!std::isfinite(acc)) {
            throw Error(ErrorKind::NonFiniteCost,
                        "rollout_costs: non-finite cumulative cost at trial " +
                            std::to_string(trial) + " (unstable closed loop?)");
        }
        z[trial] = acc;
    });
    return z;
}

RolloutStats stats_from_samples(const std::vector<double>& z,
                                const std::vector<double>& alphas) {
    if (z.empty()) throw Error(ErrorKind::EmptySample, "stats_from_samples: empty sample");
    RolloutStats st;
    st.trials = static_cast<long>(z.size());
    st.mean = compensated_sum(z) / static_cast<double>(z.size());
    if (z.size() == 1) {
        st.std = 0.0;
        st.std_degenerate = true;
    } else {
        std::vector<double> sq(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = z[i] - st.mean;
            sq[i] = d * d;
        }
        st.std = std::sqrt(compensated_sum(sq) / static_cast<double>(z.size() - 1));
    }
    st.standard_error = st.std / std::sqrt(static_cast<double>(z.size()));

    std::vector<double> sorted = z;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    for (double alpha : alphas) {
        if (!(alpha > 0.0 && alpha <= 1.0)) {
            throw Error(ErrorKind::BadAlpha, "stats_from_samples: alpha must be in (0, 1]");
        }
        const std::size_t k = tail_count(sorted.size(), alpha);
        const double cv = tail_mean(sorted, k);
        st.cvar[alpha] = cv;
        if (k > 1) {
            std::vector<double> sq(k);
            for (std::size_t i = 0; i < k; ++i) {
                const double d = sorted[i] - cv;
                sq[i] = d * d;
            }
            const double tail_std =
                std::sqrt(compensated_sum(sq) / static_cast<double>(k - 1));
            st.cvar_stderr[alpha] = tail_std / std::sqrt(static_cast<double>(k));
        } else {
            st.cvar_stderr[alpha] = 0.0;
        }
    }
    return st;
}

RolloutStats simulate(const LqProblem& p, const Policy& policy, const DisturbanceSpec& dist,
                      const Vec& x0, double s0, long trials, const SeedSchedule& seeds,
                      const std::vector<double>& alphas) {
    return stats_from_samples(rollout_costs(p, policy, dist, x0, s0, trials, seeds), alphas);
}

std::vector<BoundCheck> validate_bound(const LqProblem& p, const AcvarSchedule& schedule,
                                       const std::vector<DisturbanceSpec>& dists, const Vec& x0,
                                       long trials, const SeedSchedule& seeds) {
    const double s0 = initial_budget(x0, schedule);
    const Policy policy = Policy::acvar(schedule, /*certify=*/false);
    std::vector<BoundCheck> checks;
    checks.reserve(dists.size());
    for (const DisturbanceSpec& dist : dists) {
        if (!dist.in_ambiguity_set(p.Sigma)) {
            throw Error(ErrorKind::InvalidArgument,
                        "validate_bound: disturbance is outside the ambiguity set");
        }
        const std::vector<double> z = rollout_costs(p, policy, dist, x0, s0, trials, seeds);
        std::vector<double> excess(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) excess[i] = std::max(z[i] - s0, 0.0);
        const RolloutStats st = stats_from_samples(excess, {});
        BoundCheck check;
        check.dist_name = dist.name();
        check.mean_excess = st.mean;
        check.stderr_excess = st.standard_error;
        check.a0 = schedule.a[0];
        check.margin = schedule.a[0] + 4.0 * st.standard_error - st.mean;
        check.pass = check.margin >= 0.0;
        checks.push_back(check);
    }
    return checks;
}

std::vector<SweepRow> tradeoff_sweep(const LqProblem& p, const Vec& x0,
                                     const std::vector<double>& alphas,
                                     const std::vector<double>& acvar_Ls,
                                     const std::vector<double>& leqr_gammas,
                                     const std::vector<double>& exact_alphas, long trials,
                                     const SeedSchedule& seeds, const SweepOptions& options) {
    const DisturbanceSpec dist = DisturbanceSpec::gaussian(p.Sigma);
    std::vector<SweepRow> rows;

    auto run = [&](const std::string& family, double parameter, const Policy& policy,
                   double s0) {
        SweepRow row;
        row.family = family;
        row.parameter = parameter;
        row.s0 = s0;
        row.stats = simulate(p, policy, dist, x0, s0, trials, seeds, alphas);
        rows.push_back(std::move(row));
    };

    for (double L : acvar_Ls) {
        const AcvarSchedule sched = acvar_recursion(p, L * Mat::Identity(p.n(), p.n()));
        run("acvar", L, Policy::acvar(sched), initial_budget(x0, sched));
    }
    for (double gamma : leqr_gammas) {
        const LeqrSchedule sched = leqr_recursion(p, gamma);
        if (!sched.feasible) {
            throw Error(ErrorKind::InvalidArgument,
                        "tradeoff_sweep: LEQR infeasible at gamma=" + std::to_string(gamma) +
                            " (step t=" + std::to_string(sched.failed_at) + ")");
        }
        run("leqr", gamma, Policy::linear_feedback(sched.K), 0.0);
    }
    {
        const LqrSchedule sched = lqr_recursion(p);
        run("lqr", 0.0, Policy::linear_feedback(sched.K), 0.0);
    }
    if (!exact_alphas.empty()) {
        const Grid2 grids = options.dp_grids.x_nodes.empty()
                                ? default_grids(p, x0(0), options.dp_nx, options.dp_ns,
                                                options.dp_nu)
                                : options.dp_grids;
        const double gauss_std = std::sqrt(p.Sigma(0, 0));
        const ValueGrid vg =
            known_dist_value_iteration(p, gauss_std, options.quad_order, grids);
        const Policy policy = extract_policy(vg);
        for (double alpha : exact_alphas) {
            if (!(alpha > 0.0 && alpha <= 1.0)) {
                throw Error(ErrorKind::BadAlpha, "tradeoff_sweep: exact alpha out of (0, 1]");
            }
            // s + V_0(x0, s)/alpha is piecewise linear in s on the grid, so
            // the grid minimum is exact for the tabulated value function.
            double best_s = grids.s_nodes.front();
            double best_obj = std::numeric_limits<double>::infinity();
            for (double s : grids.s_nodes) {
                const double obj = s + vg.eval(0, x0(0), s) / alpha;
                if (obj < best_obj) {
                    best_obj = obj;
                    best_s = s;
                }
            }
            run("cvar", alpha, policy, best_s);
        }
    }
    return rows;
}

} // namespace cvarlq
