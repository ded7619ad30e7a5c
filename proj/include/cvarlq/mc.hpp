#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cvarlq/dp.hpp"
#include "cvarlq/policy.hpp"

namespace cvarlq {

/// Deterministic per-(trial, t) stream derivation: master XOR a splitmix64
/// hash of the pair. Two policies given the same schedule see identical
/// disturbance realizations trial for trial, which is what makes the
/// common-random-numbers comparisons sharp.
struct SeedSchedule {
    std::uint64_t master_seed = 0;

    std::uint64_t derive(std::uint64_t trial, int t) const {
        const std::uint64_t h = (trial * 0xD1B54A32D192ED03ULL) ^
                                (static_cast<std::uint64_t>(t) * 0x8CB92BA72F3D8DD7ULL) ^
                                0x9E3779B97F4A7C15ULL;
        return master_seed ^ mix64(h);
    }

    RandomStream stream(std::uint64_t trial, int t) const {
        return RandomStream(derive(trial, t));
    }
};

/// Per-policy cumulative-cost summary. cvar maps each requested level alpha
/// to the top-ceil(alpha K) average; cvar_stderr carries the matching
/// tail-sample standard errors.
struct RolloutStats {
    long trials = 0;
    double mean = 0.0;
    double std = 0.0;
    double standard_error = 0.0;
    bool std_degenerate = false;  // trials == 1: std reported as 0
    std::map<double, double> cvar;
    std::map<double, double> cvar_stderr;
};

/// Top-ceil(alpha K) average of the sample (Rockafellar–Uryasev value when
/// alpha K is an integer). Throws Error(EmptySample) / Error(BadAlpha).
double empirical_cvar(const std::vector<double>& samples, double alpha);

/// Cumulative costs Z = sum of stage costs + terminal cost, one entry per
/// trial, rolled under the given policy and disturbance with per-(trial, t)
/// streams. Deterministic given the schedule, independent of thread count.
/// Throws Error(NonFiniteCost) naming the first bad trial.
std::vector<double> rollout_costs(const LqProblem& problem, const Policy& policy,
                                  const DisturbanceSpec& dist, const Vec& x0, double s0,
                                  long trials, const SeedSchedule& seeds);

RolloutStats stats_from_samples(const std::vector<double>& z,
                                const std::vector<double>& alphas);

RolloutStats simulate(const LqProblem& problem, const Policy& policy,
                      const DisturbanceSpec& dist, const Vec& x0, double s0, long trials,
                      const SeedSchedule& seeds, const std::vector<double>& alphas);

struct BoundCheck {
    std::string dist_name;
    double mean_excess = 0.0;    // empirical mean of max(Z - s0, 0)
    double stderr_excess = 0.0;
    double a0 = 0.0;
    double margin = 0.0;         // a0 + 4 stderr - mean_excess
    bool pass = false;
};

/// Rolls the risk-averse policy from s0 = x0ᵀP_0x0 under each member of the
/// ambiguity set and checks mean max(Z − s0, 0) <= a_0 + 4 stderr.
std::vector<BoundCheck> validate_bound(const LqProblem& problem,
                                       const AcvarSchedule& schedule,
                                       const std::vector<DisturbanceSpec>& dists,
                                       const Vec& x0, long trials,
                                       const SeedSchedule& seeds);

struct SweepRow {
    std::string family;   // "acvar" | "leqr" | "lqr" | "cvar"
    double parameter = 0.0;
    double s0 = 0.0;
    RolloutStats stats;
};

struct SweepOptions {
    int dp_nx = 181;
    int dp_ns = 481;
    int dp_nu = 121;
    int quad_order = 20;
    Grid2 dp_grids;  // used instead of default_grids() when non-empty
};

/// The trade-off study: one row per (family, parameter), every row sharing
/// the seed schedule (common random numbers) and the zero-mean Gaussian
/// disturbance with covariance Sigma. Exact-CVaR rows come from one
/// known-distribution value iteration; alpha only selects the initial
/// budget s0* = argmin_s s + V_0(x0, s)/alpha.
std::vector<SweepRow> tradeoff_sweep(const LqProblem& problem, const Vec& x0,
                                     const std::vector<double>& alphas,
                                     const std::vector<double>& acvar_Ls,
                                     const std::vector<double>& leqr_gammas,
                                     const std::vector<double>& exact_alphas, long trials,
                                     const SeedSchedule& seeds,
                                     const SweepOptions& options = {});

} // namespace cvarlq
