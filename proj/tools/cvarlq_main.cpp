// Command-line front end: recursion inspection, the trade-off sweep, and the
// grid-level bound verification, all driven by a single JSON config.
//
// Exit codes: 0 ok, 1 config error, 2 infeasible recursion,
//             3 bound-verification failure, 4 unsupported dimension.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cvarlq/io.hpp"

namespace {

using namespace cvarlq;

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitBoundFailure = 3;
constexpr int kExitUnsupported = 4;

struct ExperimentConfig {
    LqProblem problem;
    Vec x0;
    long trials = 50000;
    std::uint64_t master_seed = 0;
    std::vector<double> alphas{0.05, 1.0};
    std::vector<double> acvar_Ls;
    std::vector<double> leqr_gammas;  // auto-filled when empty
    std::vector<double> exact_alphas;
    std::string output_dir = "out";
};

std::vector<double> json_doubles(const Json& j, const char* field) {
    if (!j.is_array()) {
        throw Error(ErrorKind::ParseError, std::string(field) + ": expected an array of numbers");
    }
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number()) {
            throw Error(ErrorKind::ParseError, std::string(field) + ": non-numeric entry");
        }
        v.push_back(e.get<double>());
    }
    return v;
}

ExperimentConfig load_config(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
    }
    if (!j.contains("problem")) {
        throw Error(ErrorKind::ParseError, "config: missing field 'problem'");
    }
    ExperimentConfig cfg;
    cfg.problem = problem_from_json(j["problem"]);
    if (j.contains("x0")) {
        const auto v = json_doubles(j["x0"], "x0");
        cfg.x0 = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
        cfg.x0 = Vec::Zero(cfg.problem.n());
    }
    if (j.contains("trials")) cfg.trials = j["trials"].get<long>();
    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("alphas")) cfg.alphas = json_doubles(j["alphas"], "alphas");
    if (j.contains("acvar_Ls")) cfg.acvar_Ls = json_doubles(j["acvar_Ls"], "acvar_Ls");
    if (j.contains("leqr_gammas")) cfg.leqr_gammas = json_doubles(j["leqr_gammas"], "leqr_gammas");
    if (j.contains("exact_alphas")) cfg.exact_alphas = json_doubles(j["exact_alphas"], "exact_alphas");
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (cfg.trials < 1) throw Error(ErrorKind::ParseError, "config: trials must be >= 1");
    return cfg;
}

int require_valid(const LqProblem& problem) {
    const ValidationReport report = validate(problem);
    if (!report.ok()) {
        std::cerr << "invalid problem:\n" << report.to_string();
        return kExitConfig;
    }
    return kExitOk;
}

std::string matrix_str(const Mat& M) {
    if (M.size() == 0) return "-";
    if (M.size() == 1) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", M(0, 0));
        return buf;
    }
    return matrix_to_json(M).dump();
}

std::vector<double> logspace(double lo, double hi, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) {
        const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        v.push_back(lo * std::pow(hi / lo, f));
    }
    return v;
}

int cmd_riccati(const ExperimentConfig& cfg, const std::string& family, double L,
                double gamma, double lambda, const std::string& out_path) {
    const LqProblem& p = cfg.problem;
    Json out;
    std::printf("family=%s  n=%d m=%d N=%d\n", family.c_str(), p.n(), p.m(), p.N);

    if (family == "acvar") {
        const AcvarSchedule s = acvar_recursion(p, L * Mat::Identity(p.n(), p.n()));
        std::printf("%-4s %-24s %s\n", "t", "P_t", "a_t");
        for (int t = 0; t <= p.N; ++t) {
            std::printf("%-4d %-24s %.12g\n", t, matrix_str(s.P[t]).c_str(), s.a[t]);
        }
        out = schedule_to_json(s);
    } else if (family == "leqr") {
        const LeqrSchedule s = leqr_recursion(p, gamma);
        out = schedule_to_json(s);
        if (!s.feasible) {
            std::fprintf(stderr,
                         "leqr recursion infeasible at step t=%d for gamma=%.12g "
                         "(Sigma^-1 - gamma*Pbar lost definiteness)\n",
                         s.failed_at, gamma);
            if (!out_path.empty()) atomic_write(out_path, out.dump(2) + "\n");
            return kExitInfeasible;
        }
        std::printf("%-4s %s\n", "t", "Pbar_t");
        for (int t = 0; t <= p.N; ++t) {
            std::printf("%-4d %s\n", t, matrix_str(s.Pbar[t]).c_str());
        }
    } else if (family == "lqgame") {
        const LqGameSchedule s = lq_game_recursion(p, lambda);
        out = schedule_to_json(s);
        if (!s.feasible) {
            std::fprintf(stderr, "lq-game recursion lost invertibility at step t=%d\n",
                         s.failed_at);
            if (!out_path.empty()) atomic_write(out_path, out.dump(2) + "\n");
            return kExitInfeasible;
        }
        std::printf("%-4s %s\n", "t", "Phat_t");
        for (int t = 0; t <= p.N; ++t) {
            std::printf("%-4d %s\n", t, matrix_str(s.Phat[t]).c_str());
        }
    } else {  // lqr
        const LqrSchedule s = lqr_recursion(p);
        out = schedule_to_json(s);
        std::printf("%-4s %s\n", "t", "P_t");
        for (int t = 0; t <= p.N; ++t) {
            std::printf("%-4d %s\n", t, matrix_str(s.P[t]).c_str());
        }
    }
    if (!out_path.empty()) atomic_write(out_path, out.dump(2) + "\n");
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    const LqProblem& p = cfg.problem;
    if (cfg.acvar_Ls.empty()) {
        std::cerr << "config: acvar_Ls must be nonempty for sweep\n";
        return kExitConfig;
    }

    const double gamma_c = critical_gamma(p, 1e-12);
    std::vector<double> gammas = cfg.leqr_gammas;
    if (gammas.empty()) {
        gammas = logspace(gamma_c / 10.0, gamma_c, 8);
        // The bisection midpoint can sit marginally past the feasible side.
        while (!gammas.empty() && !leqr_recursion(p, gammas.back()).feasible) {
            gammas.back() *= 1.0 - 1e-9;
        }
    }

    SeedSchedule seeds{cfg.master_seed};
    const std::vector<SweepRow> rows = tradeoff_sweep(
        p, cfg.x0, cfg.alphas, cfg.acvar_Ls, gammas, cfg.exact_alphas, cfg.trials, seeds);

    std::filesystem::create_directories(cfg.output_dir);
    const auto records = sweep_to_records(rows, cfg.master_seed);
    atomic_write(std::filesystem::path(cfg.output_dir) / "tradeoff.csv",
                 records_to_csv(records));

    Json meta{{"seed", cfg.master_seed},
              {"gamma_c", gamma_c},
              {"params",
               {{"trials", cfg.trials},
                {"acvar_Ls", cfg.acvar_Ls},
                {"leqr_gammas", gammas},
                {"exact_alphas", cfg.exact_alphas},
                {"alphas", cfg.alphas}}},
              {"version", kVersion},
              {"timestamp",
               std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count()}};
    atomic_write(std::filesystem::path(cfg.output_dir) / "meta.json", meta.dump(2) + "\n");

    std::printf("wrote %s/tradeoff.csv (%zu rows), gamma_c=%.9g\n", cfg.output_dir.c_str(),
                records.size(), gamma_c);
    return kExitOk;
}

struct VerifyFlags {
    double L = 1.0;
    std::vector<double> support{-2.0, -1.0, 0.0, 1.0, 2.0};
    double sigma2 = -1.0;  // default: Sigma from the problem
    double x_max = 6.0;
    double s_min = -5.0;
    double s_max = 40.0;
    int nx = 121;
    int ns = 121;
    int nu = 101;
    bool corrupt_a0 = false;
};

int cmd_verify(const ExperimentConfig& cfg, const VerifyFlags& flags,
               const std::string& out_path) {
    const LqProblem& p = cfg.problem;
    if (p.n() != 1 || p.m() != 1) {
        std::cerr << "verify: robust DP requires scalar disturbances (n = m = 1); the inner "
                     "sup for n > 1 is a semidefinite program\n";
        return kExitUnsupported;
    }

    AcvarSchedule schedule = acvar_recursion(p, flags.L * Mat::Identity(1, 1));
    if (flags.corrupt_a0) schedule.a[0] = -1.0;  // test hook: negative control

    const LqrSchedule lqr = lqr_recursion(p);
    double k_max = 0.0;
    for (const Mat& K : lqr.K) k_max = std::max(k_max, std::abs(K(0, 0)));
    const double u_max = std::max(2.0 * k_max * flags.x_max, 1e-6);

    Grid2 grids;
    grids.x_nodes = linspace(-flags.x_max, flags.x_max, flags.nx);
    grids.s_nodes = linspace(flags.s_min, flags.s_max, flags.ns);
    grids.u_nodes = linspace(-u_max, u_max, flags.nu);

    FiniteDisturbance dist;
    dist.points = flags.support;
    dist.sigma2 = flags.sigma2 > 0.0 ? flags.sigma2 : p.Sigma(0, 0);

    const ValueGrid vg = robust_value_iteration(p, dist, grids);
    const BoundReport bound = verify_upper_bound(vg, schedule);

    const double sd = std::sqrt(p.Sigma(0, 0));
    const std::vector<DisturbanceSpec> dists{
        DisturbanceSpec::gaussian(p.Sigma),
        DisturbanceSpec::scaled_rademacher(Vec::Constant(1, sd)),
        DisturbanceSpec::uniform(Vec::Constant(1, sd * std::sqrt(3.0)))};
    SeedSchedule seeds{cfg.master_seed};
    const std::vector<BoundCheck> mc_checks =
        validate_bound(p, schedule, dists, cfg.x0, cfg.trials, seeds);

    bool all_pass = bound.pass;
    Json mc_json = Json::array();
    for (const BoundCheck& c : mc_checks) {
        all_pass = all_pass && c.pass;
        mc_json.push_back(Json{{"dist", c.dist_name},
                               {"mean_excess", c.mean_excess},
                               {"stderr", c.stderr_excess},
                               {"a0", c.a0},
                               {"margin", c.margin},
                               {"pass", c.pass}});
    }
    Json out{{"bound",
              {{"pass", bound.pass},
               {"max_violation", bound.max_violation},
               {"eps_grid", bound.eps_grid},
               {"worst_x", bound.worst_x},
               {"worst_s", bound.worst_s}}},
             {"mc", mc_json},
             {"pass", all_pass}};

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path path =
        out_path.empty() ? std::filesystem::path(cfg.output_dir) / "verify.json"
                         : std::filesystem::path(out_path);
    atomic_write(path, out.dump(2) + "\n");

    if (!bound.pass) {
        std::fprintf(stderr,
                     "bound violated: V0 - Vhat0 = %.6g > eps_grid = %.6g at node (x=%.6g, "
                     "s=%.6g)\n",
                     bound.max_violation, bound.eps_grid, bound.worst_x, bound.worst_s);
    }
    for (const BoundCheck& c : mc_checks) {
        std::printf("mc %-10s mean_excess=%.6g a0=%.6g margin=%.6g %s\n", c.dist_name.c_str(),
                    c.mean_excess, c.a0, c.margin, c.pass ? "pass" : "FAIL");
    }
    std::printf("bound check: %s (max_violation=%.6g, eps_grid=%.6g)\n",
                bound.pass ? "pass" : "FAIL", bound.max_violation, bound.eps_grid);
    return all_pass ? kExitOk : kExitBoundFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-averse linear-quadratic control toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<long> trials_override;

    auto* riccati = app.add_subcommand("riccati", "Run a backward recursion and print P_t");
    std::string family = "acvar";
    double L = 1.0, gamma = 0.1, lambda = 1.0;
    std::string riccati_out;
    riccati->add_option("--config", config_path, "JSON config file")->required();
    riccati->add_option("--family", family, "acvar | leqr | lqgame | lqr")
        ->check(CLI::IsMember({"acvar", "leqr", "lqgame", "lqr"}));
    riccati->add_option("--L", L, "risk matrix scale (acvar)");
    riccati->add_option("--gamma", gamma, "risk-aversion parameter (leqr)");
    riccati->add_option("--lambda", lambda, "attenuation level (lqgame)");
    riccati->add_option("--out", riccati_out, "write the schedule JSON here");

    auto* sweep = app.add_subcommand("sweep", "Run the Monte-Carlo trade-off sweep");
    sweep->add_option("--config", config_path, "JSON config file")->required();
    sweep->add_option("--seed", seed_override, "override master_seed");
    sweep->add_option("--trials", trials_override, "override trial count");

    auto* verify = app.add_subcommand("verify", "Robust DP + Monte-Carlo bound verification");
    VerifyFlags vf;
    std::string verify_out;
    verify->add_option("--config", config_path, "JSON config file")->required();
    verify->add_option("--seed", seed_override, "override master_seed");
    verify->add_option("--trials", trials_override, "override trial count");
    verify->add_option("--L", vf.L, "acvar risk parameter");
    verify->add_option("--support", vf.support, "finite disturbance support points");
    verify->add_option("--sigma2", vf.sigma2, "second-moment cap (default: Sigma)");
    verify->add_option("--x-max", vf.x_max, "grid half-width in x");
    verify->add_option("--s-min", vf.s_min, "grid lower bound in s");
    verify->add_option("--s-max", vf.s_max, "grid upper bound in s");
    verify->add_option("--nx", vf.nx, "x nodes");
    verify->add_option("--ns", vf.ns, "s nodes");
    verify->add_option("--nu", vf.nu, "u nodes");
    verify->add_option("--out", verify_out, "verification report path");
    verify->add_flag("--inject-corrupt-a0", vf.corrupt_a0)->group("");  // test hook

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed_override) cfg.master_seed = *seed_override;
        if (trials_override) cfg.trials = *trials_override;
        if (const int rc = require_valid(cfg.problem); rc != kExitOk) return rc;

        if (riccati->parsed()) return cmd_riccati(cfg, family, L, gamma, lambda, riccati_out);
        if (sweep->parsed()) return cmd_sweep(cfg);
        return cmd_verify(cfg, vf, verify_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::ParseError:
            case ErrorKind::InvalidArgument:
            case ErrorKind::BadAlpha:
                return kExitConfig;
            case ErrorKind::Unsupported:
                return kExitUnsupported;
            case ErrorKind::NoFeasibleGamma:
                return kExitInfeasible;
            default:
                return kExitConfig;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
