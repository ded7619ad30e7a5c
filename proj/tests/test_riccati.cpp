#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cvarlq/policy.hpp"
#include "test_util.hpp"

using namespace cvarlq;
using testutil::showcase;

namespace {

const Mat I1 = Mat::Identity(1, 1);

double rel_err(const Mat& got, const Mat& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

} // namespace

TEST_CASE("acvar recursion: terminal conditions are exact") {
    const auto s = acvar_recursion(showcase(), I1);
    CHECK(s.P[4](0, 0) == 1.0);
    CHECK(s.a[4] == 0.0);
}

TEST_CASE("acvar recursion: one-step hand values on the showcase system") {
    const auto s1 = acvar_recursion(showcase(), I1);
    // P_3 = (1 + 1 - 0.5)^-1 + 1e-3, a_3 = tr(1 * (1 + 1)).
    CHECK(s1.P[3](0, 0) == doctest::Approx(0.6676666666666666).epsilon(1e-12));
    CHECK(s1.a[3] == doctest::Approx(2.0).epsilon(1e-14));

    const auto s100 = acvar_recursion(showcase(), 100.0 * I1);
    CHECK(s100.P[3](0, 0) == doctest::Approx(0.5034875621890548).epsilon(1e-12));
}

TEST_CASE("acvar recursion matches an independent scalar route over the horizon") {
    for (double L : {0.2, 1.0, 10.0, 100.0}) {
        const auto got = acvar_recursion(showcase(), L * I1);
        const auto want = testutil::scalar_acvar_oracle(1.0, 1.0, 1e-3, 1.0, 1.0, 1.0, L, 4);
        for (int t = 0; t <= 4; ++t) {
            CHECK(got.P[t](0, 0) == doctest::Approx(want.P[t]).epsilon(1e-13));
            CHECK(got.a[t] == doctest::Approx(want.a[t]).epsilon(1e-13));
        }
    }
}

TEST_CASE("acvar recursion rejects a non-PD risk matrix") {
    CHECK_THROWS_AS(acvar_recursion(showcase(), -1.0 * I1), Error);
    CHECK_THROWS_AS(acvar_recursion(showcase(), Mat::Zero(1, 1)), Error);
}

TEST_CASE("acvar a_t increments are exactly tr(Sigma (P_{t+1} + L))") {
    RandomStream rs(61);
    for (int trial = 0; trial < 25; ++trial) {
        const LqProblem p = testutil::random_problem(rs, 4, 3, 8);
        const Mat L = testutil::random_spd(rs, p.n(), 0.2);
        const auto s = acvar_recursion(p, L);
        for (int t = 0; t < p.N; ++t) {
            const double inc = (p.Sigma * (s.P[t + 1] + s.L)).trace();
            CHECK(inc > 0.0);
            CHECK(s.a[t] == s.a[t + 1] + inc);  // the exact computation path
        }
    }
}

TEST_CASE("gain-consistency identity for acvar and leqr") {
    RandomStream rs(17);
    for (int trial = 0; trial < 40; ++trial) {
        const LqProblem p = testutil::random_problem(rs, 4, 3, 6);
        const Mat L = testutil::random_spd(rs, p.n(), 0.3);
        const auto ac = acvar_recursion(p, L);
        for (int t = 0; t < p.N; ++t) {
            const Mat ABK = p.A + p.B * ac.K[t];
            const Mat lhs = p.Q + ac.K[t].transpose() * p.R * ac.K[t] +
                            ABK.transpose() * ac.S[t] * ABK;
            CHECK(rel_err(lhs, ac.P[t]) <= 1e-9);
        }
        const auto le = leqr_recursion(p, 1e-3);
        if (!le.feasible) continue;
        for (int t = 0; t < p.N; ++t) {
            const Mat ABK = p.A + p.B * le.K[t];
            const Mat lhs = p.Q + le.K[t].transpose() * p.R * le.K[t] +
                            ABK.transpose() * le.Ptilde[t] * ABK;
            CHECK(rel_err(lhs, le.Pbar[t]) <= 1e-9);
        }
    }
}

TEST_CASE("leqr recursion: hand values and feasibility on the showcase system") {
    const auto s = leqr_recursion(showcase(), 0.5);
    REQUIRE(s.feasible);
    CHECK(s.Ptilde[3](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.Pbar[3](0, 0) == doctest::Approx(0.6676666666666666).epsilon(1e-12));
    // Coincides with the acvar L=1 first step since (P_4 + 1)^-1 = 0.5 = gamma*Sigma.
    const auto ac = acvar_recursion(showcase(), I1);
    CHECK(s.Pbar[3](0, 0) == doctest::Approx(ac.P[3](0, 0)).epsilon(1e-14));

    const auto bad = leqr_recursion(showcase(), 2.0);
    CHECK_FALSE(bad.feasible);
    CHECK(bad.failed_at == 3);
}

TEST_CASE("leqr at vanishing gamma reduces to LQR") {
    const auto le = leqr_recursion(showcase(), 1e-12);
    REQUIRE(le.feasible);
    const auto lqr = lqr_recursion(showcase());
    for (int t = 0; t <= 4; ++t) {
        CHECK(rel_err(le.Pbar[t], lqr.P[t]) <= 1e-9);
    }
}

TEST_CASE("lqr recursion: hand value, no-control case, and degenerate horizon") {
    const auto s = lqr_recursion(showcase());
    CHECK(s.P[3](0, 0) == doctest::Approx(0.501).epsilon(1e-14));
    // Frozen four-step values for the showcase system.
    CHECK(s.P[0](0, 0) == doctest::Approx(0.20215765328219668).epsilon(1e-12));
    CHECK(s.K[0](0, 0) == doctest::Approx(-0.2011576532821967).epsilon(1e-12));
    CHECK(s.K[3](0, 0) == doctest::Approx(-0.5).epsilon(1e-14));

    LqProblem nob = showcase();
    nob.B = Mat::Zero(1, 1);
    const auto sb = lqr_recursion(nob);
    for (int t = 3; t >= 0; --t) {
        CHECK(sb.P[t](0, 0) ==
              doctest::Approx(sb.P[t + 1](0, 0) + 1e-3).epsilon(1e-14));
    }

    LqProblem degenerate = showcase();
    degenerate.N = 0;  // recursion loop body never runs
    const auto s0 = lqr_recursion(degenerate);
    REQUIRE(s0.P.size() == 1);
    CHECK(s0.P[0](0, 0) == 1.0);
    const auto ac0 = acvar_recursion(degenerate, I1);
    REQUIRE(ac0.P.size() == 1);
    CHECK(ac0.P[0](0, 0) == 1.0);
    CHECK(ac0.a[0] == 0.0);
}

TEST_CASE("lqr value identity through g_tilde") {
    RandomStream rs(29);
    for (int trial = 0; trial < 30; ++trial) {
        const LqProblem p = testutil::random_problem(rs, 4, 3, 6);
        const auto s = lqr_recursion(p);
        for (int t = 0; t < p.N; ++t) {
            const Mat expect = p.A.transpose() * g_tilde(s.P[t + 1], p) * p.A + p.Q;
            CHECK(rel_err(s.P[t], expect) <= 1e-9);
        }
    }
}

TEST_CASE("lq game: limits, equivalence with leqr, and indefinite continuation") {
    const LqProblem p = showcase();
    const auto far = lq_game_recursion(p, 1e6);
    REQUIRE(far.feasible);
    const auto lqr = lqr_recursion(p);
    for (int t = 0; t <= 4; ++t) {
        CHECK(rel_err(far.Phat[t], lqr.P[t]) <= 1e-9);
    }

    const double gamma = 0.5;
    const auto le = leqr_recursion(p, gamma);
    const auto game = lq_game_recursion(p, 1.0 / std::sqrt(gamma));
    REQUIRE(le.feasible);
    REQUIRE(game.feasible);
    for (int t = 0; t <= 4; ++t) {
        CHECK((le.Pbar[t] - game.Phat[t]).cwiseAbs().maxCoeff() <= 1e-12);
    }

    // lambda = 0.5: inner term 1 + 1 - 4 = -2 is invertible, so the step
    // proceeds; P̂_3 = -0.5 + 1e-3 is not PD but the recursion carries on.
    const auto odd = lq_game_recursion(p, 0.5);
    CHECK(odd.Phat[3](0, 0) == doctest::Approx(-0.499).epsilon(1e-12));

    LqProblem r2 = p;
    r2.R(0, 0) = 2.0;
    CHECK_THROWS_AS(lq_game_recursion(r2, 1.0), Error);
}

TEST_CASE("critical_gamma brackets the feasibility boundary") {
    const LqProblem p = showcase();
    const double tol = 1e-9;
    const double gc = critical_gamma(p, tol);
    CHECK(gc > 0.0);
    CHECK(leqr_recursion(p, gc - tol).feasible);
    CHECK_FALSE(leqr_recursion(p, gc + tol).feasible);
    CHECK(leqr_recursion(p, gc * (1.0 - 1e-6)).feasible);
    CHECK_FALSE(leqr_recursion(p, gc * (1.0 + 1e-6)).feasible);
}

TEST_CASE("critical_gamma scales inversely with Sigma for scalar systems") {
    LqProblem p = showcase();
    const double gc = critical_gamma(p, 1e-10);
    p.Sigma(0, 0) = 0.25;
    const double gc4 = critical_gamma(p, 1e-10);
    CHECK(gc4 >= 4.0 * gc * (1.0 - 1e-6));
}

TEST_CASE("acvar L -> infinity recovers LQR") {
    const LqProblem p = showcase();
    CHECK(acvar_lqr_limit_gap(p, 1e6) <= 1e-5);
    CHECK(acvar_lqr_limit_gap(p, 1e12) <= 1e-9);
    const auto lqr = lqr_recursion(p);
    CHECK(rel_err(lqr.P[0], lqr.P[0]) == 0.0);  // self-gap
}

TEST_CASE("scalar monotonicity in the risk parameter") {
    const LqProblem p = showcase();
    const auto lqr = lqr_recursion(p);
    double prev = std::numeric_limits<double>::infinity();
    for (double L : {0.2, 0.5, 1.0, 5.0, 50.0, 1e4}) {
        const double p0 = acvar_recursion(p, L * I1).P[0](0, 0);
        CHECK(p0 <= prev + 1e-14);
        CHECK(p0 >= lqr.P[0](0, 0) - 1e-14);
        prev = p0;
    }
}

TEST_CASE("well-posedness: acvar always succeeds where leqr can fail" *
          doctest::timeout(60)) {
    RandomStream rs(101);
    int leqr_failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const LqProblem p = testutil::random_problem(rs, 4, 3, 10);
        const Mat L = testutil::random_spd(rs, p.n(), 0.2);
        const auto ac = acvar_recursion(p, L);
        for (const Mat& P : ac.P) CHECK(is_positive_definite(P));
        for (const Mat& S : ac.S) CHECK(is_positive_definite(S));
        if (!leqr_recursion(p, 5.0).feasible) ++leqr_failures;
    }
    CHECK(leqr_failures > 0);
}

TEST_CASE("h_hat consistency: acvar P_t reappears through the proof object") {
    RandomStream rs(77);
    for (int trial = 0; trial < 25; ++trial) {
        const LqProblem p = testutil::random_problem(rs, 3, 2, 5);
        const Mat L = testutil::random_spd(rs, p.n(), 0.3);
        const auto s = acvar_recursion(p, L);
        for (int t = 0; t < p.N; ++t) {
            const Vec x = testutil::random_matrix(rs, p.n(), 1, 2.0);
            const double sbudget = testutil::uniform_in(rs, -3.0, 3.0);
            const double hh = h_hat(x, sbudget, s.P[t + 1] + s.L, s.P[t + 1], p);
            const double want = quad_form(s.P[t], x) - sbudget;
            CHECK(hh == doctest::Approx(want).epsilon(1e-9));
        }
    }
}
