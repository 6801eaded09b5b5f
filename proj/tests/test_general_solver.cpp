#include "doctest.h"

#include <cmath>
#include <random>

#include "pact/cara_solver.hpp"
#include "pact/general_solver.hpp"
#include "pact/verification.hpp"

using namespace pact;

namespace {

ProblemSpec base_problem(UtilitySpec up, UtilitySpec ua, ShockGrid shock, double K = 2.0,
                         double x0 = 1.0, double y = 1.0, double m = 0.0,
                         std::optional<double> M = std::nullopt) {
    ProblemSpec p;
    p.x0 = x0;
    p.K = K;
    p.y = y;
    p.m = m;
    p.M = M;
    p.principal = up;
    p.agent = ua;
    p.shock = std::move(shock);
    return p;
}

}  // namespace

TEST_CASE("risk-neutral principal: constant wage y + kappa(1/K), action 1/K") {
    const auto p = base_problem(UtilitySpec::risk_neutral(), UtilitySpec::cara(1.0),
                                gauss_hermite(32));
    const auto s = general_ll_solve(p);
    CHECK(std::abs(s.contract.a - 0.5) <= 1e-6);
    const double w_star = p.y + p.cost(0.5);
    for (double w : s.contract.wages) CHECK(std::abs(w - w_star) <= 1e-6);
    CHECK(s.multipliers.lambda > 0.0);
}

TEST_CASE("matches the cara solver on figure-1 parameters") {
    const auto p =
        base_problem(UtilitySpec::cara(0.2), UtilitySpec::cara(0.2), gauss_hermite(64));
    const auto gen = general_ll_solve(p);
    const auto ref = cara_ll_solve(p);
    CHECK(std::abs(gen.value - ref.value) <= 1e-6);

    // option form: the state-wise optimum fits the clamped line
    const auto wref = realized_wages(p, Contract{ref.contract});
    double sup = 0.0;
    for (std::size_t i = 0; i < wref.size(); ++i)
        sup = std::max(sup, std::abs(wref[i] - gen.contract.wages[i]));
    CHECK(sup <= 1e-4);
}

TEST_CASE("converged solutions satisfy the optimality structure") {
    const auto p = base_problem(UtilitySpec::extended_log(), UtilitySpec::extended_log(),
                                uniform(-5.0, 5.0, 40));
    const auto s = general_ll_solve(p);
    CHECK(s.kkt.max_residual() <= 1e-8);
    CHECK(s.multipliers.lambda > 0.0);
    CHECK(s.kkt.pc_binding);
    CHECK(s.kkt.action_bound_ok);  // one-sided: a >= 1/K
    CHECK(s.contract.a >= 1.0 / p.K - 1e-8);
    CHECK(s.kkt.borch_spread <= 1e-5);

    // complementary slackness, state by state
    for (std::size_t i = 0; i < s.contract.wages.size(); ++i) {
        if (s.multipliers.z[i] > 1e-8) CHECK(std::abs(s.contract.wages[i] - p.m) <= 1e-8);
    }
    // not all wages pinned when y > m
    bool any_interior = false;
    for (double w : s.contract.wages) any_interior = any_interior || w > p.m + 1e-8;
    CHECK(any_interior);
}

TEST_CASE("two-sided extended-log run pins both bounds") {
    const auto p = base_problem(UtilitySpec::extended_log(), UtilitySpec::extended_log(),
                                uniform(-5.0, 5.0, 25), 2.0, 1.0, 1.0, 0.6, 1.6);
    const auto s = general_ll_solve(p);
    CHECK(s.kkt.max_residual() <= 1e-8);
    CHECK(s.kkt.action_bound_ok);  // sign dichotomy
    for (std::size_t i = 0; i < s.contract.wages.size(); ++i) {
        CHECK(s.contract.wages[i] >= p.m - 1e-12);
        CHECK(s.contract.wages[i] <= *p.M + 1e-12);
        if (s.multipliers.y[i] > 1e-8)
            CHECK(std::abs(s.contract.wages[i] - *p.M) <= 1e-8);
    }
}

TEST_CASE("deterministic single-atom shock collapses to the first-order answer") {
    for (auto kinds : {std::pair{UtilitySpec::cara(0.7), UtilitySpec::cara(0.3)},
                       std::pair{UtilitySpec::extended_log(), UtilitySpec::partial_iara()}}) {
        const auto p = base_problem(kinds.first, kinds.second, custom({0.0}, {1.0}));
        const auto s = general_ll_solve(p);
        CHECK(std::abs(s.contract.a - 1.0 / p.K) <= 1e-7);
        CHECK(std::abs(s.contract.wages[0] - (p.y + p.cost(1.0 / p.K))) <= 1e-7);
    }
}

TEST_CASE("mixed utility pairs converge with tight audits") {
    const auto grids = custom({-1.5, -0.25, 0.5, 2.0}, {0.2, 0.3, 0.3, 0.2});
    const std::vector<std::pair<UtilitySpec, UtilitySpec>> pairs = {
        {UtilitySpec::extended_arctan(), UtilitySpec::partial_iara()},
        {UtilitySpec::partial_iara(), UtilitySpec::extended_log()},
        {UtilitySpec::cara(0.8), UtilitySpec::extended_log()},
        {UtilitySpec::risk_neutral(), UtilitySpec::extended_log()},
    };
    for (const auto& [up, ua] : pairs) {
        const auto p = base_problem(up, ua, grids, 2.0, 1.0, 0.75, 0.0, 2.5);
        const auto s = general_ll_solve(p);
        CHECK(s.kkt.max_residual() <= 1e-8);
        CHECK(is_feasible(p, Contract{s.contract}, 1e-8).feasible);
        // the independent audit agrees within 10x the solver tolerance
        const auto audit = verification::kkt_verify(p, Contract{s.contract},
                                                    s.multipliers, 1e-8);
        CHECK(audit.max_residual() <= 1e-7);
    }
}

TEST_CASE("unreachable participation constraint is reported infeasible") {
    auto p = base_problem(UtilitySpec::cara(0.5), UtilitySpec::cara(0.5),
                          gauss_hermite(16));
    p.y = 3.0;
    p.M = 2.0;
    CHECK_THROWS_AS(general_ll_solve(p), InfeasibleError);
}

TEST_CASE("analytic gradients match central finite differences") {
    const std::vector<UtilitySpec> kinds = {
        UtilitySpec::cara(0.7), UtilitySpec::extended_log(), UtilitySpec::partial_iara(),
        UtilitySpec::extended_arctan(), UtilitySpec::risk_neutral()};
    std::mt19937 rng(90210);
    std::uniform_real_distribution<double> wd(0.3, 2.5);
    std::uniform_real_distribution<double> ad(0.2, 1.5);
    const double h = 1e-6;

    for (const auto& up : kinds) {
        for (const auto& ua : kinds) {
            const auto p = base_problem(up, ua, custom({-1.0, 0.2, 1.3}, {0.3, 0.4, 0.3}),
                                        2.0, 1.0, 1.0, 0.0, 3.0);
            for (int t = 0; t < 4; ++t) {
                std::vector<double> w{wd(rng), wd(rng), wd(rng)};
                const double a = ad(rng);
                const auto g = gradient(p, w, a);

                for (std::size_t i = 0; i < w.size(); ++i) {
                    auto wp = w, wm = w;
                    wp[i] += h;
                    wm[i] -= h;
                    const double fd_obj =
                        (principal_value(p, wp, a) - principal_value(p, wm, a)) / (2 * h);
                    const double fd_pc =
                        (agent_value(p, wp, a) - agent_value(p, wm, a)) / (2 * h);
                    CHECK(std::abs(fd_obj - g.objective_w[i]) <=
                          1e-6 * std::max(1e-6, std::abs(g.objective_w[i])));
                    CHECK(std::abs(fd_pc - g.pc_w[i]) <=
                          1e-6 * std::max(1e-6, std::abs(g.pc_w[i])));
                }
                const double fd_obj_a =
                    (principal_value(p, w, a + h) - principal_value(p, w, a - h)) /
                    (2 * h);
                const double fd_pc_a =
                    (agent_value(p, w, a + h) - agent_value(p, w, a - h)) / (2 * h);
                CHECK(std::abs(fd_obj_a - g.objective_a) <=
                      1e-6 * std::max(1e-6, std::abs(g.objective_a)));
                CHECK(std::abs(fd_pc_a - g.pc_a) <=
                      1e-6 * std::max(1e-6, std::abs(g.pc_a)));
            }
        }
    }
}

TEST_CASE("risk-neutral principal wage gradient is minus the probabilities") {
    const auto p = base_problem(UtilitySpec::risk_neutral(), UtilitySpec::cara(1.0),
                                custom({-1.0, 1.0}, {0.4, 0.6}));
    const std::vector<double> w{1.0, 1.2};
    const auto g = gradient(p, w, 0.5);
    CHECK(g.objective_w[0] == doctest::Approx(-0.4).epsilon(1e-15));
    CHECK(g.objective_w[1] == doctest::Approx(-0.6).epsilon(1e-15));
    // participation gradient in a vanishes at a = 0
    const auto g0 = gradient(p, w, 0.0);
    CHECK(g0.pc_a == 0.0);
}
