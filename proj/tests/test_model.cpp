#include "doctest.h"

#include <cmath>
#include <random>

#include "pact/model.hpp"

using namespace pact;

namespace {

ProblemSpec cara_problem(double gp, double ga, double K, double x0, double y, double m,
                         std::optional<double> M = std::nullopt, int n = 64) {
    ProblemSpec p;
    p.x0 = x0;
    p.K = K;
    p.y = y;
    p.m = m;
    p.M = M;
    p.principal = UtilitySpec::cara(gp);
    p.agent = UtilitySpec::cara(ga);
    p.shock = gauss_hermite(n);
    return p;
}

}  // namespace

TEST_CASE("principal value, deterministic risk-neutral case") {
    ProblemSpec p;
    p.x0 = 3.0;
    p.K = 2.0;
    p.y = 1.0;
    p.m = 0.0;
    p.principal = UtilitySpec::risk_neutral();
    p.agent = UtilitySpec::cara(1.0);
    p.shock = custom({0.0}, {1.0});
    const Contract c = StateWiseContract{{p.y}, 0.0};
    CHECK(principal_value(p, c) == doctest::Approx(p.x0 - p.y).epsilon(1e-15));
}

TEST_CASE("principal value matches the Gaussian moment identity") {
    // wage fixed at y, action 0: E[-exp(-gp(x0 + B - y))] = -exp(-gp(x0-y))exp(gp^2/2)
    const auto p = cara_problem(0.7, 1.0, 2.0, 1.4, 0.9, -100.0);
    const Contract c = ParametricContract{0.0, p.y, 0.0};
    const double expected = -std::exp(-0.7 * (p.x0 - p.y)) * std::exp(0.7 * 0.7 / 2.0);
    CHECK(principal_value(p, c) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("parametric and statewise representations agree") {
    const auto p = cara_problem(0.2, 0.5, 2.0, 1.0, 1.0, 0.0);
    const Contract par = ParametricContract{0.0, p.y, 0.0};
    const Contract sw = StateWiseContract{std::vector<double>(p.shock.size(), p.y), 0.0};
    CHECK(principal_value(p, par) == doctest::Approx(principal_value(p, sw)).epsilon(1e-15));
    CHECK(agent_value(p, par) == doctest::Approx(agent_value(p, sw)).epsilon(1e-15));
}

TEST_CASE("agent value at the anchor contract is exactly the reservation utility") {
    const auto p = cara_problem(0.2, 0.2, 2.0, 1.0, 1.0, 0.0);
    const Contract anchor = ParametricContract{0.0, p.y, 0.0};
    CHECK(agent_value(p, anchor) == doctest::Approx(eval(p.agent, p.y)).epsilon(1e-15));
}

TEST_CASE("agent value matches the Gaussian mgf for unclamped linear wages") {
    auto p = cara_problem(0.4, 0.8, 2.0, 1.3, 0.7, -1e9);
    const double rho = 0.35, beta = 0.4, a = 0.9;
    const Contract c = ParametricContract{rho, beta, a};
    const double kappa = p.cost(a);
    const double expected = -std::exp(-0.8 * (rho * (p.x0 + a) + beta - kappa)) *
                            std::exp(0.8 * 0.8 * rho * rho / 2.0);
    CHECK(agent_value(p, c) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("feasibility report flags violations") {
    const auto p = cara_problem(0.2, 0.2, 2.0, 1.0, 1.0, 0.0);

    const Contract anchor = ParametricContract{0.0, p.y, 0.0};
    CHECK(is_feasible(p, anchor, 1e-9).feasible);

    // wages pinned at m < y: participation violated, bounds fine
    const Contract low = StateWiseContract{std::vector<double>(p.shock.size(), p.m), 0.0};
    const auto rep = is_feasible(p, low, 1e-9);
    CHECK_FALSE(rep.feasible);
    CHECK_FALSE(rep.pc_ok);
    CHECK(rep.bounds_ok);
    CHECK(agent_value(p, low) < eval(p.agent, p.y));

    // explicit wage below the bound
    std::vector<double> w(p.shock.size(), p.y);
    w[3] = p.m - 0.5;
    const auto rep2 = is_feasible(p, StateWiseContract{w, 0.0}, 1e-9);
    CHECK_FALSE(rep2.bounds_ok);
    CHECK(rep2.worst_state == 3);
    CHECK(rep2.worst_violation == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rs_solve reproduces the benchmark optima") {
    const auto fig1 = cara_problem(0.2, 0.2, 2.0, 1.0, 1.0, 0.0);
    const auto rs1 = rs_solve(fig1);
    CHECK(rs1.a == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rs1.rho == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(rs1.beta - 0.525) <= 0.001);

    const auto fig4 = cara_problem(5.0, 0.1, 2.0, 1.0, 0.5, 0.0);
    const auto rs4 = rs_solve(fig4);
    CHECK(std::abs(rs4.beta - (-0.673)) <= 0.002);

    ProblemSpec rn = fig1;
    rn.principal = UtilitySpec::risk_neutral();
    const auto rs_rn = rs_solve(rn);
    CHECK(rs_rn.a == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rs_rn.rho == 0.0);
    CHECK(rs_rn.beta == doctest::Approx(1.25).epsilon(1e-15));

    ProblemSpec bad = fig1;
    bad.principal = UtilitySpec::extended_log();
    CHECK_THROWS_AS(rs_solve(bad), std::invalid_argument);
}

TEST_CASE("rs_solve intercept matches the Gaussian closed form") {
    std::mt19937 rng(40412);
    std::uniform_real_distribution<double> gam(0.05, 5.0);
    std::uniform_real_distribution<double> kd(0.25, 5.0);
    std::uniform_real_distribution<double> x0d(-2.0, 5.0);
    std::uniform_real_distribution<double> yd(0.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        const double gp = gam(rng), ga = gam(rng);
        const auto p = cara_problem(gp, ga, kd(rng), x0d(rng), yd(rng), -1e6);
        const auto rs = rs_solve(p);
        const double rho = gp / (gp + ga);
        const double beta_oracle =
            p.y + p.cost(rs.a) - rho * (p.x0 + rs.a) + ga * rho * rho / 2.0;
        CHECK(std::abs(rs.beta - beta_oracle) <= 1e-8);
    }
}

TEST_CASE("problem validation") {
    auto p = cara_problem(0.2, 0.2, 2.0, 1.0, 1.0, 0.0);
    CHECK_NOTHROW(p.validate());
    auto bad = p;
    bad.m = 2.0;  // m > y
    CHECK_THROWS_WITH_AS(bad.validate(), "m <= y required", std::invalid_argument);
    bad = p;
    bad.K = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.y = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.M = -0.5;  // M <= m
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("value function is concave and the feasible set convex") {
    const auto p = cara_problem(0.3, 0.6, 2.0, 1.0, 1.0, 0.0);
    std::mt19937 rng(1316);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_real_distribution<double> act(0.0, 2.0);
    const std::size_t n = p.shock.size();
    const double uay = eval(p.agent, p.y);

    auto random_feasible = [&]() {
        const double a = act(rng);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i)
            w[i] = p.y + p.cost(a) + 2.0 * unif(rng);  // w - kappa >= y pointwise
        return StateWiseContract{w, a};
    };

    for (int t = 0; t < 200; ++t) {
        const auto c1 = random_feasible();
        const auto c2 = random_feasible();
        REQUIRE(agent_value(p, c1) >= uay - 1e-12);
        REQUIRE(agent_value(p, c2) >= uay - 1e-12);
        const double lam = unif(rng);
        StateWiseContract mix;
        mix.a = lam * c1.a + (1.0 - lam) * c2.a;
        mix.wages.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            mix.wages[i] = lam * c1.wages[i] + (1.0 - lam) * c2.wages[i];

        const double v1 = principal_value(p, c1);
        const double v2 = principal_value(p, c2);
        CHECK(principal_value(p, mix) >= lam * v1 + (1.0 - lam) * v2 - 1e-10);
        CHECK(is_feasible(p, mix, 1e-9).feasible);

        // value dominated by the Jensen bound at a* = 1/K
        const double a_star = 1.0 / p.K;
        const double cap =
            eval(p.principal, p.x0 - p.y + p.shock.mean() + a_star - p.cost(a_star));
        CHECK(principal_value(p, c1) <= cap + 1e-10);
    }
}
