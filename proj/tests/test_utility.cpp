#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pact/utility.hpp"

using namespace pact;

namespace {

const std::vector<UtilitySpec>& all_kinds() {
    static const std::vector<UtilitySpec> kinds = {
        UtilitySpec::cara(0.2),           UtilitySpec::cara(1.0),
        UtilitySpec::cara(2.0),           UtilitySpec::extended_log(),
        UtilitySpec::partial_iara(),      UtilitySpec::extended_arctan(),
        UtilitySpec::risk_neutral(),
    };
    return kinds;
}

// knot of the piecewise definition, or nan when the formula is global
double knot_of(const UtilitySpec& u) {
    switch (u.kind) {
    case UtilityKind::extended_log: return 1.0;
    case UtilityKind::partial_iara: return 0.0;
    case UtilityKind::extended_arctan: return 1.0 / std::sqrt(3.0);
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

double central_diff(double (*f)(const UtilitySpec&, double), const UtilitySpec& u,
                    double x, double h) {
    return (f(u, x + h) - f(u, x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("utility point values") {
    CHECK(eval(UtilitySpec::cara(1.0), 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(eval(UtilitySpec::extended_log(), 1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(eval(UtilitySpec::extended_log(), 0.0) == doctest::Approx(-1.5).epsilon(1e-14));
    const double k = 1.0 / std::sqrt(3.0);
    CHECK(eval(UtilitySpec::extended_arctan(), k) ==
          doctest::Approx(std::numbers::pi / 6.0).epsilon(1e-14));

    CHECK(deriv(UtilitySpec::extended_log(), 2.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(deriv(UtilitySpec::extended_log(), 0.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(deriv(UtilitySpec::cara(2.0), 0.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(deriv2(UtilitySpec::cara(2.0), 0.0) == doctest::Approx(-4.0).epsilon(1e-14));
}

TEST_CASE("absolute risk aversion") {
    for (double x : {-3.0, 0.0, 1.7, 10.0})
        CHECK(absolute_risk_aversion(UtilitySpec::cara(0.2), x) ==
              doctest::Approx(0.2).epsilon(1e-12));
    for (double x : {0.0, 0.5, 4.0})
        CHECK(absolute_risk_aversion(UtilitySpec::partial_iara(), x) ==
              doctest::Approx(1.0).epsilon(1e-12));
    for (double x : {-2.0, 0.0, 3.0})
        CHECK(absolute_risk_aversion(UtilitySpec::risk_neutral(), x) == 0.0);
    // quadratic branch: 1/(1-x), increasing toward 0
    CHECK(absolute_risk_aversion(UtilitySpec::partial_iara(), -1.0) ==
          doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("monotone increasing and concave everywhere") {
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> dist(-30.0, 30.0);
    for (const auto& u : all_kinds()) {
        for (int i = 0; i < 10000; ++i) {
            const double x = dist(rng);
            CHECK(deriv(u, x) > 0.0);
            CHECK(deriv2(u, x) <= 0.0);
        }
    }
}

TEST_CASE("analytic derivatives match central finite differences") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> dist(-8.0, 8.0);
    const double h = 1e-5;
    for (const auto& u : all_kinds()) {
        const double knot = knot_of(u);
        int done = 0;
        while (done < 200) {
            const double x = dist(rng);
            if (!std::isnan(knot) && std::abs(x - knot) < 1e-3) continue;
            ++done;
            const double fd1 = central_diff(&eval, u, x, h);
            const double d1 = deriv(u, x);
            CHECK(std::abs(fd1 - d1) <= 1e-6 * std::max(1e-8, std::abs(d1)));
            const double fd2 = central_diff(&deriv, u, x, h);
            const double d2 = deriv2(u, x);
            // relative where the scale allows it, absolute near zero curvature
            CHECK(std::abs(fd2 - d2) <= 1e-6 * std::max(1e-4, std::abs(d2)));
        }
    }
}

TEST_CASE("pieces glue smoothly at the knot") {
    const double e = 1e-9;
    for (const auto& u : all_kinds()) {
        const double knot = knot_of(u);
        if (std::isnan(knot)) continue;
        CHECK(std::abs(eval(u, knot - e) - eval(u, knot + e)) <= 1e-8);
        CHECK(std::abs(deriv(u, knot - e) - deriv(u, knot + e)) <= 1e-8);
    }
}

TEST_CASE("extended arctan is bounded above by pi/2") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-500.0, 500.0);
    const auto u = UtilitySpec::extended_arctan();
    for (int i = 0; i < 10000; ++i) CHECK(eval(u, dist(rng)) < std::numbers::pi / 2.0);
}

TEST_CASE("cara saturates instead of overflowing") {
    reset_saturation_count();
    const auto u = UtilitySpec::cara(1.0);
    const double v = eval(u, -1e6);
    CHECK(std::isfinite(v));
    CHECK(v == -std::exp(700.0));
    CHECK(saturation_count() > 0);
    CHECK(std::isfinite(deriv(u, -1e6)));
    CHECK(std::isfinite(deriv2(u, -1e6)));
    reset_saturation_count();
    CHECK(saturation_count() == 0);
}

TEST_CASE("cara requires positive gamma") {
    CHECK_THROWS_AS(UtilitySpec::cara(0.0), std::invalid_argument);
    CHECK_THROWS_AS(UtilitySpec::cara(-1.0), std::invalid_argument);
}
