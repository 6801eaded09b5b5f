#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pact/model.hpp"

namespace pact {
namespace verification {

// Independent audit of a (contract, multipliers) certificate against the four
// necessary optimality conditions. This deliberately re-derives everything
// from the problem data and shares no code with the solvers' internal
// convergence checks.
inline KKTReport kkt_verify(const ProblemSpec& p, const Contract& c,
                            const Multipliers& mult, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("kkt_verify: tol > 0 required");
    const auto wages = realized_wages(p, c);
    const double a = action(c);
    const double kappa = p.cost(a);
    const double kprime = p.cost_deriv(a);
    const std::size_t n = wages.size();

    std::vector<double> up(n), ua(n);
    for (std::size_t i = 0; i < n; ++i) {
        up[i] = deriv(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]);
        ua[i] = deriv(p.agent, wages[i] - kappa);
    }

    double mean_up = 0.0, mean_ua = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_up += p.shock.probs[i] * up[i];
        mean_ua += p.shock.probs[i] * ua[i];
    }

    KKTReport rep;
    rep.lambda = mult.lambda;

    // (1) stationarity in the action
    rep.r_stationarity_a = std::abs(mean_up - mult.lambda * kprime * mean_ua);

    // (2) state-wise stationarity in the wage
    for (std::size_t i = 0; i < n; ++i) {
        const double zi = i < mult.z.size() ? mult.z[i] : 0.0;
        const double yi = i < mult.y.size() ? mult.y[i] : 0.0;
        rep.r_stationarity_w = std::max(
            rep.r_stationarity_w, std::abs(up[i] - mult.lambda * ua[i] - zi + yi));
    }

    // (3) participation complementary slackness
    const double pc_gap = agent_value(p, wages, a) - eval(p.agent, p.y);
    rep.r_pc_slack = std::abs(mult.lambda * pc_gap);
    rep.pc_binding = std::abs(pc_gap) <= tol;

    // (4) bound complementary slackness
    double lo_slack = 0.0, hi_slack = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double zi = i < mult.z.size() ? mult.z[i] : 0.0;
        lo_slack += p.shock.probs[i] * zi * (wages[i] - p.m);
        if (p.M) {
            const double yi = i < mult.y.size() ? mult.y[i] : 0.0;
            hi_slack += p.shock.probs[i] * yi * (*p.M - wages[i]);
        }
    }
    rep.r_bound_slack = std::abs(lo_slack) + std::abs(hi_slack);

    // Borch flatness over states where no bound is within 10*tol
    double dev = 0.0;
    bool interior = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double dist =
            p.M ? std::min(wages[i] - p.m, *p.M - wages[i]) : wages[i] - p.m;
        if (dist > 10.0 * tol) {
            interior = true;
            dev = std::max(dev, std::abs(up[i] / ua[i] - mult.lambda));
        }
    }
    rep.borch_spread = interior ? dev / std::max(std::abs(mult.lambda), 1e-300) : 0.0;

    if (!p.M) {
        rep.action_bound_ok = kprime >= 1.0 - 10.0 * tol;
    } else {
        double ez = 0.0, ey = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ez += p.shock.probs[i] * (i < mult.z.size() ? mult.z[i] : 0.0);
            ey += p.shock.probs[i] * (i < mult.y.size() ? mult.y[i] : 0.0);
        }
        const double d1 = kprime - 1.0;
        const double d2 = ez - ey;
        rep.action_bound_ok =
            d1 * d2 >= 0.0 || std::abs(d1) <= 1e-6 || std::abs(d2) <= 1e-6;
    }
    return rep;
}

struct BorchReport {
    double spread = 0.0;
    double interior_mass = 0.0;
    int interior_count = 0;
    bool no_interior_states = false;
};

// Relative deviation of the marginal-utility ratio from lambda over the
// states where neither wage bound is within 10*tol of the wage.
inline BorchReport borch_check(const ProblemSpec& p, const Contract& c, double lambda,
                               double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("borch_check: tol > 0 required");
    const auto wages = realized_wages(p, c);
    const double a = action(c);
    const double kappa = p.cost(a);
    BorchReport rep;
    for (std::size_t i = 0; i < wages.size(); ++i) {
        const double dist =
            p.M ? std::min(wages[i] - p.m, *p.M - wages[i]) : wages[i] - p.m;
        if (dist <= 10.0 * tol) continue;
        ++rep.interior_count;
        rep.interior_mass += p.shock.probs[i];
        const double ratio = deriv(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]) /
                             deriv(p.agent, wages[i] - kappa);
        rep.spread = std::max(rep.spread,
                              std::abs(ratio - lambda) / std::max(std::abs(lambda), 1e-300));
    }
    rep.no_interior_states = rep.interior_count == 0;
    return rep;
}

struct OracleResult {
    StateWiseContract contract;
    double value = -std::numeric_limits<double>::infinity();
    double agent_value = 0.0;
    std::uint64_t points_scanned = 0;
    double final_wage_step = 0.0;
    double final_action_step = 0.0;
};

namespace detail {

struct GridAxis {
    double lo = 0.0;
    double step = 0.0;
    int count = 0;

    double at(int j) const { return lo + j * step; }
};

inline GridAxis make_axis(double lo, double hi, double step) {
    GridAxis ax;
    ax.lo = lo;
    ax.step = step;
    ax.count = std::max(1, static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1);
    return ax;
}

// The principal's value is strictly decreasing in every wage (u_P' > 0), so
// for fixed (w_2..w_n, a) the best admissible first-state wage is exact: m
// when the participation constraint is already slack there, otherwise the
// unique wage binding it. A plain product grid filtered for feasibility
// certifies only O(E[u_P'] * step) near the curved binding constraint and
// anchors on lattice points that hug the boundary; completing the first
// coordinate analytically makes the scanned landscape smooth, so the grid
// error is second order. Only monotonicity of the utilities is used.
inline bool complete_first_wage(const ProblemSpec& p, double a, double rest_pc,
                                double w_hi, double& w1) {
    const double uay = eval(p.agent, p.y);
    const double kappa = p.cost(a);
    const double p1 = p.shock.probs[0];
    const auto gap = [&](double w) {
        return rest_pc + p1 * eval(p.agent, w - kappa) - uay;
    };
    if (gap(p.m) >= -1e-12) {
        w1 = p.m;
        return true;
    }
    if (gap(w_hi) < 0.0) return false;  // infeasible even at the top wage
    w1 = bisect(gap, p.m, w_hi, 1e-13).x;
    if (gap(w1) < -1e-12) w1 = std::min(w_hi, w1 + 1e-12);
    return true;
}

// Argmax over the product grid of (w_2..w_n, a) with the first-state wage
// completed per tuple. Partial sums over states 2..n are kept suffix-style
// so advancing the innermost odometer digit costs O(1). Ties keep the first
// (lexicographically smallest) grid point.
inline void scan_grid(const ProblemSpec& p, const GridAxis& a_axis,
                      const std::vector<GridAxis>& w_axes, double w_hi,
                      OracleResult& best) {
    const std::size_t n = p.shock.size();
    std::vector<int> digit(n, 0);      // digit[0] unused
    std::vector<double> wage(n, 0.0);  // wage[0] completed per tuple
    std::vector<double> rest_obj(n + 1, 0.0), rest_pc(n + 1, 0.0);

    for (int ja = 0; ja < a_axis.count; ++ja) {
        const double a = a_axis.at(ja);
        const double kappa = p.cost(a);
        std::fill(digit.begin(), digit.end(), 0);
        for (std::size_t i = 1; i < n; ++i) wage[i] = w_axes[i].at(0);
        std::size_t dirty = 1;  // recompute partial sums from this state on
        while (true) {
            for (std::size_t i = dirty; i < n; ++i) {
                const double pi = p.shock.probs[i];
                rest_obj[i + 1] =
                    rest_obj[i] +
                    pi * eval(p.principal, p.output(a, p.shock.atoms[i]) - wage[i]);
                rest_pc[i + 1] = rest_pc[i] + pi * eval(p.agent, wage[i] - kappa);
            }
            ++best.points_scanned;
            double w1 = 0.0;
            if (complete_first_wage(p, a, rest_pc[n], w_hi, w1)) {
                const double value =
                    rest_obj[n] + p.shock.probs[0] *
                                      eval(p.principal, p.output(a, p.shock.atoms[0]) - w1);
                if (value > best.value) {
                    best.value = value;
                    wage[0] = w1;
                    best.contract.wages = wage;
                    best.contract.a = a;
                    best.agent_value =
                        rest_pc[n] + p.shock.probs[0] * eval(p.agent, w1 - kappa);
                }
            }
            // odometer over states 2..n, innermost last
            bool advanced = false;
            std::size_t k = n;
            while (k > 1) {
                --k;
                if (++digit[k] < w_axes[k].count) {
                    wage[k] = w_axes[k].at(digit[k]);
                    advanced = true;
                    break;
                }
                digit[k] = 0;
                wage[k] = w_axes[k].at(0);
            }
            if (!advanced) break;
            dirty = k;
        }
    }
}

inline std::uint64_t grid_points(const GridAxis& a_axis, const std::vector<GridAxis>& w) {
    std::uint64_t total = a_axis.count;
    for (std::size_t i = 1; i < w.size(); ++i) {
        total *= static_cast<std::uint64_t>(w[i].count);
        if (total > (1ull << 62)) return total;
    }
    return total;
}

}  // namespace detail

// Exhaustive grid search over (w_1..w_n, a), feasibility-filtered, with
// refine_rounds rounds of 10x local grid refinement around the coarse
// argmax (two by default; optima sitting on the participation boundary
// round to the grid at first order, so certifying 1e-4 can need four).
// Requires at most 5 shock atoms and a bounded wage box: M when present,
// otherwise the cap m + 20*(y - m + 1), which must not bind at the result.
inline OracleResult brute_force_oracle(const ProblemSpec& p, double wage_step,
                                       double action_step, int refine_rounds = 2) {
    p.validate();
    if (p.shock.size() > 5)
        throw std::invalid_argument("brute_force_oracle: at most 5 shock atoms");
    if (!(wage_step > 0.0) || !(action_step > 0.0))
        throw std::invalid_argument("brute_force_oracle: steps must be positive");
    if (refine_rounds < 0 || refine_rounds > 6)
        throw std::invalid_argument("brute_force_oracle: refine_rounds must be in [0, 6]");
    if (p.M && *p.M < p.y)
        throw InfeasibleError("brute_force_oracle: participation constraint unreachable (M < y)");

    const std::size_t n = p.shock.size();
    const bool capped = !p.M.has_value();
    const double w_hi = p.M ? *p.M : p.m + 20.0 * (p.y - p.m + 1.0);
    // any feasible action satisfies kappa(a) <= w_hi - y
    const double a_hi = std::sqrt(2.0 * std::max(0.0, w_hi - p.y) / p.K) + action_step;

    auto a_axis = detail::make_axis(0.0, a_hi, action_step);
    std::vector<detail::GridAxis> w_axes(n, detail::make_axis(p.m, w_hi, wage_step));
    if (detail::grid_points(a_axis, w_axes) > 100'000'000ull)
        throw std::invalid_argument("brute_force_oracle: grid too large (> 1e8 points)");

    OracleResult best;
    detail::scan_grid(p, a_axis, w_axes, w_hi, best);
    if (!std::isfinite(best.value))
        throw InfeasibleError("brute_force_oracle: no feasible grid point");

    // Shrinking local refinement with recentering: optima pinned to the
    // participation boundary drift sideways along it, so each scale rescans
    // around the running argmax until it sits strictly inside the scan box.
    double ws = wage_step, as = action_step;
    for (int round = 0; round < refine_rounds; ++round) {
        const double ws_new = ws / 10.0;
        const double as_new = as / 10.0;
        for (int attempt = 0; attempt < 60; ++attempt) {
            a_axis = detail::make_axis(std::max(0.0, best.contract.a - as),
                                       std::min(a_hi, best.contract.a + as), as_new);
            for (std::size_t i = 0; i < n; ++i)
                w_axes[i] = detail::make_axis(std::max(p.m, best.contract.wages[i] - ws),
                                              std::min(w_hi, best.contract.wages[i] + ws),
                                              ws_new);
            if (detail::grid_points(a_axis, w_axes) > 100'000'000ull)
                throw std::invalid_argument("brute_force_oracle: refinement grid too large");
            detail::scan_grid(p, a_axis, w_axes, w_hi, best);

            const auto on_scan_edge = [](double v, const detail::GridAxis& ax,
                                         double global_lo, double global_hi) {
                const double axis_hi = ax.at(ax.count - 1);
                const bool at_lo = v <= ax.lo + 0.5 * ax.step && ax.lo > global_lo + 1e-15;
                const bool at_hi =
                    v >= axis_hi - 0.5 * ax.step && axis_hi < global_hi - 1e-15;
                return at_lo || at_hi;
            };
            bool edge = on_scan_edge(best.contract.a, a_axis, 0.0, a_hi);
            for (std::size_t i = 1; i < n && !edge; ++i)  // state 0 is completed
                edge = on_scan_edge(best.contract.wages[i], w_axes[i], p.m, w_hi);
            if (!edge) break;
        }
        ws = ws_new;
        as = as_new;
    }
    best.final_wage_step = ws;
    best.final_action_step = as;

    if (capped) {
        for (double wi : best.contract.wages)
            if (wi >= w_hi - 2.0 * ws)
                throw SolverError("brute_force_oracle: wage cap binding, result unreliable");
    }
    return best;
}

}  // namespace verification
}  // namespace pact
