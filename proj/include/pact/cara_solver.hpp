#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pact/model.hpp"

namespace pact {

// Solution of the limited-liability problem in the CARA/CARA case. The wage
// is the clamped-linear family w(x) = clamp(rho*x + beta, m, M) with slope
// rho = gamma_P/(gamma_P+gamma_A); beta is reported in the realized-output
// coordinate (the figure convention). lambda is recovered from the intercept
// relation and is strictly positive at any returned solution.
struct CaraSolution {
    ParametricContract contract;
    double lambda = 0.0;
    double value = 0.0;
    double pc_residual = 0.0;
    bool feasible = false;
    double m = 0.0;
    std::optional<double> M;
    std::string diagnostics;
};

// State-wise solution of the epsilon-perturbed one-sided problem.
struct PerturbedSolution {
    StateWiseContract contract;
    double lambda = 0.0;
    std::vector<double> z;
    double value = 0.0;            // unperturbed objective at (W_eps, a_eps)
    double perturbed_value = 0.0;  // value - eps * E[exp(gamma_P W)]
    double pc_residual = 0.0;
    double epsilon = 0.0;
};

namespace detail {

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// Intercept binding the participation constraint for the clamped family at
// action a, or nullopt when no intercept can reach it (upper bound too low).
inline std::optional<double> cara_bind_beta(const ProblemSpec& p, double rho, double a) {
    const double target = eval(p.agent, p.y);
    const auto pc_gap = [&](double beta) {
        ParametricContract c{rho, beta, a};
        return agent_value(p, Contract{c}) - target;
    };

    const double x_min = p.output(a, p.shock.atoms.front());
    const double x_max = p.output(a, p.shock.atoms.back());
    double lo = p.m - rho * x_max - 1.0;  // every state pinned at m
    if (pc_gap(lo) > 0.0) return lo;      // m = y, a = 0 edge: already binding
    double hi;
    if (p.M) {
        hi = *p.M - rho * x_min + 1.0;  // every state pinned at M
        if (pc_gap(hi) < 0.0) return std::nullopt;
    } else {
        hi = p.y + p.cost(a) - rho * (p.x0 + a + p.shock.mean()) + 50.0 / p.agent.gamma;
        double width = std::max(1.0, hi - lo);
        int k = 0;
        for (; k < 70 && pc_gap(hi) < 0.0; ++k) hi += (width *= 2.0);
        if (k >= 70)
            throw SolverError("cara_ll_solve: participation bracket failed (non-binding)");
    }
    return bisect(pc_gap, lo, hi, 1e-12).x;
}

// d/da of the principal's value along the binding-participation path
// a -> (a, beta(a)). With dw/da = 0 on clamped states and rho + beta'(a) on
// interior ones, differentiating the binding constraint gives
//   rho + beta'(a) = kappa'(a) E[u_A'] / E_int[u_A'],
//   V'(a) = E[u_P'] - kappa'(a) (E[u_A'] / E_int[u_A']) E_int[u_P'].
// Value-based search alone stops at the sqrt(eps) noise floor; this zeroes
// the actual stationarity condition.
inline double family_value_deriv(const ProblemSpec& p, double rho, double a, double beta) {
    const double kappa = p.cost(a);
    double e_up = 0.0, e_ua = 0.0, e_up_int = 0.0, e_ua_int = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i) {
        const double pi = p.shock.probs[i];
        const double x = p.output(a, p.shock.atoms[i]);
        const double raw = rho * x + beta;
        const double w = clamp_wage(raw, p.m, p.M);
        const double up = deriv(p.principal, x - w);
        const double ua = deriv(p.agent, w - kappa);
        e_up += pi * up;
        e_ua += pi * ua;
        if (raw > p.m && (!p.M || raw < *p.M)) {
            e_up_int += pi * up;
            e_ua_int += pi * ua;
        }
    }
    if (e_ua_int <= 0.0) return e_up;  // fully pinned: wage cannot follow a
    return e_up - p.cost_deriv(a) * (e_ua / e_ua_int) * e_up_int;
}

}  // namespace detail

// Optimal one- or two-sided limited-liability contract for a CARA principal
// and agent. For each candidate action the intercept binds the participation
// constraint (bisection, monotone in beta); the principal's value along the
// family is maximized by a dense grid over [0, a_max], golden-section
// refinement on the best bracket, and a stationarity polish on the action.
inline CaraSolution cara_ll_solve(const ProblemSpec& p) {
    p.validate();
    if (!(p.principal.is_cara() && p.agent.is_cara()))
        throw std::invalid_argument("cara_ll_solve: both utilities must be CARA");
    if (p.M && *p.M < p.y)
        throw InfeasibleError("cara_ll_solve: participation constraint unreachable (M < y)");

    const double gp = p.principal.gamma;
    const double ga = p.agent.gamma;
    const double rho = gp / (gp + ga);
    const double a_max = detail::action_cap(p);
    const int grid_n = 400;
    const double step = a_max / grid_n;

    const auto value_at = [&](double a) -> double {
        const auto beta = detail::cara_bind_beta(p, rho, a);
        if (!beta) return -std::numeric_limits<double>::infinity();
        return principal_value(p, Contract{ParametricContract{rho, *beta, a}});
    };

    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= grid_n; ++j) {
        const double v = value_at(j * step);
        if (v > best_v) {
            best_v = v;
            best = j;
        }
    }
    if (best < 0)
        throw InfeasibleError("cara_ll_solve: no feasible action");
    if (best >= grid_n - 1)
        throw SolverError("cara_ll_solve: action cap binding, instance is ill-scaled");

    const double lo = std::max(0.0, (best - 1) * step);
    const double hi = std::min(a_max, (best + 1) * step);
    auto [a_star, v_star] = golden_section_max(value_at, lo, hi, 1e-9);

    // golden section is value-based and noise-limited near the flat top;
    // polish the action against the analytic path derivative when a sign
    // change brackets it. Actions beyond the two-sided feasibility edge
    // (kappa(a) > M - y, no binding intercept) count as descending.
    {
        const auto slope = [&](double a) -> double {
            const auto b = detail::cara_bind_beta(p, rho, a);
            if (!b) return -std::numeric_limits<double>::max();
            return detail::family_value_deriv(p, rho, a, *b);
        };
        double pl = std::max(0.0, a_star - 1e-4);
        double ph = std::min(a_max, a_star + 1e-4);
        double s_lo = slope(pl), s_hi = slope(ph);
        for (int k = 0; k < 40 && (s_lo > 0.0) == (s_hi > 0.0); ++k) {
            if (s_lo <= 0.0) {
                if (pl == 0.0) break;
                pl = std::max(0.0, pl - (ph - pl));
                s_lo = slope(pl);
            } else {
                const double nh = std::min(a_max, ph + (ph - pl));
                if (nh == ph) break;
                ph = nh;
                s_hi = slope(ph);
            }
        }
        if ((s_lo > 0.0) != (s_hi > 0.0)) {
            const double a_ref = bisect(slope, pl, ph, 1e-13).x;
            const double v_ref = value_at(a_ref);
            // relative slack: value noise scales with |V|
            if (v_ref >= v_star - 1e-9 * std::max(1.0, std::abs(v_star))) {
                a_star = a_ref;
                v_star = v_ref;
            }
        }
    }

    CaraSolution sol;
    const auto beta = detail::cara_bind_beta(p, rho, a_star);
    if (!beta) throw SolverError("cara_ll_solve: lost the participation root at optimum");
    sol.contract = {rho, *beta, a_star};
    sol.value = v_star;
    // intercept relation: lambda = (gp/ga) * exp((gp+ga)*beta - ga*kappa(a))
    sol.lambda = (gp / ga) * detail::exp_clamped((gp + ga) * *beta - ga * p.cost(a_star));
    sol.pc_residual = agent_value(p, Contract{sol.contract}) - eval(p.agent, p.y);
    sol.m = p.m;
    sol.M = p.M;
    sol.feasible = is_feasible(p, Contract{sol.contract}, 1e-9).feasible;
    return sol;
}

// Sampled wage profile w(x) = clamp(rho*x + beta, m, M) on [x_lo, x_hi].
inline std::vector<std::pair<double, double>> wage_curve(const CaraSolution& sol,
                                                         double x_lo, double x_hi, int n) {
    if (!(x_lo < x_hi)) throw std::invalid_argument("wage_curve: x_lo < x_hi required");
    if (n < 2) throw std::invalid_argument("wage_curve: n >= 2 required");
    std::vector<std::pair<double, double>> rows(n);
    const double h = (x_hi - x_lo) / (n - 1);
    for (int j = 0; j < n; ++j) {
        const double x = x_lo + j * h;
        rows[j] = {x, clamp_wage(sol.contract.rho * x + sol.contract.beta, sol.m, sol.M)};
    }
    return rows;
}

namespace detail {

struct PerturbedInner {
    std::vector<double> wages;
    std::vector<double> z;
    double pc_gap = 0.0;  // agent value minus u_A(y)
};

//   gp*exp(-gp(X_i - W)) + eps*gp*exp(gp W) - lambda*ga*exp(-ga(W - kappa)) = 0
// has the closed-form root
//   W~_i = [ln(lambda*ga) + ga*kappa - ln(gp) - ln(exp(-gp X_i) + eps)] / (gp+ga);
// the wage is W~ clamped below at m, with z_i the slack of the equation at m.
inline PerturbedInner perturbed_wages(const ProblemSpec& p, double eps, double lambda,
                                      double a) {
    const double gp = p.principal.gamma;
    const double ga = p.agent.gamma;
    const double kappa = p.cost(a);
    const double log_eps = std::log(eps);
    const double c1 = std::log(lambda * ga) + ga * kappa - std::log(gp);

    PerturbedInner out;
    const std::size_t n = p.shock.size();
    out.wages.resize(n);
    out.z.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = p.output(a, p.shock.atoms[i]);
        const double w_free = (c1 - log_add_exp(-gp * x, log_eps)) / (gp + ga);
        if (w_free >= p.m) {
            out.wages[i] = w_free;
        } else {
            out.wages[i] = p.m;
            out.z[i] = gp * exp_clamped(-gp * (x - p.m)) +
                       eps * gp * exp_clamped(gp * p.m) -
                       lambda * ga * exp_clamped(-ga * (p.m - kappa));
        }
    }
    out.pc_gap = agent_value(p, out.wages, a) - eval(p.agent, p.y);
    return out;
}

inline double perturbed_bind_lambda(const ProblemSpec& p, double eps, double a,
                                    double lambda_seed) {
    const auto gap = [&](double lam) { return perturbed_wages(p, eps, lam, a).pc_gap; };
    double lo = std::max(lambda_seed, 1e-8);
    double hi = lo;
    for (int k = 0; k < 600 && gap(lo) > 0.0; ++k) lo *= 0.5;
    for (int k = 0; k < 600 && gap(hi) < 0.0; ++k) hi *= 2.0;
    if (gap(lo) > 0.0 || gap(hi) < 0.0)
        throw SolverError("perturbed_solve: lambda bracket failed");
    return bisect(gap, lo, hi, 1e-12).x;
}

}  // namespace detail

// Solves the perturbed problem max E[U_P(X^a - W)] + eps E[U_P(-W)] over the
// one-sided constraint set, via its KKT system: state wages in closed form
// for fixed (lambda, a), lambda bound to the participation constraint by
// bisection, and the action chosen to zero the stationarity condition
//   gp E[exp(-gp(X^a - W))] = a K lambda ga E[exp(-ga(W - kappa))].
inline PerturbedSolution perturbed_solve(const ProblemSpec& p, double eps,
                                         double lambda_seed = 1.0) {
    p.validate();
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("perturbed_solve: eps must be in (0, 1)");
    if (p.M) throw std::invalid_argument("perturbed_solve: one-sided problems only");
    if (!(p.principal.is_cara() && p.agent.is_cara()))
        throw std::invalid_argument("perturbed_solve: both utilities must be CARA");

    const double gp = p.principal.gamma;
    const double ga = p.agent.gamma;
    const double a_max = detail::action_cap(p);

    double lambda_at_a = std::max(lambda_seed, 1e-8);
    const auto stationarity = [&](double a) {
        lambda_at_a = detail::perturbed_bind_lambda(p, eps, a, lambda_at_a);
        const auto inner = detail::perturbed_wages(p, eps, lambda_at_a, a);
        const double kappa = p.cost(a);
        double e_up = 0.0, e_ua = 0.0;
        for (std::size_t i = 0; i < p.shock.size(); ++i) {
            const double x = p.output(a, p.shock.atoms[i]);
            e_up += p.shock.probs[i] * detail::exp_clamped(-gp * (x - inner.wages[i]));
            e_ua += p.shock.probs[i] * detail::exp_clamped(-ga * (inner.wages[i] - kappa));
        }
        // d/da of the Lagrangian: the agent term carries gamma_A through
        // |U_A'|; dropping it shifts the root by a factor gamma_A.
        return gp * e_up - a * p.K * lambda_at_a * ga * e_ua;
    };

    // s(0) > 0 and coercivity pushes s negative; scan for the sign change.
    const int scan_n = 200;
    double a_lo = 0.0, a_hi = -1.0;
    double s_lo = stationarity(a_lo);
    for (int j = 1; j <= scan_n; ++j) {
        const double a = a_max * j / scan_n;
        const double s = stationarity(a);
        if ((s < 0.0) != (s_lo < 0.0)) {
            a_hi = a;
            break;
        }
        a_lo = a;
        s_lo = s;
    }
    if (a_hi < 0.0) throw SolverError("perturbed_solve: action stationarity not bracketed");
    const double a_star = bisect(stationarity, a_lo, a_hi, 1e-12).x;

    PerturbedSolution sol;
    sol.epsilon = eps;
    sol.lambda = detail::perturbed_bind_lambda(p, eps, a_star, lambda_at_a);
    auto inner = detail::perturbed_wages(p, eps, sol.lambda, a_star);
    sol.contract = {std::move(inner.wages), a_star};
    sol.z = std::move(inner.z);
    sol.pc_residual = inner.pc_gap;
    sol.value = principal_value(p, sol.contract.wages, a_star);
    double e_pen = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i)
        e_pen += p.shock.probs[i] * detail::exp_clamped(gp * sol.contract.wages[i]);
    sol.perturbed_value = sol.value - eps * e_pen;
    return sol;
}

// L2 bound on the perturbed wages, valid for every 0 < eps < 1:
//   E[W_eps^2] <= E[ln((gp e^{-gp(X^0-m)} + gp e^{gp m} + C e^{-ga(m-kappa(a_max))})
//                     / (gp e^{-gp X^{a_max}}))^2] / gp^2
// with C = gp E[e^{-gp(X^0-y)} + e^{gp y}] / (ga e^{-ga y}).
inline double perturbed_wage_bound(const ProblemSpec& p) {
    if (!(p.principal.is_cara() && p.agent.is_cara()))
        throw std::invalid_argument("perturbed_wage_bound: both utilities must be CARA");
    const double gp = p.principal.gamma;
    const double ga = p.agent.gamma;
    const double a_max = detail::action_cap(p);

    double e_c = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i) {
        const double x0i = p.output(0.0, p.shock.atoms[i]);
        e_c += p.shock.probs[i] *
               (detail::exp_clamped(-gp * (x0i - p.y)) + detail::exp_clamped(gp * p.y));
    }
    const double c_lam = gp * e_c / (ga * std::exp(-ga * p.y));

    double acc = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i) {
        const double x0i = p.output(0.0, p.shock.atoms[i]);
        const double num = gp * detail::exp_clamped(-gp * (x0i - p.m)) +
                           gp * detail::exp_clamped(gp * p.m) +
                           c_lam * detail::exp_clamped(-ga * (p.m - p.cost(a_max)));
        const double t = std::log(num) - std::log(gp) + gp * p.output(a_max, p.shock.atoms[i]);
        acc += p.shock.probs[i] * t * t;
    }
    return acc / (gp * gp);
}

}  // namespace pact
