#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pact/model.hpp"

namespace pact {

struct SolverConfig {
    int max_outer_iters = 50;
    double penalty_growth = 10.0;
    double kkt_tol = 1e-8;
    double step_shrink = 0.5;    // Armijo backtracking factor
    double a_max = 0.0;          // <= 0: derived from the instance
    long max_inner_iters = 10000;  // per outer iteration
};

struct GeneralSolution {
    StateWiseContract contract;
    Multipliers multipliers;
    double value = 0.0;
    KKTReport kkt;
    int outer_iters = 0;
    long inner_iters = 0;
    std::string diagnostics;
};

// Gradients of the objective E[U_P(X^a - W)] and of the participation
// functional E[U_A(W - kappa(a))] with respect to the state wages and the
// action.
struct Gradients {
    std::vector<double> objective_w;
    double objective_a = 0.0;
    std::vector<double> pc_w;
    double pc_a = 0.0;
};

inline Gradients gradient(const ProblemSpec& p, std::span<const double> wages, double a) {
    const std::size_t n = p.shock.size();
    if (wages.size() != n)
        throw std::invalid_argument("gradient: wage vector does not match shock grid");
    Gradients g;
    g.objective_w.resize(n);
    g.pc_w.resize(n);
    const double kappa = p.cost(a);
    double sum_up = 0.0, sum_ua = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p.shock.probs[i];
        const double up = deriv(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]);
        const double ua = deriv(p.agent, wages[i] - kappa);
        g.objective_w[i] = -pi * up;
        g.pc_w[i] = pi * ua;
        sum_up += pi * up;
        sum_ua += pi * ua;
    }
    g.objective_a = sum_up;
    g.pc_a = -p.cost_deriv(a) * sum_ua;
    return g;
}

// Multiplier extraction from stationarity: lambda from the action condition,
// then the per-state defect r_i = u_P'(X_i - w_i) - lambda u_A'(w_i - kappa)
// split into Z_i = max(r_i, 0) and Y_i = max(-r_i, 0) (Y forced to zero for
// one-sided problems).
inline Multipliers extract_multipliers(const ProblemSpec& p, std::span<const double> wages,
                                       double a) {
    const std::size_t n = p.shock.size();
    const double kappa = p.cost(a);
    double e_up = 0.0, e_ua = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e_up += p.shock.probs[i] * deriv(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]);
        e_ua += p.shock.probs[i] * deriv(p.agent, wages[i] - kappa);
    }
    Multipliers mult;
    const double denom = p.cost_deriv(a) * e_ua;
    mult.lambda = denom > 1e-300 ? e_up / denom : 0.0;
    mult.z.resize(n);
    mult.y.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = deriv(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]) -
                         mult.lambda * deriv(p.agent, wages[i] - kappa);
        mult.z[i] = std::max(r, 0.0);
        if (p.M) mult.y[i] = std::max(-r, 0.0);
    }
    return mult;
}

namespace detail {

// Residuals of the four necessary conditions, computed by the solver for its
// own convergence test. verification::kkt_verify re-implements this audit
// independently.
inline KKTReport solver_kkt_report(const ProblemSpec& p, std::span<const double> w,
                                   double a, const Multipliers& mult, double tol) {
    const std::size_t n = p.shock.size();
    const double kappa = p.cost(a);
    const double kp = p.cost_deriv(a);
    KKTReport rep;
    rep.lambda = mult.lambda;

    double e_up = 0.0, e_ua = 0.0, e_val = 0.0;
    double slack_lo = 0.0, slack_hi = 0.0;
    double ratio_dev = 0.0;
    bool any_interior = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p.shock.probs[i];
        const double up = deriv(p.principal, p.output(a, p.shock.atoms[i]) - w[i]);
        const double ua = deriv(p.agent, w[i] - kappa);
        e_up += pi * up;
        e_ua += pi * ua;
        e_val += pi * eval(p.agent, w[i] - kappa);
        const double r = up - mult.lambda * ua - mult.z[i] + (p.M ? mult.y[i] : 0.0);
        rep.r_stationarity_w = std::max(rep.r_stationarity_w, std::abs(r));
        slack_lo += pi * mult.z[i] * (w[i] - p.m);
        if (p.M) slack_hi += pi * mult.y[i] * (*p.M - w[i]);
        const double dist = p.M ? std::min(w[i] - p.m, *p.M - w[i]) : w[i] - p.m;
        if (dist > 10.0 * tol) {
            any_interior = true;
            ratio_dev = std::max(ratio_dev, std::abs(up / ua - mult.lambda));
        }
    }
    rep.r_stationarity_a = std::abs(e_up - mult.lambda * kp * e_ua);
    const double pc_gap = e_val - eval(p.agent, p.y);
    rep.r_pc_slack = std::abs(mult.lambda * pc_gap);
    rep.r_bound_slack = std::abs(slack_lo) + std::abs(slack_hi);
    rep.borch_spread =
        any_interior ? ratio_dev / std::max(std::abs(mult.lambda), 1e-300) : 0.0;
    rep.pc_binding = std::abs(pc_gap) <= 10.0 * tol;
    if (!p.M) {
        rep.action_bound_ok = kp >= 1.0 - 10.0 * tol;
    } else {
        const double d1 = kp - 1.0;
        const double d2 = mult.mean_z(p.shock) - mult.mean_y(p.shock);
        rep.action_bound_ok =
            d1 * d2 >= 0.0 || std::abs(d1) <= 1e-6 || std::abs(d2) <= 1e-6;
    }
    return rep;
}

// State wage solving the Borch condition u_P'(X - w) = lambda u_A'(w - kappa)
// clamped to the wage box. The left side is nondecreasing and the right side
// nonincreasing in w, so the interior root is unique when one exists.
inline double borch_wage(const ProblemSpec& p, double x, double kappa, double lambda) {
    const auto defect = [&](double w) {
        return deriv(p.principal, x - w) - lambda * deriv(p.agent, w - kappa);
    };
    if (defect(p.m) >= 0.0) return p.m;
    if (p.M) {
        if (defect(*p.M) <= 0.0) return *p.M;
        return bisect(defect, p.m, *p.M, 1e-14).x;
    }
    double hi = p.m + 1.0, width = 1.0;
    for (int k = 0; k < 200 && defect(hi) < 0.0; ++k) hi += (width *= 2.0);
    return bisect(defect, p.m, hi, 1e-14).x;
}

// Refinement of an augmented-Lagrangian iterate by solving the optimality
// system itself: for each candidate action, lambda is bound to the
// participation constraint (monotone bisection over the clamped Borch
// wages), and the action zeroes the stationarity condition. Projected
// ascent alone stalls near 1e-7 residuals because line-search improvements
// fall below the floating-point resolution of the objective.
inline bool kkt_polish(const ProblemSpec& p, std::vector<double>& w, double& a,
                       double& lambda) {
    const std::size_t n = p.shock.size();
    if (p.principal.kind == UtilityKind::risk_neutral &&
        p.agent.kind == UtilityKind::risk_neutral) {
        // flat Borch condition but a closed-form optimum: the participation
        // constraint reduces to E[W] >= y + kappa(a), so the minimal-E[w^2]
        // solution is the constant wage y + kappa at the surplus-maximizing
        // action, reined in by the upper bound when kappa(1/K) > M - y
        double act = 1.0 / p.K;
        if (p.M) act = std::min(act, std::sqrt(2.0 * std::max(0.0, *p.M - p.y) / p.K));
        if (act <= 0.0) return false;
        w.assign(n, p.y + p.cost(act));
        a = act;
        lambda = 1.0 / p.cost_deriv(act);
        return true;
    }
    const double uay = eval(p.agent, p.y);

    const auto wages_at = [&](double lam, double act, std::vector<double>& out) {
        const double kappa = p.cost(act);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = borch_wage(p, p.output(act, p.shock.atoms[i]), kappa, lam);
    };

    std::vector<double> wtmp(n);
    const auto bind_lambda = [&](double act, double seed) -> double {
        const auto gap = [&](double lam) {
            wages_at(lam, act, wtmp);
            return agent_value(p, wtmp, act) - uay;
        };
        double lo = std::max(seed, 1e-12), hi = lo;
        int k = 0;
        for (k = 0; k < 400 && gap(lo) > 0.0; ++k) lo *= 0.5;
        if (k >= 400) return -1.0;
        for (k = 0; k < 400 && gap(hi) < 0.0; ++k) hi *= 2.0;
        if (k >= 400) return -1.0;
        return bisect(gap, lo, hi, 1e-14).x;
    };

    // Actions past the two-sided feasibility edge (kappa(a) > M - y, lambda
    // bracket collapses) count as descending so the bracket walks back in.
    double lam_seed = lambda > 0.0 ? lambda : 1.0;
    const auto stationarity = [&](double act) -> double {
        const double lam = bind_lambda(act, lam_seed);
        if (lam <= 0.0) return -std::numeric_limits<double>::max();
        lam_seed = lam;
        wages_at(lam, act, wtmp);
        const double kappa = p.cost(act);
        double e_up = 0.0, e_ua = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            e_up += p.shock.probs[i] *
                    deriv(p.principal, p.output(act, p.shock.atoms[i]) - wtmp[i]);
            e_ua += p.shock.probs[i] * deriv(p.agent, wtmp[i] - kappa);
        }
        return e_up - lam * p.cost_deriv(act) * e_ua;
    };

    // bracket the stationarity root around the incoming action
    double lo = std::max(0.0, a - 0.1 * (1.0 + a));
    double hi = a + 0.1 * (1.0 + a);
    double s_lo = stationarity(lo);
    double s_hi = stationarity(hi);
    for (int k = 0; k < 60 && (s_lo < 0.0) == (s_hi < 0.0); ++k) {
        if (s_lo < 0.0) {
            if (lo == 0.0) return false;
            lo = std::max(0.0, lo - 0.5 * (hi - lo));
            s_lo = stationarity(lo);
        } else {
            hi += 0.5 * (hi - lo);
            s_hi = stationarity(hi);
        }
    }
    if ((s_lo < 0.0) == (s_hi < 0.0)) return false;
    const double a_new = bisect(stationarity, lo, hi, 1e-14).x;
    const double lam_new = bind_lambda(a_new, lam_seed);
    if (lam_new <= 0.0) return false;
    wages_at(lam_new, a_new, wtmp);
    w = wtmp;
    a = a_new;
    lambda = lam_new;
    return true;
}

}  // namespace detail

// Maximizes E[U_P(X^a - W)] over state wages in [m, M] and the action,
// subject to E[U_A(W - kappa(a))] >= U_A(y), by an augmented-Lagrangian
// outer loop on the participation constraint with diagonally scaled,
// box-projected gradient ascent (Armijo backtracking) on (w, a) inside.
// Converged when the four KKT residuals are below cfg.kkt_tol.
inline GeneralSolution general_ll_solve(const ProblemSpec& p, SolverConfig cfg = {}) {
    p.validate();
    if (!(cfg.kkt_tol > 0.0)) throw std::invalid_argument("kkt_tol > 0 required");
    if (p.M && *p.M < p.y)
        throw InfeasibleError("general_ll_solve: participation constraint unreachable (M < y)");

    const std::size_t n = p.shock.size();
    const double a_hi = cfg.a_max > 0.0 ? cfg.a_max : detail::action_cap(p);
    const double w_hi = p.M ? *p.M : std::numeric_limits<double>::infinity();
    const double uay = eval(p.agent, p.y);
    const double prox = 1e-10;  // tie-break toward minimal E[w^2] on flat optima
    const double dir_cap = 1e6;

    // feasible anchor
    std::vector<double> w(n, p.y);
    double a = 0.0;
    double mu = 0.0;
    double c = 10.0;

    const auto pc_gap_at = [&](const std::vector<double>& wv, double av) {
        return agent_value(p, wv, av) - uay;
    };
    const auto phi_at = [&](const std::vector<double>& wv, double av, double gap) {
        double f = principal_value(p, wv, av);
        double pr = 0.0;
        for (std::size_t i = 0; i < n; ++i) pr += p.shock.probs[i] * wv[i] * wv[i];
        f -= 0.5 * prox * pr;
        if (gap < mu / c)
            f += mu * gap - 0.5 * c * gap * gap;
        else
            f += 0.5 * mu * mu / c;
        return f;
    };

    std::vector<double> grad_w(n), dir_w(n), trial_w(n);
    double inner_tol = 1e-3;
    double prev_gap = std::numeric_limits<double>::infinity();
    double prev_res = std::numeric_limits<double>::infinity();
    long total_inner = 0;
    Multipliers mult;
    KKTReport rep;
    bool converged = false;
    int outer = 0;
    std::string note;

    for (; outer < cfg.max_outer_iters && !converged; ++outer) {
        double step = 1.0;
        for (long it = 0; it < cfg.max_inner_iters; ++it) {
            const double gap = pc_gap_at(w, a);
            const double lam_eff = std::max(0.0, mu - c * gap);
            const bool pen_active = gap < mu / c;
            const double kappa = p.cost(a);
            const double kp = p.cost_deriv(a);

            double sum_up = 0.0, sum_upp = 0.0, sum_ua = 0.0, sum_uaa = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double pi = p.shock.probs[i];
                const double xi = p.output(a, p.shock.atoms[i]);
                const double up = deriv(p.principal, xi - w[i]);
                const double upp = deriv2(p.principal, xi - w[i]);
                const double ua = deriv(p.agent, w[i] - kappa);
                const double uaa = deriv2(p.agent, w[i] - kappa);
                grad_w[i] = pi * (-up + lam_eff * ua - prox * w[i]);
                double h = pi * (-upp) + lam_eff * pi * (-uaa) + prox * pi;
                if (pen_active) h += c * pi * ua * pi * ua;
                h = std::max(h, std::max(1e-12 * pi, 1e-300));
                dir_w[i] = std::clamp(grad_w[i] / h, -dir_cap, dir_cap);
                sum_up += pi * up;
                sum_upp += pi * upp;
                sum_ua += pi * ua;
                sum_uaa += pi * uaa;
            }
            const double grad_a = sum_up - lam_eff * kp * sum_ua;
            double h_a = std::abs(sum_upp) + lam_eff * (p.K * sum_ua + kp * kp * (-sum_uaa));
            if (pen_active) h_a += c * kp * sum_ua * kp * sum_ua;
            h_a = std::max(h_a, 1e-12);
            const double dir_a = std::clamp(grad_a / h_a, -dir_cap, dir_cap);

            // scaled projected-gradient stationarity measure at unit step
            double crit = std::abs(std::clamp(a + dir_a, 0.0, a_hi) - a);
            for (std::size_t i = 0; i < n; ++i)
                crit = std::max(crit,
                                std::abs(std::clamp(w[i] + dir_w[i], p.m, w_hi) - w[i]));
            if (crit <= inner_tol) break;

            const double phi0 = phi_at(w, a, gap);
            bool accepted = false;
            for (int ls = 0; ls < 80; ++ls) {
                double slope = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    trial_w[i] = std::clamp(w[i] + step * dir_w[i], p.m, w_hi);
                    slope += grad_w[i] * (trial_w[i] - w[i]);
                }
                const double trial_a = std::clamp(a + step * dir_a, 0.0, a_hi);
                slope += grad_a * (trial_a - a);
                if (slope <= 0.0) break;
                const double phi1 = phi_at(trial_w, trial_a, pc_gap_at(trial_w, trial_a));
                if (phi1 >= phi0 + 1e-4 * slope) {
                    w.swap(trial_w);
                    a = trial_a;
                    accepted = true;
                    break;
                }
                step *= cfg.step_shrink;
            }
            ++total_inner;
            if (!accepted) break;  // stationary to floating-point resolution
            step = std::min(step * 1.5, 1e4);
        }

        const double gap = pc_gap_at(w, a);
        mu = std::max(0.0, mu - c * gap);
        mult = extract_multipliers(p, w, a);
        rep = detail::solver_kkt_report(p, w, a, mult, cfg.kkt_tol);
        if (std::getenv("PACT_TRACE"))
            std::fprintf(stderr,
                         "outer %d: gap=%.3e mu=%.6g c=%.3g inner=%ld a=%.8f "
                         "r=[%.2e %.2e %.2e %.2e]\n",
                         outer, gap, mu, c, total_inner, a, rep.r_stationarity_a,
                         rep.r_stationarity_w, rep.r_pc_slack, rep.r_bound_slack);
        if (rep.max_residual() <= cfg.kkt_tol && gap >= -cfg.kkt_tol) {
            converged = true;
            break;
        }
        // residuals below 1e-5 that stop shrinking are a line-search
        // floating-point floor, not divergence; hand over to the polish
        if (rep.max_residual() < 1e-5 && rep.max_residual() >= 0.5 * prev_res) break;
        prev_res = rep.max_residual();
        if (std::abs(gap) > 0.25 * prev_gap && std::abs(gap) > 0.01 * cfg.kkt_tol)
            c = std::min(c * cfg.penalty_growth, 1e10);
        prev_gap = std::abs(gap);
        inner_tol = std::max(inner_tol * 0.2, std::min(1e-10, cfg.kkt_tol * 1e-2));
    }

    if (!converged) {
        double lam = mult.lambda;
        if (detail::kkt_polish(p, w, a, lam)) {
            mult = extract_multipliers(p, w, a);
            rep = detail::solver_kkt_report(p, w, a, mult, cfg.kkt_tol);
            const double gap = pc_gap_at(w, a);
            if (rep.max_residual() <= cfg.kkt_tol && gap >= -cfg.kkt_tol) {
                converged = true;
                note = "kkt polish applied";
            } else if (gap >= -cfg.kkt_tol) {
                // ill-scaled instances (lambda ~ 1e10+) cannot meet an
                // absolute tolerance in double precision; accept residuals
                // small relative to the stationarity scale E[u_P']
                double e_up = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    e_up += p.shock.probs[i] *
                            deriv(p.principal, p.output(a, p.shock.atoms[i]) - w[i]);
                if (rep.max_residual() <= cfg.kkt_tol * std::max(1.0, e_up)) {
                    converged = true;
                    note = "kkt polish applied (scale-relative tolerance)";
                }
            }
        }
    }

    if (!converged)
        throw MaxIterationsError(
            "general_ll_solve: not converged after " + std::to_string(cfg.max_outer_iters) +
            " outer iterations (residuals: a=" + std::to_string(rep.r_stationarity_a) +
            " w=" + std::to_string(rep.r_stationarity_w) +
            " pc=" + std::to_string(rep.r_pc_slack) +
            " bounds=" + std::to_string(rep.r_bound_slack) + ")");

    GeneralSolution sol;
    sol.contract = {w, a};
    sol.multipliers = mult;
    sol.value = principal_value(p, w, a);
    sol.kkt = rep;
    sol.outer_iters = outer + 1;
    sol.inner_iters = total_inner;
    sol.diagnostics = note;
    return sol;
}

}  // namespace pact
