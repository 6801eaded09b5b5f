#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pact/errors.hpp"
#include "pact/rootfind.hpp"
#include "pact/shock.hpp"
#include "pact/utility.hpp"

namespace pact {

// Full problem instance. The production process is X^a = x0 + a + B with
// effort cost kappa(a) = K a^2 / 2; the agent must be left at least as well
// off as the reservation value y, and every wage realization must lie in
// [m, M] (M absent means no upper bound).
struct ProblemSpec {
    double x0 = 0.0;
    double K = 1.0;
    double y = 0.0;
    double m = 0.0;
    std::optional<double> M;
    UtilitySpec principal;
    UtilitySpec agent;
    ShockGrid shock;

    double cost(double a) const { return 0.5 * K * a * a; }
    double cost_deriv(double a) const { return K * a; }
    double output(double a, double b) const { return x0 + a + b; }
    bool two_sided() const { return M.has_value(); }

    // Structural validation. Reachability of the participation constraint
    // under an upper bound (y <= M) is a solver concern, reported as
    // InfeasibleError rather than rejected here.
    void validate() const {
        shock.validate();
        if (!(K > 0.0)) throw std::invalid_argument("K > 0 required");
        if (!(y >= 0.0)) throw std::invalid_argument("y >= 0 required");
        if (!(m <= y)) throw std::invalid_argument("m <= y required");
        if (M && !(m < *M)) throw std::invalid_argument("m < M required");
        if (principal.kind == UtilityKind::cara && !(principal.gamma > 0.0))
            throw std::invalid_argument("principal: cara gamma > 0 required");
        if (agent.kind == UtilityKind::cara && !(agent.gamma > 0.0))
            throw std::invalid_argument("agent: cara gamma > 0 required");
    }
};

// A contract is either the clamped-linear family w(x) = clamp(rho*x + beta)
// or an explicit wage per shock state; both carry the action a >= 0.
struct ParametricContract {
    double rho = 0.0;
    double beta = 0.0;
    double a = 0.0;
};

struct StateWiseContract {
    std::vector<double> wages;
    double a = 0.0;
};

using Contract = std::variant<ParametricContract, StateWiseContract>;

inline double action(const Contract& c) {
    return std::visit([](const auto& v) { return v.a; }, c);
}

inline double clamp_wage(double w, double m, const std::optional<double>& M) {
    if (w < m) return m;
    if (M && w > *M) return *M;
    return w;
}

inline std::vector<double> realized_wages(const ProblemSpec& p, const Contract& c) {
    const std::size_t n = p.shock.size();
    std::vector<double> w(n);
    if (const auto* par = std::get_if<ParametricContract>(&c)) {
        for (std::size_t i = 0; i < n; ++i)
            w[i] = clamp_wage(par->rho * p.output(par->a, p.shock.atoms[i]) + par->beta,
                              p.m, p.M);
    } else {
        const auto& sw = std::get<StateWiseContract>(c);
        if (sw.wages.size() != n)
            throw std::invalid_argument("contract: wage vector does not match shock grid");
        w = sw.wages;
    }
    return w;
}

// KKT multipliers: lambda for the participation constraint, z/y per state
// for the lower/upper wage bounds (y empty or all-zero when M is absent).
struct Multipliers {
    double lambda = 0.0;
    std::vector<double> z;
    std::vector<double> y;

    double mean_z(const ShockGrid& g) const {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += g.probs[i] * z[i];
        return s;
    }
    double mean_y(const ShockGrid& g) const {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += g.probs[i] * y[i];
        return s;
    }
};

// Residuals of the four necessary optimality conditions plus the Borch
// flatness statistic; filled by the solver internally and, independently,
// by verification::kkt_verify.
struct KKTReport {
    double r_stationarity_a = 0.0;
    double r_stationarity_w = 0.0;
    double r_pc_slack = 0.0;
    double r_bound_slack = 0.0;
    double lambda = 0.0;
    double borch_spread = 0.0;
    bool action_bound_ok = true;
    bool pc_binding = false;

    double max_residual() const {
        return std::max(std::max(r_stationarity_a, r_stationarity_w),
                        std::max(r_pc_slack, r_bound_slack));
    }
};

inline double principal_value(const ProblemSpec& p, std::span<const double> wages,
                              double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i)
        s += p.shock.probs[i] * eval(p.principal, p.output(a, p.shock.atoms[i]) - wages[i]);
    return s;
}

inline double agent_value(const ProblemSpec& p, std::span<const double> wages, double a) {
    const double k = p.cost(a);
    double s = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i)
        s += p.shock.probs[i] * eval(p.agent, wages[i] - k);
    return s;
}

inline double principal_value(const ProblemSpec& p, const Contract& c) {
    return principal_value(p, realized_wages(p, c), action(c));
}

inline double agent_value(const ProblemSpec& p, const Contract& c) {
    return agent_value(p, realized_wages(p, c), action(c));
}

struct FeasibilityReport {
    bool feasible = false;
    bool pc_ok = false;
    bool bounds_ok = false;
    double pc_gap = 0.0;          // agent_value - u_A(y); negative means violated
    int worst_state = -1;         // worst bound offender, -1 if none
    double worst_violation = 0.0; // magnitude of the worst bound violation
};

inline FeasibilityReport is_feasible(const ProblemSpec& p, const Contract& c, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("is_feasible: tol > 0 required");
    const auto wages = realized_wages(p, c);
    FeasibilityReport r;
    r.bounds_ok = true;
    for (std::size_t i = 0; i < wages.size(); ++i) {
        double v = 0.0;
        if (wages[i] < p.m - tol) v = p.m - wages[i];
        if (p.M && wages[i] > *p.M + tol) v = std::max(v, wages[i] - *p.M);
        if (v > r.worst_violation) {
            r.worst_violation = v;
            r.worst_state = static_cast<int>(i);
        }
        if (v > 0.0) r.bounds_ok = false;
    }
    r.pc_gap = agent_value(p, wages, action(c)) - eval(p.agent, p.y);
    r.pc_ok = r.pc_gap >= -tol;
    r.feasible = r.pc_ok && r.bounds_ok;
    return r;
}

namespace detail {

// Search box for the action: coercivity makes the optimum interior for any
// sufficiently large cap, chosen generously from the instance scale.
inline double action_cap(const ProblemSpec& p) {
    return std::max(10.0 / p.K,
                    10.0 + 2.0 * (p.y + std::abs(p.x0) + p.shock.max_abs_atom()));
}

// Agent value of the unclamped linear wage rho*X + beta (bounds ignored).
inline double agent_value_unclamped(const ProblemSpec& p, double rho, double beta,
                                    double a) {
    const double k = p.cost(a);
    double s = 0.0;
    for (std::size_t i = 0; i < p.shock.size(); ++i)
        s += p.shock.probs[i] *
             eval(p.agent, rho * p.output(a, p.shock.atoms[i]) + beta - k);
    return s;
}

}  // namespace detail

// Risk-sharing benchmark (wage bounds ignored). CARA/CARA: a* = 1/K, slope
// rho = gamma_P/(gamma_P+gamma_A), intercept from binding the participation
// constraint. Risk-neutral principal: a* = 1/K, constant wage y + kappa(a*).
inline ParametricContract rs_solve(const ProblemSpec& p) {
    p.validate();
    const double a_star = 1.0 / p.K;
    if (p.principal.kind == UtilityKind::risk_neutral)
        return {0.0, p.y + p.cost(a_star), a_star};
    if (!(p.principal.is_cara() && p.agent.is_cara()))
        throw std::invalid_argument(
            "rs_solve: supported pairs are CARA/CARA or risk-neutral principal");

    const double gp = p.principal.gamma;
    const double ga = p.agent.gamma;
    const double rho = gp / (gp + ga);
    const double target = eval(p.agent, p.y);
    const auto pc_gap = [&](double beta) {
        return detail::agent_value_unclamped(p, rho, beta, a_star) - target;
    };

    const double center = p.y + p.cost(a_star) - rho * (p.x0 + a_star);
    double lo = center - 50.0 / ga;
    double hi = center + 50.0 / ga;
    double width = hi - lo;
    for (int k = 0; k < 60 && pc_gap(lo) > 0.0; ++k) lo -= (width *= 2.0);
    width = hi - lo;
    for (int k = 0; k < 60 && pc_gap(hi) < 0.0; ++k) hi += (width *= 2.0);
    const auto root = bisect(pc_gap, lo, hi, 1e-12);
    if (!root.converged)
        throw SolverError("rs_solve: participation-constraint root did not converge");
    return {rho, root.x, a_star};
}

}  // namespace pact
