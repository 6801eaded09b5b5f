#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pact {

// Utility families supported by the solvers. Every family is strictly
// increasing with nonpositive second derivative on the whole real line, and
// the piecewise ones are glued C^2 (extended_arctan is C^3) at their knot.
enum class UtilityKind {
    cara,            // -exp(-gamma x)
    extended_log,    // log(x) above 1, quadratic extension below
    partial_iara,    // -exp(-x) above 0, quadratic extension below
    extended_arctan, // arctan(x) above 1/sqrt(3), quadratic extension below
    risk_neutral,    // x
};

struct UtilitySpec {
    UtilityKind kind = UtilityKind::risk_neutral;
    double gamma = 0.0;  // CARA only

    static UtilitySpec cara(double gamma) {
        if (!(gamma > 0.0))
            throw std::invalid_argument("cara utility requires gamma > 0");
        return {UtilityKind::cara, gamma};
    }
    static UtilitySpec extended_log() { return {UtilityKind::extended_log, 0.0}; }
    static UtilitySpec partial_iara() { return {UtilityKind::partial_iara, 0.0}; }
    static UtilitySpec extended_arctan() { return {UtilityKind::extended_arctan, 0.0}; }
    static UtilitySpec risk_neutral() { return {UtilityKind::risk_neutral, 0.0}; }

    bool is_cara() const { return kind == UtilityKind::cara; }
};

inline const char* kind_name(UtilityKind k) {
    switch (k) {
    case UtilityKind::cara: return "cara";
    case UtilityKind::extended_log: return "extended_log";
    case UtilityKind::partial_iara: return "partial_iara";
    case UtilityKind::extended_arctan: return "extended_arctan";
    case UtilityKind::risk_neutral: return "risk_neutral";
    }
    return "?";
}

namespace detail {

// exp with the exponent clamped to +-700 so CARA values saturate to a huge
// finite number instead of overflowing to inf. Saturations are counted per
// thread; solvers surface the count as a diagnostic for ill-scaled instances.
inline thread_local std::uint64_t exp_saturations = 0;

inline double exp_clamped(double e) {
    if (e > 700.0) {
        ++exp_saturations;
        e = 700.0;
    } else if (e < -700.0) {
        ++exp_saturations;
        e = -700.0;
    }
    return std::exp(e);
}

inline constexpr double sqrt3 = 1.7320508075688772935;
inline constexpr double arctan_knot = 1.0 / sqrt3;
// Constant term of the quadratic piece: (16*pi/6 + sqrt(3) - 18/sqrt(3)) / 16.
inline constexpr double arctan_c0 =
    (16.0 * std::numbers::pi / 6.0 + sqrt3 - 18.0 / sqrt3) / 16.0;

}  // namespace detail

inline std::uint64_t saturation_count() { return detail::exp_saturations; }
inline void reset_saturation_count() { detail::exp_saturations = 0; }

inline double eval(const UtilitySpec& u, double x) {
    switch (u.kind) {
    case UtilityKind::cara:
        return -detail::exp_clamped(-u.gamma * x);
    case UtilityKind::extended_log:
        if (x >= 1.0) return std::log(x);
        return -0.5 * (x * x - 4.0 * x + 3.0);
    case UtilityKind::partial_iara:
        if (x >= 0.0) return -std::exp(-x);
        return -(0.5 * x * x - x + 1.0);
    case UtilityKind::extended_arctan:
        if (x >= detail::arctan_knot) return std::atan(x);
        return (-3.0 * detail::sqrt3 * x * x + 18.0 * x) / 16.0 + detail::arctan_c0;
    case UtilityKind::risk_neutral:
        return x;
    }
    throw std::logic_error("eval: bad utility kind");
}

inline double deriv(const UtilitySpec& u, double x) {
    switch (u.kind) {
    case UtilityKind::cara:
        return u.gamma * detail::exp_clamped(-u.gamma * x);
    case UtilityKind::extended_log:
        if (x >= 1.0) return 1.0 / x;
        return 2.0 - x;
    case UtilityKind::partial_iara:
        if (x >= 0.0) return std::exp(-x);
        return 1.0 - x;
    case UtilityKind::extended_arctan:
        if (x >= detail::arctan_knot) return 1.0 / (1.0 + x * x);
        return (18.0 - 6.0 * detail::sqrt3 * x) / 16.0;
    case UtilityKind::risk_neutral:
        return 1.0;
    }
    throw std::logic_error("deriv: bad utility kind");
}

inline double deriv2(const UtilitySpec& u, double x) {
    switch (u.kind) {
    case UtilityKind::cara:
        return -u.gamma * u.gamma * detail::exp_clamped(-u.gamma * x);
    case UtilityKind::extended_log:
        if (x >= 1.0) return -1.0 / (x * x);
        return -1.0;
    case UtilityKind::partial_iara:
        if (x >= 0.0) return -std::exp(-x);
        return -1.0;
    case UtilityKind::extended_arctan:
        if (x >= detail::arctan_knot) {
            const double d = 1.0 + x * x;
            return -2.0 * x / (d * d);
        }
        return -6.0 * detail::sqrt3 / 16.0;
    case UtilityKind::risk_neutral:
        return 0.0;
    }
    throw std::logic_error("deriv2: bad utility kind");
}

// -u''/u'. Requires deriv(u, x) > 0, which holds everywhere for all kinds.
inline double absolute_risk_aversion(const UtilitySpec& u, double x) {
    return -deriv2(u, x) / deriv(u, x);
}

}  // namespace pact
