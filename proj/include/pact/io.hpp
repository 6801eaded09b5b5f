#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "pact/cara_solver.hpp"
#include "pact/general_solver.hpp"
#include "pact/model.hpp"
#include "pact/verification.hpp"

namespace pact {
namespace io {

using nlohmann::json;

// 17 significant digits, '.' decimal, locale-free: round-trips exactly and
// keeps golden CSV files byte-identical across platforms.
inline std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline const json& require(const json& j, const std::string& field, const std::string& ctx) {
    auto it = j.find(field);
    if (it == j.end())
        throw std::invalid_argument(ctx + ": missing field \"" + field + "\"");
    return *it;
}

inline double require_num(const json& j, const std::string& field, const std::string& ctx) {
    const json& v = require(j, field, ctx);
    if (!v.is_number())
        throw std::invalid_argument(ctx + ": field \"" + field + "\" must be a number");
    return v.get<double>();
}

inline int require_int(const json& j, const std::string& field, const std::string& ctx) {
    const json& v = require(j, field, ctx);
    if (!v.is_number_integer())
        throw std::invalid_argument(ctx + ": field \"" + field + "\" must be an integer");
    return v.get<int>();
}

inline std::vector<double> require_vec(const json& j, const std::string& field,
                                       const std::string& ctx) {
    const json& v = require(j, field, ctx);
    if (!v.is_array())
        throw std::invalid_argument(ctx + ": field \"" + field + "\" must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number())
            throw std::invalid_argument(ctx + ": field \"" + field +
                                        "\" must contain numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace detail

inline json utility_to_json(const UtilitySpec& u) {
    json j{{"kind", kind_name(u.kind)}};
    if (u.is_cara()) j["gamma"] = u.gamma;
    return j;
}

inline UtilitySpec utility_from_json(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument(ctx + ": must be an object");
    const json& kj = detail::require(j, "kind", ctx);
    const std::string kind = kj.is_string() ? kj.get<std::string>() : "";
    if (kind == "cara") return UtilitySpec::cara(detail::require_num(j, "gamma", ctx));
    if (kind == "extended_log") return UtilitySpec::extended_log();
    if (kind == "partial_iara") return UtilitySpec::partial_iara();
    if (kind == "extended_arctan") return UtilitySpec::extended_arctan();
    if (kind == "risk_neutral") return UtilitySpec::risk_neutral();
    throw std::invalid_argument(ctx + ": unknown utility kind \"" + kind + "\"");
}

inline json shock_to_json(const ShockGrid& g) {
    return json{{"kind", "custom"}, {"atoms", g.atoms}, {"probs", g.probs}};
}

inline ShockGrid shock_from_json(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument(ctx + ": must be an object");
    const json& kj = detail::require(j, "kind", ctx);
    const std::string kind = kj.is_string() ? kj.get<std::string>() : "";
    if (kind == "gaussian") return gauss_hermite(detail::require_int(j, "n", ctx));
    if (kind == "uniform")
        return uniform(detail::require_num(j, "lo", ctx), detail::require_num(j, "hi", ctx),
                       detail::require_int(j, "n", ctx));
    if (kind == "custom")
        return custom(detail::require_vec(j, "atoms", ctx),
                      detail::require_vec(j, "probs", ctx));
    throw std::invalid_argument(ctx + ": unknown shock kind \"" + kind + "\"");
}

inline json problem_to_json(const ProblemSpec& p) {
    json j{{"x0", p.x0},
           {"K", p.K},
           {"y", p.y},
           {"m", p.m},
           {"principal", utility_to_json(p.principal)},
           {"agent", utility_to_json(p.agent)},
           {"shock", shock_to_json(p.shock)}};
    if (p.M) j["M"] = *p.M;
    return j;
}

inline ProblemSpec problem_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("problem: must be an object");
    ProblemSpec p;
    p.x0 = detail::require_num(j, "x0", "problem");
    p.K = detail::require_num(j, "K", "problem");
    p.y = detail::require_num(j, "y", "problem");
    p.m = detail::require_num(j, "m", "problem");
    if (j.contains("M")) {
        if (!j["M"].is_number())
            throw std::invalid_argument("problem: field \"M\" must be a number");
        p.M = j["M"].get<double>();
    }
    p.principal = utility_from_json(detail::require(j, "principal", "problem"),
                                    "problem.principal");
    p.agent = utility_from_json(detail::require(j, "agent", "problem"), "problem.agent");
    p.shock = shock_from_json(detail::require(j, "shock", "problem"), "problem.shock");
    p.validate();
    return p;
}

inline json contract_to_json(const Contract& c) {
    if (const auto* par = std::get_if<ParametricContract>(&c))
        return json{{"type", "parametric"},
                    {"rho", par->rho},
                    {"beta", par->beta},
                    {"a", par->a}};
    const auto& sw = std::get<StateWiseContract>(c);
    return json{{"type", "statewise"}, {"wages", sw.wages}, {"a", sw.a}};
}

inline Contract contract_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("contract: must be an object");
    const json& tj = detail::require(j, "type", "contract");
    const std::string type = tj.is_string() ? tj.get<std::string>() : "";
    if (type == "parametric")
        return ParametricContract{detail::require_num(j, "rho", "contract"),
                                  detail::require_num(j, "beta", "contract"),
                                  detail::require_num(j, "a", "contract")};
    if (type == "statewise")
        return StateWiseContract{detail::require_vec(j, "wages", "contract"),
                                 detail::require_num(j, "a", "contract")};
    throw std::invalid_argument("contract: unknown type \"" + type + "\"");
}

inline json multipliers_to_json(const Multipliers& m) {
    return json{{"lambda", m.lambda}, {"z", m.z}, {"y", m.y}};
}

inline Multipliers multipliers_from_json(const json& j) {
    Multipliers m;
    m.lambda = detail::require_num(j, "lambda", "multipliers");
    m.z = detail::require_vec(j, "z", "multipliers");
    m.y = detail::require_vec(j, "y", "multipliers");
    return m;
}

inline json kkt_report_to_json(const KKTReport& r) {
    return json{{"r_stationarity_a", r.r_stationarity_a},
                {"r_stationarity_w", r.r_stationarity_w},
                {"r_pc_slack", r.r_pc_slack},
                {"r_bound_slack", r.r_bound_slack},
                {"lambda", r.lambda},
                {"borch_spread", r.borch_spread},
                {"action_bound_ok", r.action_bound_ok},
                {"pc_binding", r.pc_binding}};
}

// Uniform solution document: both solver families emit the same layout so
// `verify` can re-ingest any solution.json.
inline json solution_to_json(const Contract& contract, const Multipliers& mult,
                             double value, double pc_residual, const json& diagnostics) {
    return json{{"contract", contract_to_json(contract)},
                {"lambda", mult.lambda},
                {"multipliers", multipliers_to_json(mult)},
                {"value", value},
                {"pc_residual", pc_residual},
                {"diagnostics", diagnostics}};
}

inline json oracle_to_json(const verification::OracleResult& r) {
    return json{{"contract", contract_to_json(Contract{r.contract})},
                {"value", r.value},
                {"agent_value", r.agent_value},
                {"points_scanned", r.points_scanned},
                {"final_wage_step", r.final_wage_step},
                {"final_action_step", r.final_action_step}};
}

// Parse a JSON document, rephrasing syntax errors with a line/column hint.
inline json parse_document(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw std::invalid_argument(what + ": parse error at line " + std::to_string(line) +
                                    ", column " + std::to_string(col) + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

}  // namespace io
}  // namespace pact
