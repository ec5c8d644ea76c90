#include "pgee/penalty.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pgee {

PenaltyConfig PenaltyConfig::make(PenaltyKind kind, double lambda) {
    return {kind, lambda, kind == PenaltyKind::scad ? 3.7 : 3.0};
}

PenaltyKind PenaltyConfig::kind_from_name(std::string_view name) {
    if (name == "scad") return PenaltyKind::scad;
    if (name == "mcp") return PenaltyKind::mcp;
    throw InputError("unknown penalty '" + std::string(name) + "'");
}

void PenaltyConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("penalty lambda must be finite and nonnegative");
    }
    if (kind == PenaltyKind::scad && !(a > 2.0)) throw InputError("SCAD requires a > 2");
    if (kind == PenaltyKind::mcp && !(a > 1.0)) throw InputError("MCP requires a > 1");
}

const char* to_string(PenaltyKind kind) { return kind == PenaltyKind::scad ? "scad" : "mcp"; }

double penalty_derivative(double t, const PenaltyConfig& cfg) {
    cfg.validate();
    const double u = std::abs(t);
    const double lam = cfg.lambda;
    if (lam == 0.0) return 0.0;
    if (cfg.kind == PenaltyKind::scad) {
        if (u <= lam) return lam;
        return std::max(cfg.a * lam - u, 0.0) / (cfg.a - 1.0);
    }
    return std::max(lam - u / cfg.a, 0.0);
}

double penalty_second_derivative(double t, const PenaltyConfig& cfg) {
    const double u = std::abs(t);
    const double lam = cfg.lambda;
    if (lam == 0.0 || u >= cfg.a * lam) return 0.0;
    if (cfg.kind == PenaltyKind::scad) return u <= lam ? 0.0 : -1.0 / (cfg.a - 1.0);
    return -1.0 / cfg.a;
}

VectorXd partial_penalty_gradient(const VectorXd& beta, const IndexSet& m_set,
                                  const PenaltyConfig& cfg) {
    cfg.validate();
    const int p = static_cast<int>(beta.size());
    for (int j : m_set) {
        if (j < 0 || j >= p) throw InputError("unpenalized index outside [0, p)");
    }
    VectorXd out = VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) {
        if (contains(m_set, j) || beta(j) == 0.0) continue;
        out(j) = (beta(j) > 0 ? 1.0 : -1.0) * penalty_derivative(beta(j), cfg);
    }
    return out;
}

KktInterval kkt_interval(const VectorXd& beta, int j, const IndexSet& m_set,
                         const PenaltyConfig& cfg) {
    if (j < 0 || j >= beta.size()) throw InputError("coordinate outside [0, p)");
    if (contains(m_set, j)) return {0.0, 0.0};
    if (beta(j) == 0.0) return {-cfg.lambda, cfg.lambda};
    const double v = (beta(j) > 0 ? 1.0 : -1.0) * penalty_derivative(beta(j), cfg);
    return {v, v};
}

}  // namespace pgee
