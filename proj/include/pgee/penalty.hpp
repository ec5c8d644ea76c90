#pragma once

#include "pgee/model.hpp"

#include <string_view>

namespace pgee {

enum class PenaltyKind { scad, mcp };

struct PenaltyConfig {
    PenaltyKind kind = PenaltyKind::scad;
    double lambda = 0.0;
    double a = 3.7;

    // Default shape constant: 3.7 for SCAD, 3.0 for MCP.
    static PenaltyConfig make(PenaltyKind kind, double lambda);
    static PenaltyKind kind_from_name(std::string_view name);

    // Throws InputError unless lambda >= 0 and a > 2 (SCAD) or a > 1 (MCP).
    void validate() const;
};

const char* to_string(PenaltyKind kind);

// rho'_lambda(|t|); nonnegative, nonincreasing in |t|, zero for |t| >= a*lambda.
double penalty_derivative(double t, const PenaltyConfig& cfg);

// rho''_lambda(|t|) for t != 0; used by the Newton polish on the support.
double penalty_second_derivative(double t, const PenaltyConfig& cfg);

/// Component j is sign(beta_j) * rho'(|beta_j|) for j outside m_set, else 0.
///
/// At beta_j == 0 the component is 0; the subdifferential there is an
/// interval, available from kkt_interval().
VectorXd partial_penalty_gradient(const VectorXd& beta, const IndexSet& m_set,
                                  const PenaltyConfig& cfg);

struct KktInterval {
    double lower;
    double upper;
};

// Subdifferential of the partial penalty at coordinate j: [-lambda, lambda]
// when beta_j == 0 and j is penalized, a single point otherwise.
KktInterval kkt_interval(const VectorXd& beta, int j, const IndexSet& m_set,
                         const PenaltyConfig& cfg);

}  // namespace pgee
