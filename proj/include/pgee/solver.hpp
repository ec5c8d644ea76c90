#pragma once

#include "pgee/estimating.hpp"
#include "pgee/hypothesis.hpp"
#include "pgee/penalty.hpp"

#include <optional>
#include <vector>

namespace pgee {

struct ModelSpec {
    LinkFunction link = LinkFunction::identity();
    // Shape of the penalty; its lambda is taken from SolverConfig::lambda_n.
    PenaltyConfig penalty = PenaltyConfig::make(PenaltyKind::scad, 0.0);
    IndexSet m_set;
    std::optional<HypothesisSpec> hypothesis;
};

struct SolverConfig {
    double lambda_n = 0.0;
    double tol = 1e-8;             // on max |update|
    int max_iter = 100;
    double zero_threshold = 1e-4;
    double ridge = 1e-8;           // relative to trace/dim of the Newton matrix
};

struct FitResult {
    ParameterVector beta;
    bool converged = false;
    int iterations = 0;
    double final_update_norm = 0.0;
    // max over M u S of |U_j - sign(beta_j) rho'(beta_j)|
    double equation_norm_on_support = 0.0;
    // max over the zeroed penalized coordinates of |U_j|
    double off_support_equation_norm = 0.0;
    double lambda_n = 0.0;
};

/// Working-independence ridge fit used as the default starting point:
/// a damped Newton solve of U_n(beta) - kappa * beta = 0 with identity
/// weights, kappa = ridge_rel * trace(V)/p.
VectorXd default_initial_value(const Dataset& data, const LinkFunction& link,
                               double ridge_rel = 0.1);

/// Solves 0 in U_n(beta) - d rho_lambda(beta; M).
///
/// Each iteration takes a Newton step on the current support M u S with the
/// penalty replaced by its local quadratic approximation
/// rho'(|b_j|) / |b_j| * b_j, i.e. it solves (-J_SS + E) delta = U_S - E b_S.
/// Penalized coordinates falling below zero_threshold are set to zero and
/// leave the support. A step is halved when the update norm grows.
FitResult penalized_solve(const Dataset& data, const ModelSpec& spec,
                          const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                          const VectorXd& init);
FitResult penalized_solve(const Dataset& data, const ModelSpec& spec, const WorkingCovariance& cov,
                          const SolverConfig& cfg, const VectorXd& init);

struct TuningConfig {
    int grid_size = 20;
    double min_ratio = 0.02;
};

struct TunedFit {
    FitResult fit;
    std::vector<double> lambdas;
    std::vector<double> criterion;
    int selected = 0;
};

// Smallest lambda at which the fit on M alone satisfies the KKT bound.
double lambda_upper_bound(const Dataset& data, const ModelSpec& spec,
                          const std::vector<MatrixXd>& inverses, const SolverConfig& cfg);

/// Fits a log-spaced lambda grid from the same start and keeps the fit
/// minimizing the high-dimensional BIC
///
///   n l log(Q / (n l)) + df log(n) max(1, log log p),
///
/// where Q = sum_i R_i' W_i R_i.
TunedFit fit_tuned(const Dataset& data, const ModelSpec& spec,
                   const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                   const TuningConfig& tuning, const VectorXd& init);

}  // namespace pgee
