#pragma once

#include "pgee/hypothesis.hpp"
#include "pgee/model.hpp"

#include <optional>
#include <vector>

namespace pgee {

struct SandwichCovariance {
    MatrixXd v1;
    MatrixXd v2;
    MatrixXd omega;  // V1^{-1} V2 V1^{-1}, symmetrized
    IndexSet support;
};

/// Sandwich covariance of the estimating-equation solution on `support`:
///
///   V1 = n^{-1} sum_i X_{i,S} D_i W_i D_i X_{i,S}'
///   V2 = n^{-1} sum_i X_{i,S} D_i W_i M_i W_i D_i X_{i,S}'
///
/// with M_i = R_i R_i' unless `middles` supplies a replacement (for example
/// the true conditional covariance). Throws NumericalError if V1 is
/// singular.
SandwichCovariance sandwich(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                            const std::vector<MatrixXd>& inverses, const IndexSet& support,
                            const std::vector<MatrixXd>* middles = nullptr);

// Rows/columns of `omega` (indexed by `support`) belonging to `m_set`.
MatrixXd restrict_to(const MatrixXd& omega, const IndexSet& support, const IndexSet& m_set);

struct WaldReport {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    // h'(C Omega C')^{-1} h for a supplied drift h, otherwise max(W - r, 0).
    double noncentrality = 0.0;
    VectorXd contrast;  // C beta_M - t
};

/// W_n = n (C b - t)' (C Omega C')^{-1} (C b - t), referred to chi^2_r.
WaldReport wald(const VectorXd& beta_m, const HypothesisSpec& hyp, const MatrixXd& omega_m, int n,
                const std::optional<VectorXd>& drift = std::nullopt);

// h'(C Omega C')^{-1} h.
double noncentrality(const VectorXd& drift, const MatrixXd& C, const MatrixXd& omega);

struct PowerComparison {
    double power_crossfit = 0.0;
    double power_initial = 0.0;
    double delta_crossfit = 0.0;
    double delta_initial = 0.0;
    bool dominance = false;
};

/// Local power P(chi^2_r(delta) > chi^2_r(1 - level)) under each covariance.
PowerComparison power_compare(const MatrixXd& omega_crossfit, const MatrixXd& omega_initial,
                              const MatrixXd& C, const VectorXd& drift, double level,
                              double tol = 1e-10);

}  // namespace pgee
