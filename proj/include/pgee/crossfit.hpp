#pragma once

#include "pgee/estimating.hpp"
#include "pgee/inference.hpp"
#include "pgee/kernel_covariance.hpp"
#include "pgee/screening.hpp"
#include "pgee/solver.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pgee {

// Two disjoint halves of {0..n-1}; |idx1| = floor(n/2). Both sorted.
struct FoldPlan {
    std::vector<int> idx1;
    std::vector<int> idx2;
    std::uint64_t rng_seed = 0;

    const std::vector<int>& fold(int q) const { return q == 1 ? idx1 : idx2; }
};

FoldPlan split(int n, std::uint64_t seed);

struct CrossFitConfig {
    SolverConfig solver;
    // Fixed lambda for every fit; BIC over the tuning grid when unset.
    std::optional<double> lambda;
    TuningConfig tuning;
    ScreeningConfig screening;
    KernelConfig kernel;
    std::uint64_t seed = 1;
    double init_ridge = 0.1;
    int threads = 1;
};

struct InitialFit {
    FitResult fit;
    std::vector<double> lambdas;    // empty for a fixed lambda
    std::vector<double> criterion;
};

/// beta_check^(q): penalized solve on one fold with identity working
/// covariance, started from the ridge initial value.
InitialFit initial_fit(const Dataset& fold, const ModelSpec& spec, const CrossFitConfig& cfg);

struct Calibration {
    ScreeningResult screening;
    std::shared_ptr<const CovarianceModel> model;
    bool pooled_fallback = false;  // empty active set: constant pooled covariance
};

// Screening on the fold's residuals at beta_check, then the kernel model on
// the same fold's pairs. The model is tagged with `fold_id`.
Calibration calibrate_fold(const Dataset& fold, const VectorXd& beta_check, const ModelSpec& spec,
                           const CrossFitConfig& cfg, int fold_id);

struct Refit {
    FitResult fit;
    std::vector<MatrixXd> inverses;  // Sigma_hat_i^{-1} used for each unit
    std::vector<double> lambdas;
    std::vector<double> criterion;
};

/// beta_hat^(q'): penalized solve on fold q' weighted by a covariance
/// model learned on the other fold. Every evaluation is logged in `audit`.
Refit crossfit_refit(const Dataset& fold, const WorkingCovariance& cov, const ModelSpec& spec,
                     const CrossFitConfig& cfg, const VectorXd& init,
                     EvaluationAudit* audit = nullptr);

// Coordinatewise mean of the two fold estimates.
VectorXd aggregate(const VectorXd& b1, const VectorXd& b2);

struct FoldReport {
    int fold = 1;
    std::vector<int> positions;  // row positions in the full dataset
    InitialFit initial;
    Calibration calibration;     // built on this fold
    Refit refit;                 // on this fold, weighted by the other fold's model
};

struct CrossFitResult {
    VectorXd beta_hat;
    IndexSet support;  // M plus penalized coordinates above zero_threshold
    FoldPlan plan;
    FoldReport folds[2];
    EvaluationAudit audit;
    int hygiene_violations = 0;
    std::vector<std::string> diagnostics;
};

CrossFitResult run_crossfit(const Dataset& data, const ModelSpec& spec, const CrossFitConfig& cfg);

// Hygiene check independent of the audit: no refit unit of fold q' may
// appear among the training units of the model it consumed.
int count_hygiene_violations(const CrossFitResult& result, const Dataset& data);

/// Sandwich at beta_hat over both folds, each unit weighted by the
/// covariance model its refit consumed.
SandwichCovariance crossfit_sandwich(const Dataset& data, const CrossFitResult& result,
                                     const LinkFunction& link);

struct IndependenceFit {
    InitialFit initial;
    IndexSet support;
    SandwichCovariance covariance;
};

// Full-sample fit and sandwich under identity working covariance.
IndependenceFit working_independence_fit(const Dataset& data, const ModelSpec& spec,
                                         const CrossFitConfig& cfg);

}  // namespace pgee
