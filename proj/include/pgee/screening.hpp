#pragma once

#include "pgee/model.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pgee {

/// Basis functions f_1..f_h applied to squared residuals.
class BasisFamily {
public:
    using Fn = std::function<double(double)>;

    explicit BasisFamily(std::vector<Fn> functions);
    // f_v(u) = u^v, v = 1..h.
    static BasisFamily powers(int h);

    int size() const { return static_cast<int>(fns_.size()); }
    double operator()(int v, double u) const { return fns_[static_cast<size_t>(v)](u); }

private:
    std::vector<Fn> fns_;
};

struct ScreeningConfig {
    int basis_count = 3;
    double alpha = 0.05;
    // When set, the level is alpha_p = p^{-c} instead of alpha.
    std::optional<double> alpha_exponent;
    int lambda_grid_size = 50;
    double lambda_min_ratio = 1e-3;
    double lasso_tol = 1e-6;  // KKT violation for the nuisance fits
    bool standardize_responses = true;
    double omega_jitter = 1e-8;  // relative to trace(Omega)/h
};

/// n x h matrix with entries f_v(R_ik^2), each column centered and scaled
/// to unit sample variance when `standardize` is set (constant columns
/// become zero).
MatrixXd basis_responses(const std::vector<VectorXd>& residuals, const BasisFamily& basis, int k,
                         bool standardize);

// n x p matrix whose rows are X_ik'.
MatrixXd measurement_design(const Dataset& data, int k);

/// theta_hat^v_k for v = 1..h: lasso of f_v(R_ik^2) on X_ik with lambda
/// chosen by BIC over the configured grid.
std::vector<VectorXd> fit_basis_regressions(const Dataset& data,
                                            const std::vector<VectorXd>& residuals,
                                            const BasisFamily& basis, int k,
                                            const ScreeningConfig& cfg = {});

// gamma_hat_kj in R^{p-1}: lasso of X_ikj on X_ik,-j.
VectorXd fit_decorrelation(const Dataset& data, int k, int j, const ScreeningConfig& cfg = {});

struct ScoreStatistic {
    double w = 0.0;
    bool jittered = false;    // Omega was lifted to its eigenvalue floor
    bool degenerate = false;  // all scores were zero; w reported as 0
    double omega_min_eigenvalue = 0.0;
};

/// Decorrelated score statistic W_kj = S_bar' Omega^{-1} S_bar with
///   S_ikj^v = (X_ikj - X_ik,-j' gamma) (f_v(R_ik^2) - X_ik,-j' theta^v_-j),
///   S_bar = n^{-1/2} sum_i S_ikj,  Omega = n^{-1} sum_i S_ikj S_ikj'.
/// `thetas` are the full length-p fits; coordinate j is dropped here.
ScoreStatistic score_statistic(const Dataset& data, const std::vector<VectorXd>& residuals,
                               const std::vector<VectorXd>& thetas, const VectorXd& gamma,
                               const BasisFamily& basis, int k, int j,
                               const ScreeningConfig& cfg = {});

// Same statistic from precomputed pieces; `scores` is n x h.
ScoreStatistic score_from_matrix(const MatrixXd& scores, double omega_jitter = 1e-8);

// (1 - alpha/p) quantile of chi^2_h.
double critical_value(int h, int p, double alpha);
// Same with alpha_p = p^{-c}.
double critical_value_exponent(int h, int p, double c);

struct ActiveSelection {
    std::vector<IndexSet> per_measurement;
    IndexSet union_set;
};

// A_k = {j : W_kj >= t0}, A = union over k. `w_stats` is l x p.
ActiveSelection select_active_set(const MatrixXd& w_stats, double t0);

struct ScreeningResult {
    MatrixXd w_stats;                               // l x p
    std::vector<std::vector<VectorXd>> theta_hats;  // [k][v], length p
    std::vector<std::vector<VectorXd>> gamma_hats;  // [k][j], length p - 1
    double critical_value = 0.0;
    std::vector<IndexSet> active_sets;
    IndexSet union_set;
    int jittered = 0;
    int degenerate = 0;
};

/// Runs the whole screening pass on one sample: basis regressions and
/// decorrelation fits for every measurement, the (k, j) statistics, and
/// the thresholded active sets.
ScreeningResult screen_covariance(const Dataset& data, const std::vector<VectorXd>& residuals,
                                  const BasisFamily& basis, const ScreeningConfig& cfg = {});

}  // namespace pgee
