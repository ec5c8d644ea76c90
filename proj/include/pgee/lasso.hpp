#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pgee {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min_theta (1/n) sum_i (y_i - x_i' theta)^2 + lambda * ||theta||_1
///
/// No intercept is fitted. The KKT condition for this normalization is
/// |(2/n) x_j' r| <= lambda, with equality and matching sign when theta_j != 0.
struct LassoProblem {
    MatrixXd design;
    VectorXd response;
    double lambda = 0.0;
    double tol = 1e-9;
    int max_sweeps = 10000;
};

struct LassoSolution {
    VectorXd coef;
    double objective = 0.0;
    double kkt_violation = 0.0;
    int sweeps_used = 0;
    bool converged = false;
    // Objective after each full sweep; nonincreasing.
    std::vector<double> objective_trace;
};

/// The lasso expressed through its sufficient statistics
/// G = X'X/n, c = X'y/n and y'y/n.
///
/// Coordinate descent only touches these moments, so a single Gram matrix
/// serves every regression that shares a design (including the
/// leave-one-column-out regressions used for decorrelation).
class GramLasso {
public:
    GramLasso(const MatrixXd& design, const VectorXd& response);
    GramLasso(MatrixXd gram, VectorXd xty, double yty, int n_rows);

    int dim() const { return static_cast<int>(xty_.size()); }
    int n_rows() const { return n_rows_; }

    // Smallest lambda for which theta = 0 satisfies the KKT conditions.
    double lambda_max() const;
    double objective(const VectorXd& coef, double lambda) const;
    double mean_squared_residual(const VectorXd& coef) const;

    LassoSolution solve(double lambda, const VectorXd& warm_start, double tol = 1e-9,
                        int max_sweeps = 10000) const;
    LassoSolution solve(double lambda, double tol = 1e-9, int max_sweeps = 10000) const;

private:
    void polish(VectorXd& coef, VectorXd& grad, const VectorXd& diag, double lambda,
                double& violation) const;

    MatrixXd gram_;
    VectorXd xty_;
    double yty_;
    int n_rows_;
};

LassoSolution solve_lasso(const LassoProblem& problem);

struct LassoPathFit {
    LassoSolution solution;
    double lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> bic;
    int selected = 0;
};

// Log-spaced grid from lambda_max down to lambda_max * min_ratio.
std::vector<double> lambda_grid(double lambda_max, int size, double min_ratio);

/// Warm-started path over a log-spaced grid, choosing lambda by
/// BIC = n log(RSS/n) + df log(n).
LassoPathFit fit_lasso_bic(const GramLasso& system, int grid_size = 50, double min_ratio = 1e-3,
                           double tol = 1e-9);

}  // namespace pgee
