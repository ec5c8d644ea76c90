#include "pgee/lasso.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pgee {

namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

// Largest KKT violation given grad = c - G theta (so (2/n) X'r = 2 grad).
double kkt_violation(const VectorXd& coef, const VectorXd& grad, const VectorXd& diag,
                     double lambda) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        if (diag(j) <= 0.0) continue;  // constant-zero column never enters
        const double score = 2.0 * grad(j);
        double v;
        if (coef(j) != 0.0) {
            v = std::abs(score - lambda * (coef(j) > 0 ? 1.0 : -1.0));
        } else {
            v = std::max(0.0, std::abs(score) - lambda);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace

GramLasso::GramLasso(const MatrixXd& design, const VectorXd& response)
    : yty_(0.0), n_rows_(static_cast<int>(design.rows())) {
    if (design.rows() != response.size()) {
        throw InputError("lasso design has " + std::to_string(design.rows()) +
                         " rows but response has " + std::to_string(response.size()));
    }
    if (design.rows() < 1 || design.cols() < 1) throw InputError("lasso needs n_rows, d >= 1");
    const double inv_n = 1.0 / static_cast<double>(n_rows_);
    gram_ = design.transpose() * design * inv_n;
    xty_ = design.transpose() * response * inv_n;
    yty_ = response.squaredNorm() * inv_n;
}

GramLasso::GramLasso(MatrixXd gram, VectorXd xty, double yty, int n_rows)
    : gram_(std::move(gram)), xty_(std::move(xty)), yty_(yty), n_rows_(n_rows) {
    if (gram_.rows() != gram_.cols() || gram_.rows() != xty_.size()) {
        throw InputError("inconsistent Gram moments");
    }
    if (n_rows_ < 1 || xty_.size() < 1) throw InputError("lasso needs n_rows, d >= 1");
}

double GramLasso::lambda_max() const { return 2.0 * xty_.cwiseAbs().maxCoeff(); }

double GramLasso::mean_squared_residual(const VectorXd& coef) const {
    return yty_ - 2.0 * coef.dot(xty_) + coef.dot(gram_ * coef);
}

double GramLasso::objective(const VectorXd& coef, double lambda) const {
    return mean_squared_residual(coef) + lambda * coef.lpNorm<1>();
}

LassoSolution GramLasso::solve(double lambda, double tol, int max_sweeps) const {
    return solve(lambda, VectorXd::Zero(dim()), tol, max_sweeps);
}

// Exact minimizer on the current signed support, G_AA b = c_A - lambda/2 s_A.
// Kept only if the signs survive and the KKT violation drops.
void GramLasso::polish(VectorXd& coef, VectorXd& grad, const VectorXd& diag, double lambda,
                       double& violation) const {
    std::vector<int> active;
    for (int j = 0; j < dim(); ++j) {
        if (coef(j) != 0.0) active.push_back(j);
    }
    if (active.empty()) return;
    const auto size = static_cast<Eigen::Index>(active.size());
    MatrixXd g(size, size);
    VectorXd rhs(size);
    for (Eigen::Index a = 0; a < size; ++a) {
        const int j = active[static_cast<size_t>(a)];
        rhs(a) = xty_(j) - 0.5 * lambda * (coef(j) > 0.0 ? 1.0 : -1.0);
        for (Eigen::Index b = 0; b < size; ++b) g(a, b) = gram_(j, active[static_cast<size_t>(b)]);
    }
    const Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) return;
    const VectorXd sol = llt.solve(rhs);
    VectorXd candidate = VectorXd::Zero(dim());
    for (Eigen::Index a = 0; a < size; ++a) {
        const int j = active[static_cast<size_t>(a)];
        if (!(sol(a) * coef(j) > 0.0)) return;
        candidate(j) = sol(a);
    }
    const VectorXd cand_grad = xty_ - gram_ * candidate;
    const double cand_violation = kkt_violation(candidate, cand_grad, diag, lambda);
    if (cand_violation < violation) {
        coef = candidate;
        grad = cand_grad;
        violation = cand_violation;
    }
}

LassoSolution GramLasso::solve(double lambda, const VectorXd& warm_start, double tol,
                               int max_sweeps) const {
    if (!(lambda >= 0.0)) throw InputError("lasso lambda must be nonnegative");
    if (warm_start.size() != dim()) throw InputError("warm start has wrong length");
    const int d = dim();
    const VectorXd diag = gram_.diagonal();

    LassoSolution out;
    out.coef = warm_start;
    for (int j = 0; j < d; ++j) {
        if (diag(j) <= 0.0) out.coef(j) = 0.0;
    }
    VectorXd grad = xty_ - gram_ * out.coef;

    auto sweep = [&](bool active_only) {
        double max_change = 0.0;
        for (int j = 0; j < d; ++j) {
            if (diag(j) <= 0.0) continue;
            if (active_only && out.coef(j) == 0.0) continue;
            const double old = out.coef(j);
            const double rho = grad(j) + diag(j) * old;
            const double updated = soft_threshold(2.0 * rho, lambda) / (2.0 * diag(j));
            const double delta = updated - old;
            if (delta != 0.0) {
                out.coef(j) = updated;
                grad.noalias() -= gram_.col(j) * delta;
                max_change = std::max(max_change, std::abs(delta) * std::sqrt(diag(j)));
            }
        }
        return max_change;
    };

    for (out.sweeps_used = 0; out.sweeps_used < max_sweeps;) {
        sweep(false);
        ++out.sweeps_used;
        // Cycle on the active set until it settles, then re-check everything.
        for (int inner = 0; inner < 1000 && out.sweeps_used < max_sweeps; ++inner) {
            const double change = sweep(true);
            ++out.sweeps_used;
            if (change < tol * 1e-2) break;
        }
        grad = xty_ - gram_ * out.coef;  // refresh to shed accumulated round-off
        out.kkt_violation = kkt_violation(out.coef, grad, diag, lambda);
        if (out.kkt_violation > tol) polish(out.coef, grad, diag, lambda, out.kkt_violation);
        out.objective_trace.push_back(objective(out.coef, lambda));
        if (out.kkt_violation <= tol) {
            out.converged = true;
            break;
        }
    }
    out.objective = objective(out.coef, lambda);
    return out;
}

LassoSolution solve_lasso(const LassoProblem& problem) {
    GramLasso system(problem.design, problem.response);
    return system.solve(problem.lambda, problem.tol, problem.max_sweeps);
}

std::vector<double> lambda_grid(double lambda_max, int size, double min_ratio) {
    if (size < 1) throw InputError("lambda grid needs at least one value");
    std::vector<double> grid(static_cast<size_t>(size));
    if (size == 1 || lambda_max <= 0.0) {
        std::fill(grid.begin(), grid.end(), std::max(lambda_max, 0.0));
        return grid;
    }
    const double log_hi = std::log(lambda_max);
    const double log_lo = std::log(lambda_max * min_ratio);
    for (int i = 0; i < size; ++i) {
        grid[static_cast<size_t>(i)] =
            std::exp(log_hi + (log_lo - log_hi) * static_cast<double>(i) / (size - 1));
    }
    return grid;
}

LassoPathFit fit_lasso_bic(const GramLasso& system, int grid_size, double min_ratio,
                           double tol) {
    LassoPathFit out;
    out.lambdas = lambda_grid(system.lambda_max(), grid_size, min_ratio);
    const double n = static_cast<double>(system.n_rows());
    VectorXd warm = VectorXd::Zero(system.dim());
    double best = std::numeric_limits<double>::infinity();
    for (size_t g = 0; g < out.lambdas.size(); ++g) {
        LassoSolution sol = system.solve(out.lambdas[g], warm, tol);
        warm = sol.coef;
        const double rss = std::max(system.mean_squared_residual(sol.coef), 1e-300);
        const double df = static_cast<double>((sol.coef.array() != 0.0).count());
        const double bic = n * std::log(rss) + df * std::log(n);
        out.bic.push_back(bic);
        if (bic < best) {
            best = bic;
            out.selected = static_cast<int>(g);
            out.lambda = out.lambdas[g];
            out.solution = std::move(sol);
        }
    }
    return out;
}

}  // namespace pgee
