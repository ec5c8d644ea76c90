#include "pgee/screening.hpp"

#include "pgee/distributions.hpp"
#include "pgee/errors.hpp"
#include "pgee/lasso.hpp"

#include <cmath>

namespace pgee {

BasisFamily::BasisFamily(std::vector<Fn> functions) : fns_(std::move(functions)) {
    if (fns_.empty()) throw InputError("basis family needs at least one function");
}

BasisFamily BasisFamily::powers(int h) {
    if (h < 1) throw InputError("basis count must be >= 1");
    std::vector<Fn> fns;
    for (int v = 1; v <= h; ++v) {
        fns.emplace_back([v](double u) { return std::pow(u, v); });
    }
    return BasisFamily(std::move(fns));
}

MatrixXd basis_responses(const std::vector<VectorXd>& residuals, const BasisFamily& basis, int k,
                         bool standardize) {
    const auto n = static_cast<Eigen::Index>(residuals.size());
    MatrixXd f(n, basis.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = residuals[static_cast<size_t>(i)];
        if (k < 0 || k >= r.size()) throw InputError("measurement index out of range");
        const double sq = r(k) * r(k);
        for (int v = 0; v < basis.size(); ++v) f(i, v) = basis(v, sq);
    }
    if (standardize && n > 1) {
        for (int v = 0; v < basis.size(); ++v) {
            auto col = f.col(v);
            col.array() -= col.mean();
            const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0.0 && std::isfinite(sd)) {
                col /= sd;
            } else {
                col.setZero();
            }
        }
    }
    if (!f.allFinite()) throw NumericalError("basis responses overflowed");
    return f;
}

MatrixXd measurement_design(const Dataset& data, int k) {
    if (k < 0 || k >= data.l()) throw InputError("measurement index out of range");
    MatrixXd x(data.n(), data.p());
    for (int i = 0; i < data.n(); ++i) x.row(i) = data[i].x.col(k).transpose();
    return x;
}

namespace {

void check_residuals(const Dataset& data, const std::vector<VectorXd>& residuals) {
    if (static_cast<int>(residuals.size()) != data.n()) {
        throw InputError("one residual vector per unit is required");
    }
}

// Lasso of column j on the remaining columns, from the full Gram G = X'X/n.
VectorXd decorrelation_from_gram(const MatrixXd& gram, int j, int n_rows,
                                 const ScreeningConfig& cfg) {
    const int p = static_cast<int>(gram.rows());
    if (p < 2) throw InputError("decorrelation needs p >= 2");
    std::vector<int> rest;
    for (int c = 0; c < p; ++c) {
        if (c != j) rest.push_back(c);
    }
    const auto d = static_cast<Eigen::Index>(rest.size());
    MatrixXd sub(d, d);
    VectorXd cross(d);
    for (Eigen::Index a = 0; a < d; ++a) {
        cross(a) = gram(rest[static_cast<size_t>(a)], j);
        for (Eigen::Index b = 0; b < d; ++b) {
            sub(a, b) = gram(rest[static_cast<size_t>(a)], rest[static_cast<size_t>(b)]);
        }
    }
    GramLasso system(std::move(sub), std::move(cross), gram(j, j), n_rows);
    return fit_lasso_bic(system, cfg.lambda_grid_size, cfg.lambda_min_ratio, cfg.lasso_tol).solution.coef;
}

std::vector<VectorXd> basis_fits_from(const MatrixXd& x, const MatrixXd& gram, const MatrixXd& f,
                                      const ScreeningConfig& cfg) {
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    std::vector<VectorXd> thetas;
    for (Eigen::Index v = 0; v < f.cols(); ++v) {
        GramLasso system(gram, x.transpose() * f.col(v) * inv_n, f.col(v).squaredNorm() * inv_n,
                         static_cast<int>(x.rows()));
        thetas.push_back(
            fit_lasso_bic(system, cfg.lambda_grid_size, cfg.lambda_min_ratio, cfg.lasso_tol).solution.coef);
    }
    return thetas;
}

MatrixXd scores_for(const MatrixXd& x, const MatrixXd& f, const MatrixXd& fitted,
                    const std::vector<VectorXd>& thetas, const VectorXd& gamma, int j) {
    const auto n = x.rows();
    const auto p = x.cols();
    VectorXd decorrelated = x.col(j);
    if (gamma.size() > 0) {
        // X_{-j} gamma without materializing X_{-j}.
        VectorXd full_gamma(p);
        full_gamma.head(j) = gamma.head(j);
        full_gamma(j) = 0.0;
        full_gamma.tail(p - j - 1) = gamma.tail(p - j - 1);
        decorrelated -= x * full_gamma;
    }
    MatrixXd scores(n, f.cols());
    for (Eigen::Index v = 0; v < f.cols(); ++v) {
        // f_v - X_{-j} theta_{-j} = f_v - X theta + X_j theta_j
        const VectorXd e = f.col(v) - fitted.col(v) + x.col(j) * thetas[static_cast<size_t>(v)](j);
        scores.col(v) = decorrelated.cwiseProduct(e);
    }
    return scores;
}

}  // namespace

std::vector<VectorXd> fit_basis_regressions(const Dataset& data,
                                            const std::vector<VectorXd>& residuals,
                                            const BasisFamily& basis, int k,
                                            const ScreeningConfig& cfg) {
    check_residuals(data, residuals);
    const MatrixXd x = measurement_design(data, k);
    const MatrixXd f = basis_responses(residuals, basis, k, cfg.standardize_responses);
    const MatrixXd gram = x.transpose() * x / static_cast<double>(data.n());
    return basis_fits_from(x, gram, f, cfg);
}

VectorXd fit_decorrelation(const Dataset& data, int k, int j, const ScreeningConfig& cfg) {
    if (j < 0 || j >= data.p()) throw InputError("covariate index out of range");
    const MatrixXd x = measurement_design(data, k);
    const MatrixXd gram = x.transpose() * x / static_cast<double>(data.n());
    return decorrelation_from_gram(gram, j, data.n(), cfg);
}

ScoreStatistic score_from_matrix(const MatrixXd& scores, double omega_jitter) {
    const auto n = static_cast<double>(scores.rows());
    const auto h = scores.cols();
    ScoreStatistic out;
    const VectorXd s_bar = scores.colwise().sum().transpose() / std::sqrt(n);
    MatrixXd omega = scores.transpose() * scores / n;
    const double trace = omega.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        out.degenerate = true;
        out.jittered = true;
        return out;
    }
    const double floor = omega_jitter * trace / static_cast<double>(h);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(omega, Eigen::EigenvaluesOnly);
    out.omega_min_eigenvalue = eig.eigenvalues().minCoeff();
    if (out.omega_min_eigenvalue < floor) {
        omega.diagonal().array() += floor;
        out.jittered = true;
        out.omega_min_eigenvalue += floor;
    }
    out.w = std::max(0.0, s_bar.dot(omega.ldlt().solve(s_bar)));
    return out;
}

ScoreStatistic score_statistic(const Dataset& data, const std::vector<VectorXd>& residuals,
                               const std::vector<VectorXd>& thetas, const VectorXd& gamma,
                               const BasisFamily& basis, int k, int j,
                               const ScreeningConfig& cfg) {
    check_residuals(data, residuals);
    if (j < 0 || j >= data.p()) throw InputError("covariate index out of range");
    if (static_cast<int>(thetas.size()) != basis.size()) {
        throw InputError("one theta vector per basis function is required");
    }
    if (gamma.size() != data.p() - 1) throw InputError("gamma must have length p - 1");
    const MatrixXd x = measurement_design(data, k);
    const MatrixXd f = basis_responses(residuals, basis, k, cfg.standardize_responses);
    MatrixXd fitted(x.rows(), f.cols());
    for (int v = 0; v < basis.size(); ++v) {
        if (thetas[static_cast<size_t>(v)].size() != data.p()) {
            throw InputError("theta vectors must have length p");
        }
        fitted.col(v) = x * thetas[static_cast<size_t>(v)];
    }
    return score_from_matrix(scores_for(x, f, fitted, thetas, gamma, j), cfg.omega_jitter);
}

double critical_value(int h, int p, double alpha) {
    if (h < 1 || p < 1) throw InputError("critical value needs h >= 1 and p >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    return chi2_upper_quantile(alpha / p, h);
}

double critical_value_exponent(int h, int p, double c) {
    if (!(c > 0.0)) throw InputError("alpha exponent must be positive");
    if (p < 2) throw InputError("alpha_p = p^{-c} needs p >= 2");
    return critical_value(h, p, std::pow(static_cast<double>(p), -c));
}

ActiveSelection select_active_set(const MatrixXd& w_stats, double t0) {
    ActiveSelection out;
    for (Eigen::Index k = 0; k < w_stats.rows(); ++k) {
        IndexSet a;
        for (Eigen::Index j = 0; j < w_stats.cols(); ++j) {
            if (w_stats(k, j) >= t0) a.push_back(static_cast<int>(j));
        }
        out.union_set = set_union(out.union_set, a);
        out.per_measurement.push_back(std::move(a));
    }
    return out;
}

ScreeningResult screen_covariance(const Dataset& data, const std::vector<VectorXd>& residuals,
                                  const BasisFamily& basis, const ScreeningConfig& cfg) {
    check_residuals(data, residuals);
    const int p = data.p();
    const int l = data.l();
    ScreeningResult out;
    out.w_stats = MatrixXd::Zero(l, p);
    out.critical_value = cfg.alpha_exponent
                             ? critical_value_exponent(basis.size(), p, *cfg.alpha_exponent)
                             : critical_value(basis.size(), p, cfg.alpha);
    for (int k = 0; k < l; ++k) {
        const MatrixXd x = measurement_design(data, k);
        const MatrixXd f = basis_responses(residuals, basis, k, cfg.standardize_responses);
        const MatrixXd gram = x.transpose() * x / static_cast<double>(data.n());
        auto thetas = basis_fits_from(x, gram, f, cfg);
        MatrixXd fitted(x.rows(), f.cols());
        for (int v = 0; v < basis.size(); ++v) fitted.col(v) = x * thetas[static_cast<size_t>(v)];

        std::vector<VectorXd> gammas;
        for (int j = 0; j < p; ++j) {
            VectorXd gamma = p >= 2 ? decorrelation_from_gram(gram, j, data.n(), cfg) : VectorXd();
            const auto stat =
                score_from_matrix(scores_for(x, f, fitted, thetas, gamma, j), cfg.omega_jitter);
            out.w_stats(k, j) = stat.w;
            out.jittered += stat.jittered ? 1 : 0;
            out.degenerate += stat.degenerate ? 1 : 0;
            gammas.push_back(std::move(gamma));
        }
        out.theta_hats.push_back(std::move(thetas));
        out.gamma_hats.push_back(std::move(gammas));
    }
    auto selection = select_active_set(out.w_stats, out.critical_value);
    out.active_sets = std::move(selection.per_measurement);
    out.union_set = std::move(selection.union_set);
    return out;
}

}  // namespace pgee
