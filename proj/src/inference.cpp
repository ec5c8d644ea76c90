#include "pgee/inference.hpp"

#include "pgee/distributions.hpp"
#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pgee {

namespace {

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// (C Omega C')^{-1} as a factorization; throws on singularity.
Eigen::LDLT<MatrixXd> contrast_factor(const MatrixXd& C, const MatrixXd& omega) {
    if (C.cols() != omega.rows() || omega.rows() != omega.cols()) {
        throw InputError("C and Omega have inconsistent dimensions");
    }
    const MatrixXd middle = symmetrize(C * omega * C.transpose());
    Eigen::LDLT<MatrixXd> ldlt(middle);
    const double scale = std::max(middle.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * scale) {
        throw NumericalError("C Omega C' is singular");
    }
    return ldlt;
}

}  // namespace

SandwichCovariance sandwich(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                            const std::vector<MatrixXd>& inverses, const IndexSet& support,
                            const std::vector<MatrixXd>* middles) {
    if (support.empty()) throw InputError("sandwich needs a nonempty support");
    if (beta.size() != data.p()) throw InputError("beta has wrong length");
    if (static_cast<int>(inverses.size()) != data.n()) {
        throw InputError("one inverse covariance per unit is required");
    }
    if (middles && static_cast<int>(middles->size()) != data.n()) {
        throw InputError("one middle matrix per unit is required");
    }
    for (int j : support) {
        if (j < 0 || j >= data.p()) throw InputError("support index outside [0, p)");
    }
    const auto s = static_cast<Eigen::Index>(support.size());
    SandwichCovariance out;
    out.support = support;
    out.v1 = MatrixXd::Zero(s, s);
    out.v2 = MatrixXd::Zero(s, s);
    MatrixXd x_s(s, data.l());
    for (int i = 0; i < data.n(); ++i) {
        const auto& block = data[i];
        for (Eigen::Index a = 0; a < s; ++a) {
            x_s.row(a) = block.x.row(support[static_cast<size_t>(a)]);
        }
        const VectorXd eta = block.x.transpose() * beta;
        VectorXd d1(block.l());
        VectorXd r(block.l());
        for (int k = 0; k < block.l(); ++k) {
            const auto v = link.eval(eta(k));
            d1(k) = v.d1;
            r(k) = block.y(k) - v.g;
        }
        const MatrixXd& w = inverses[static_cast<size_t>(i)];
        const MatrixXd a = x_s * d1.asDiagonal() * w;  // X_S D W
        out.v1.noalias() += a * d1.asDiagonal() * x_s.transpose();
        if (middles) {
            out.v2.noalias() += a * (*middles)[static_cast<size_t>(i)] * a.transpose();
        } else {
            const VectorXd ar = a * r;
            out.v2.noalias() += ar * ar.transpose();
        }
    }
    const double inv_n = 1.0 / static_cast<double>(data.n());
    out.v1 = symmetrize(out.v1 * inv_n);
    out.v2 = symmetrize(out.v2 * inv_n);

    Eigen::LDLT<MatrixXd> ldlt(out.v1);
    const double scale = std::max(out.v1.diagonal().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
        throw NumericalError("V1 is singular; the support is too large for the sample");
    }
    const MatrixXd v1_inv = ldlt.solve(MatrixXd::Identity(s, s));
    out.omega = symmetrize(v1_inv * out.v2 * v1_inv);
    return out;
}

MatrixXd restrict_to(const MatrixXd& omega, const IndexSet& support, const IndexSet& m_set) {
    std::vector<Eigen::Index> pos;
    for (int j : m_set) {
        const auto it = std::lower_bound(support.begin(), support.end(), j);
        if (it == support.end() || *it != j) {
            throw InputError("index " + std::to_string(j) + " is not in the support");
        }
        pos.push_back(it - support.begin());
    }
    const auto m = static_cast<Eigen::Index>(pos.size());
    MatrixXd out(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            out(a, b) = omega(pos[static_cast<size_t>(a)], pos[static_cast<size_t>(b)]);
        }
    }
    return out;
}

WaldReport wald(const VectorXd& beta_m, const HypothesisSpec& hyp, const MatrixXd& omega_m, int n,
                const std::optional<VectorXd>& drift) {
    hyp.validate();
    if (beta_m.size() != hyp.m()) throw InputError("beta_M has wrong length");
    if (n < 1) throw InputError("sample size must be positive");
    const auto factor = contrast_factor(hyp.C, omega_m);
    WaldReport out;
    out.df = hyp.r();
    out.contrast = hyp.C * beta_m - hyp.t;
    out.statistic = std::max(0.0, n * out.contrast.dot(factor.solve(out.contrast)));
    out.p_value = chi2_sf(out.statistic, out.df);
    if (drift) {
        if (drift->size() != hyp.r()) throw InputError("drift must have length r");
        out.noncentrality = std::max(0.0, drift->dot(factor.solve(*drift)));
    } else {
        out.noncentrality = std::max(0.0, out.statistic - out.df);
    }
    return out;
}

double noncentrality(const VectorXd& drift, const MatrixXd& C, const MatrixXd& omega) {
    if (drift.size() != C.rows()) throw InputError("drift must have one entry per row of C");
    const auto factor = contrast_factor(C, omega);
    return std::max(0.0, drift.dot(factor.solve(drift)));
}

PowerComparison power_compare(const MatrixXd& omega_crossfit, const MatrixXd& omega_initial,
                              const MatrixXd& C, const VectorXd& drift, double level, double tol) {
    if (omega_crossfit.rows() != omega_initial.rows() ||
        omega_crossfit.cols() != omega_initial.cols()) {
        throw InputError("both covariances must live on the same support");
    }
    if (!(level > 0.0 && level < 1.0)) throw InputError("level must lie in (0, 1)");
    PowerComparison out;
    out.delta_crossfit = noncentrality(drift, C, omega_crossfit);
    out.delta_initial = noncentrality(drift, C, omega_initial);
    const double df = static_cast<double>(C.rows());
    const double q = chi2_upper_quantile(level, df);
    out.power_crossfit = chi2_sf(q, df, out.delta_crossfit);
    out.power_initial = chi2_sf(q, df, out.delta_initial);
    out.dominance = out.delta_crossfit >= out.delta_initial - tol;
    return out;
}

}  // namespace pgee
