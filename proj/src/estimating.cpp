#include "pgee/estimating.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <numeric>

namespace pgee {

int EvaluationAudit::violations() const {
    return static_cast<int>(
        std::count_if(entries.begin(), entries.end(), [](const Entry& e) { return e.violation; }));
}

WorkingCovariance WorkingCovariance::identity() { return {}; }

WorkingCovariance WorkingCovariance::fixed(const MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
        throw InputError("fixed working covariance must be square");
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-12)) {
        throw InputError("fixed working covariance must be symmetric");
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw InputError("fixed working covariance must be positive definite");
    }
    WorkingCovariance out;
    out.kind_ = Kind::fixed;
    out.fixed_inverse_ = llt.solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
    out.fixed_inverse_ = 0.5 * (out.fixed_inverse_ + out.fixed_inverse_.transpose()).eval();
    return out;
}

WorkingCovariance WorkingCovariance::estimated(std::shared_ptr<const CovarianceModel> model) {
    if (!model) throw InputError("estimated working covariance needs a model");
    WorkingCovariance out;
    out.kind_ = Kind::estimated;
    out.model_ = std::move(model);
    return out;
}

std::vector<MatrixXd> WorkingCovariance::unit_inverses(const Dataset& data,
                                                       EvaluationAudit* audit) const {
    std::vector<MatrixXd> out;
    out.reserve(static_cast<size_t>(data.n()));
    switch (kind_) {
        case Kind::identity:
            out.assign(static_cast<size_t>(data.n()), MatrixXd::Identity(data.l(), data.l()));
            break;
        case Kind::fixed:
            if (fixed_inverse_.rows() != data.l()) {
                throw InputError("fixed working covariance has wrong dimension");
            }
            out.assign(static_cast<size_t>(data.n()), fixed_inverse_);
            break;
        case Kind::estimated:
            if (model_->l() != data.l()) throw InputError("covariance model has wrong dimension");
            for (const auto& block : data.blocks()) {
                out.push_back(model_->inverse_at(model_->features(block)));
                if (audit) {
                    audit->entries.push_back(
                        {model_->fold_id(), block.unit_id, model_->trained_on(block.unit_id)});
                }
            }
            break;
    }
    return out;
}

namespace {

void check_inputs(const Dataset& data, const VectorXd& beta,
                  const std::vector<MatrixXd>& inverses) {
    if (beta.size() != data.p()) {
        throw InputError("beta has length " + std::to_string(beta.size()) + ", expected " +
                         std::to_string(data.p()));
    }
    if (static_cast<int>(inverses.size()) != data.n()) {
        throw InputError("one inverse covariance per unit is required");
    }
}

// Stacked per-unit pieces shared by the function and its Jacobian:
// score = blocks D_i W_i R_i, curvature_i = D_i W_i D_i - diag(g'' * W_i R_i).
struct StackedTerms {
    VectorXd score;
    std::vector<MatrixXd> curvature;
};

StackedTerms stacked_terms(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                           const std::vector<MatrixXd>& inverses, bool need_curvature) {
    const int l = data.l();
    const VectorXd eta = data.stacked_design().transpose() * beta;
    const VectorXd& y = data.stacked_response();
    StackedTerms t;
    t.score.resize(eta.size());
    if (need_curvature) t.curvature.resize(static_cast<size_t>(data.n()));
    VectorXd d1(l), d2(l), r(l), wr(l);
    for (int i = 0; i < data.n(); ++i) {
        const Eigen::Index off = static_cast<Eigen::Index>(i) * l;
        for (int k = 0; k < l; ++k) {
            const auto v = link.eval(eta(off + k));
            r(k) = y(off + k) - v.g;
            d1(k) = v.d1;
            d2(k) = v.d2;
        }
        const MatrixXd& w = inverses[static_cast<size_t>(i)];
        wr.noalias() = w * r;
        t.score.segment(off, l) = d1.cwiseProduct(wr);
        if (need_curvature) {
            MatrixXd& c = t.curvature[static_cast<size_t>(i)];
            c = d1.asDiagonal() * w * d1.asDiagonal();
            c.diagonal() -= d2.cwiseProduct(wr);
        }
    }
    return t;
}

// -(1/n) sum_i X_{i,rows} C_i X_{i,cols}'.
MatrixXd stacked_jacobian(const Dataset& data, const StackedTerms& t, const IndexSet& rows,
                          const IndexSet& cols) {
    const int l = data.l();
    const MatrixXd& x = data.stacked_design();
    const MatrixXd x_cols = x(cols, Eigen::all);
    MatrixXd weighted(x_cols.rows(), x_cols.cols());
    for (int i = 0; i < data.n(); ++i) {
        const Eigen::Index off = static_cast<Eigen::Index>(i) * l;
        weighted.middleCols(off, l).noalias() =
            x_cols.middleCols(off, l) * t.curvature[static_cast<size_t>(i)].transpose();
    }
    MatrixXd jac = rows.size() == static_cast<size_t>(data.p())
                       ? MatrixXd(x * weighted.transpose())
                       : MatrixXd(x(rows, Eigen::all) * weighted.transpose());
    return jac / -static_cast<double>(data.n());
}

}  // namespace

VectorXd estimating_function(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const std::vector<MatrixXd>& inverses) {
    check_inputs(data, beta, inverses);
    const auto t = stacked_terms(data, beta, link, inverses, false);
    return data.stacked_design() * t.score / static_cast<double>(data.n());
}

VectorXd estimating_function(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const WorkingCovariance& cov) {
    return estimating_function(data, beta, link, cov.unit_inverses(data));
}

MatrixXd estimating_jacobian(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const std::vector<MatrixXd>& inverses, const IndexSet& cols) {
    check_inputs(data, beta, inverses);
    for (int j : cols) {
        if (j < 0 || j >= data.p()) throw InputError("Jacobian column outside [0, p)");
    }
    IndexSet all(static_cast<size_t>(data.p()));
    std::iota(all.begin(), all.end(), 0);
    const auto t = stacked_terms(data, beta, link, inverses, true);
    return stacked_jacobian(data, t, all, cols);
}

MatrixXd estimating_jacobian(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const WorkingCovariance& cov, const IndexSet& cols) {
    return estimating_jacobian(data, beta, link, cov.unit_inverses(data), cols);
}

EstimatingSystem estimating_system(const Dataset& data, const VectorXd& beta,
                                   const LinkFunction& link, const std::vector<MatrixXd>& inverses,
                                   const IndexSet& support) {
    check_inputs(data, beta, inverses);
    for (int j : support) {
        if (j < 0 || j >= data.p()) throw InputError("support index outside [0, p)");
    }
    const auto t = stacked_terms(data, beta, link, inverses, true);
    EstimatingSystem out;
    out.u = data.stacked_design() * t.score / static_cast<double>(data.n());
    out.jac_ss = stacked_jacobian(data, t, support, support);
    return out;
}

}  // namespace pgee
