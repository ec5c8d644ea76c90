#pragma once

#include "pgee/kernel_covariance.hpp"
#include "pgee/model.hpp"

#include <memory>
#include <vector>

namespace pgee {

/// Records every covariance-model evaluation made while building unit
/// weights, so cross-fitting can prove which fold each weight came from.
struct EvaluationAudit {
    struct Entry {
        int model_fold;
        int query_unit;
        bool violation;  // the queried unit is one of the model's training units
    };
    std::vector<Entry> entries;

    int violations() const;
};

/// Working covariance used to weight the estimating equations.
class WorkingCovariance {
public:
    enum class Kind { identity, fixed, estimated };

    static WorkingCovariance identity();
    // Throws InputError unless `sigma` is symmetric positive definite.
    static WorkingCovariance fixed(const MatrixXd& sigma);
    static WorkingCovariance estimated(std::shared_ptr<const CovarianceModel> model);

    Kind kind() const { return kind_; }
    const CovarianceModel* model() const { return model_.get(); }

    // Sigma(X_i)^{-1} for every unit of `data`.
    std::vector<MatrixXd> unit_inverses(const Dataset& data, EvaluationAudit* audit = nullptr) const;

private:
    Kind kind_ = Kind::identity;
    MatrixXd fixed_inverse_;
    std::shared_ptr<const CovarianceModel> model_;
};

/// U_n(beta) = (1/n) sum_i X_i D_i(beta) W_i {Y_i - g(X_i' beta)} with
/// W_i = Sigma_i^{-1} supplied per unit.
VectorXd estimating_function(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const std::vector<MatrixXd>& inverses);
VectorXd estimating_function(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const WorkingCovariance& cov);

/// dU_n / d beta_cols, a p x |cols| matrix:
///
///   (1/n) sum_i X_i [diag(g''(eta_i) * (W_i R_i)) - D_i W_i D_i] X_{i,cols}'
///
/// The first term carries the residual and the second derivative of the
/// link; it vanishes for the identity link and at zero residuals. W_i need
/// not be diagonal.
MatrixXd estimating_jacobian(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const std::vector<MatrixXd>& inverses, const IndexSet& cols);
MatrixXd estimating_jacobian(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                             const WorkingCovariance& cov, const IndexSet& cols);

struct EstimatingSystem {
    VectorXd u;        // full U_n(beta), length p
    MatrixXd jac_ss;   // dU_S / d beta_S
};

// U_n and the square Jacobian block on `support`, in one pass over the units.
EstimatingSystem estimating_system(const Dataset& data, const VectorXd& beta,
                                   const LinkFunction& link, const std::vector<MatrixXd>& inverses,
                                   const IndexSet& support);

}  // namespace pgee
