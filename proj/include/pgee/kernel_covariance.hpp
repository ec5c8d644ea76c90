#pragma once

#include "pgee/model.hpp"

#include <functional>
#include <vector>

namespace pgee {

struct KernelConfig {
    double nu = 1.0;            // Hoelder order of the covariance function, in (0, 1]
    double c_h = 1.0;           // bandwidth constant
    double jitter_rel = 1e-6;   // eigenvalue floor relative to trace / l
    bool scale_by_sd = true;    // per-dimension bandwidth h * sd_d
};

// c_h * n^{-1/(4 nu + 2 l a_size)}.
double bandwidth_rule(int n, double nu, int l, int a_size, double c_h = 1.0);

struct TrainingPair {
    VectorXd z;      // vec(X_{i,A}): for each k, the active rows of column k
    MatrixXd outer;  // R_i R_i'
    int unit_id = 0;
};

struct CovarianceEvaluation {
    MatrixXd sigma;
    bool jittered = false;
    bool nearest_neighbor = false;  // every Gaussian weight underflowed
};

// vec(X_{i,A}) in the layout used by CovarianceModel.
VectorXd active_features(const ObservationBlock& block, const IndexSet& active_set);

/// Nadaraya-Watson estimate of Cov(Y | X_A) from residual outer products.
///
/// Gaussian product kernel with H = h^2 diag(sd_d^2) (sd_d = 1 unless
/// scale_by_sd). Weights are computed in log space. An empty active set
/// reduces the estimate to the pooled mean of the outer products.
/// Immutable after construction.
class CovarianceModel {
public:
    CovarianceModel(IndexSet active_set, int l, double bandwidth, std::vector<TrainingPair> training,
                    int fold_id, const KernelConfig& cfg = {});

    /// Builds the training pairs from `fold` and the matching residuals and
    /// picks the bandwidth by bandwidth_rule().
    static CovarianceModel fit(const Dataset& fold, const std::vector<VectorXd>& residuals,
                               IndexSet active_set, int fold_id, const KernelConfig& cfg = {});

    const IndexSet& active_set() const { return active_set_; }
    int l() const { return l_; }
    int feature_dim() const { return l_ * static_cast<int>(active_set_.size()); }
    double bandwidth() const { return bandwidth_; }
    const VectorXd& scales() const { return scales_; }
    int fold_id() const { return fold_id_; }
    int training_size() const { return static_cast<int>(training_.size()); }
    const std::vector<TrainingPair>& training() const { return training_; }
    // Sorted unit ids of the training pairs.
    const std::vector<int>& training_ids() const { return training_ids_; }
    bool trained_on(int unit_id) const;

    VectorXd features(const ObservationBlock& block) const {
        return active_features(block, active_set_);
    }

    VectorXd weights(const VectorXd& x) const;
    CovarianceEvaluation evaluate_detail(const VectorXd& x) const;
    MatrixXd evaluate(const VectorXd& x) const { return evaluate_detail(x).sigma; }
    MatrixXd inverse_at(const VectorXd& x) const;

    // Eigenvalue floor applied at x.
    double jitter_floor(const MatrixXd& raw) const;

private:
    // -||(z_i - x) / (h sd)||^2 / 2 for every training pair.
    VectorXd log_kernel(const VectorXd& x) const;

    IndexSet active_set_;
    int l_;
    double bandwidth_;
    VectorXd scales_;
    std::vector<TrainingPair> training_;
    std::vector<int> training_ids_;
    int fold_id_;
    KernelConfig cfg_;
    double pooled_trace_ = 0.0;
};

// max over grid of ||Sigma_hat(x) - truth(x)||_F; 0 for an empty grid.
double sup_error(const CovarianceModel& model,
                 const std::function<MatrixXd(const VectorXd&)>& truth,
                 const std::vector<VectorXd>& grid);

}  // namespace pgee
