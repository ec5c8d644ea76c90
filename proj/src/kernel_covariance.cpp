#include "pgee/kernel_covariance.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

namespace pgee {

double bandwidth_rule(int n, double nu, int l, int a_size, double c_h) {
    if (n < 2) throw InputError("bandwidth rule needs n >= 2");
    if (!(nu > 0.0 && nu <= 1.0)) throw InputError("smoothness order must lie in (0, 1]");
    if (l < 1 || a_size < 1) throw InputError("bandwidth rule needs l >= 1 and |A| >= 1");
    if (!(c_h > 0.0)) throw InputError("bandwidth constant must be positive");
    const double exponent = -1.0 / (4.0 * nu + 2.0 * l * a_size);
    return c_h * std::pow(static_cast<double>(n), exponent);
}

VectorXd active_features(const ObservationBlock& block, const IndexSet& active_set) {
    const int a = static_cast<int>(active_set.size());
    const auto l = static_cast<int>(block.x.cols());
    VectorXd z(l * a);
    for (int k = 0; k < l; ++k) {
        for (int s = 0; s < a; ++s) z(k * a + s) = block.x(active_set[static_cast<size_t>(s)], k);
    }
    return z;
}

CovarianceModel::CovarianceModel(IndexSet active_set, int l, double bandwidth,
                                 std::vector<TrainingPair> training, int fold_id,
                                 const KernelConfig& cfg)
    : active_set_(std::move(active_set)),
      l_(l),
      bandwidth_(bandwidth),
      training_(std::move(training)),
      fold_id_(fold_id),
      cfg_(cfg) {
    if (training_.empty()) throw InputError("covariance model needs training pairs");
    if (!(bandwidth_ > 0.0)) throw InputError("bandwidth must be positive");
    const int d = feature_dim();
    for (const auto& t : training_) {
        if (t.z.size() != d || t.outer.rows() != l_ || t.outer.cols() != l_) {
            throw InputError("training pair has inconsistent dimensions");
        }
        pooled_trace_ += t.outer.trace();
        training_ids_.push_back(t.unit_id);
    }
    pooled_trace_ /= static_cast<double>(training_.size());
    std::sort(training_ids_.begin(), training_ids_.end());

    scales_ = VectorXd::Ones(d);
    if (cfg_.scale_by_sd && training_.size() > 1) {
        for (int c = 0; c < d; ++c) {
            double mean = 0.0;
            for (const auto& t : training_) mean += t.z(c);
            mean /= static_cast<double>(training_.size());
            double ss = 0.0;
            for (const auto& t : training_) ss += (t.z(c) - mean) * (t.z(c) - mean);
            const double sd = std::sqrt(ss / static_cast<double>(training_.size() - 1));
            if (sd > 0.0) scales_(c) = sd;
        }
    }
}

CovarianceModel CovarianceModel::fit(const Dataset& fold, const std::vector<VectorXd>& residuals,
                                     IndexSet active_set, int fold_id, const KernelConfig& cfg) {
    if (static_cast<int>(residuals.size()) != fold.n()) {
        throw InputError("one residual vector per unit is required");
    }
    active_set = make_index_set(std::move(active_set), fold.p());
    std::vector<TrainingPair> pairs;
    pairs.reserve(residuals.size());
    for (int i = 0; i < fold.n(); ++i) {
        const auto& r = residuals[static_cast<size_t>(i)];
        if (r.size() != fold.l()) throw InputError("residual vector has wrong length");
        pairs.push_back({active_features(fold[i], active_set), r * r.transpose(), fold[i].unit_id});
    }
    const int a_size = static_cast<int>(active_set.size());
    const double h =
        a_size == 0 ? 1.0 : bandwidth_rule(fold.n(), cfg.nu, fold.l(), a_size, cfg.c_h);
    return CovarianceModel(std::move(active_set), fold.l(), h, std::move(pairs), fold_id, cfg);
}

bool CovarianceModel::trained_on(int unit_id) const {
    return std::binary_search(training_ids_.begin(), training_ids_.end(), unit_id);
}

VectorXd CovarianceModel::log_kernel(const VectorXd& x) const {
    if (x.size() != feature_dim()) throw InputError("evaluation point has wrong dimension");
    const auto m = training_.size();
    VectorXd logw(static_cast<Eigen::Index>(m));
    const VectorXd inv_scale = (scales_ * bandwidth_).cwiseInverse();
    for (size_t i = 0; i < m; ++i) {
        logw(static_cast<Eigen::Index>(i)) =
            -0.5 * (training_[i].z - x).cwiseProduct(inv_scale).squaredNorm();
    }
    return logw;
}

VectorXd CovarianceModel::weights(const VectorXd& x) const {
    const VectorXd logw = log_kernel(x);
    VectorXd w = (logw.array() - logw.maxCoeff()).exp();
    return w / w.sum();
}

double CovarianceModel::jitter_floor(const MatrixXd& raw) const {
    double scale = raw.trace() / l_;
    if (!(scale > 0.0)) scale = pooled_trace_ / l_;
    if (!(scale > 0.0)) scale = 1.0;
    return cfg_.jitter_rel * scale;
}

CovarianceEvaluation CovarianceModel::evaluate_detail(const VectorXd& x) const {
    if (x.size() != feature_dim()) throw InputError("evaluation point has wrong dimension");
    CovarianceEvaluation out;
    out.sigma = MatrixXd::Zero(l_, l_);

    // Unnormalized Gaussian log-weights; if even the largest is below
    // log(DBL_MIN) every weight would underflow.
    const double norm_const = -0.5 * feature_dim() * std::log(2.0 * M_PI) -
                              feature_dim() * std::log(bandwidth_) -
                              scales_.array().log().sum();
    const VectorXd logw = log_kernel(x).array() + norm_const;
    Eigen::Index nearest = 0;
    const double best_log = logw.maxCoeff(&nearest);
    if (best_log < std::log(DBL_MIN)) {
        out.nearest_neighbor = true;
        out.sigma = training_[static_cast<size_t>(nearest)].outer;
    } else {
        VectorXd w = (logw.array() - best_log).exp();
        w /= w.sum();
        for (size_t i = 0; i < training_.size(); ++i) {
            out.sigma.noalias() += w(static_cast<Eigen::Index>(i)) * training_[i].outer;
        }
    }
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();

    const double floor = jitter_floor(out.sigma);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out.sigma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < floor) {
        out.sigma.diagonal().array() += floor;
        out.jittered = true;
    }
    return out;
}

MatrixXd CovarianceModel::inverse_at(const VectorXd& x) const {
    const MatrixXd sigma = evaluate(x);
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("estimated covariance is not positive definite after jitter");
    }
    MatrixXd inv = llt.solve(MatrixXd::Identity(l_, l_));
    return 0.5 * (inv + inv.transpose());
}

double sup_error(const CovarianceModel& model,
                 const std::function<MatrixXd(const VectorXd&)>& truth,
                 const std::vector<VectorXd>& grid) {
    double worst = 0.0;
    for (const auto& x : grid) worst = std::max(worst, (model.evaluate(x) - truth(x)).norm());
    return worst;
}

}  // namespace pgee
