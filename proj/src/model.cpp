#include "pgee/model.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pgee {

IndexSet make_index_set(std::vector<int> indices, int p) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (int j : indices) {
        if (j < 0 || j >= p) {
            throw InputError("index " + std::to_string(j) + " outside [0, " + std::to_string(p) +
                             ")");
        }
    }
    return indices;
}

bool contains(const IndexSet& set, int j) {
    return std::binary_search(set.begin(), set.end(), j);
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IndexSet complement(const IndexSet& set, int p) {
    IndexSet out;
    for (int j = 0; j < p; ++j) {
        if (!contains(set, j)) out.push_back(j);
    }
    return out;
}

namespace {

double sigmoid(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

}  // namespace

LinkFunction LinkFunction::identity() { return {LinkKind::identity, "identity"}; }
LinkFunction LinkFunction::log() { return {LinkKind::log, "log"}; }
LinkFunction LinkFunction::logit() { return {LinkKind::logit, "logit"}; }

LinkFunction LinkFunction::custom(std::string name, ScalarFn g, ScalarFn d1, ScalarFn d2,
                                  ScalarFn d3) {
    if (!g || !d1 || !d2 || !d3) {
        throw InputError("custom link requires g and its first three derivatives");
    }
    LinkFunction link(LinkKind::custom, std::move(name));
    link.g_ = std::move(g);
    link.d1_ = std::move(d1);
    link.d2_ = std::move(d2);
    link.d3_ = std::move(d3);
    return link;
}

LinkFunction LinkFunction::from_name(std::string_view name) {
    if (name == "identity") return identity();
    if (name == "log") return log();
    if (name == "logit") return logit();
    throw InputError("unknown link '" + std::string(name) + "'");
}

double LinkFunction::value(double eta) const {
    switch (kind_) {
        case LinkKind::identity: return eta;
        case LinkKind::log: return std::exp(eta);
        case LinkKind::logit: return sigmoid(eta);
        case LinkKind::custom: return g_(eta);
    }
    return 0.0;
}

double LinkFunction::first(double eta) const {
    switch (kind_) {
        case LinkKind::identity: return 1.0;
        case LinkKind::log: return std::exp(eta);
        case LinkKind::logit: {
            const double mu = sigmoid(eta);
            return mu * (1.0 - mu);
        }
        case LinkKind::custom: return d1_(eta);
    }
    return 0.0;
}

double LinkFunction::second(double eta) const {
    switch (kind_) {
        case LinkKind::identity: return 0.0;
        case LinkKind::log: return std::exp(eta);
        case LinkKind::logit: {
            const double mu = sigmoid(eta);
            return mu * (1.0 - mu) * (1.0 - 2.0 * mu);
        }
        case LinkKind::custom: return d2_(eta);
    }
    return 0.0;
}

double LinkFunction::third(double eta) const {
    switch (kind_) {
        case LinkKind::identity: return 0.0;
        case LinkKind::log: return std::exp(eta);
        case LinkKind::logit: {
            const double mu = sigmoid(eta);
            return mu * (1.0 - mu) * (1.0 - 6.0 * mu + 6.0 * mu * mu);
        }
        case LinkKind::custom: return d3_(eta);
    }
    return 0.0;
}

LinkFunction::Values LinkFunction::eval(double eta) const {
    switch (kind_) {
        case LinkKind::identity: return {eta, 1.0, 0.0};
        case LinkKind::log: {
            const double e = std::exp(eta);
            return {e, e, e};
        }
        case LinkKind::logit: {
            const double mu = sigmoid(eta);
            const double d1 = mu * (1.0 - mu);
            return {mu, d1, d1 * (1.0 - 2.0 * mu)};
        }
        case LinkKind::custom: return {g_(eta), d1_(eta), d2_(eta)};
    }
    return {0.0, 0.0, 0.0};
}

ObservationBlock::ObservationBlock(VectorXd y_, MatrixXd x_, int id)
    : y(std::move(y_)), x(std::move(x_)), unit_id(id) {
    if (y.size() < 1) throw InputError("observation block needs at least one measurement");
    if (x.cols() != y.size()) {
        std::ostringstream msg;
        msg << "design has " << x.cols() << " columns but response has " << y.size()
            << " entries";
        throw InputError(msg.str());
    }
    if (x.rows() < 1) throw InputError("design needs at least one covariate");
    if (!y.allFinite() || !x.allFinite()) {
        throw InputError("non-finite value in unit " + std::to_string(id));
    }
}

Dataset::Dataset(std::vector<ObservationBlock> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw InputError("dataset is empty");
    p_ = blocks_.front().p();
    l_ = blocks_.front().l();
    for (const auto& b : blocks_) {
        if (b.p() != p_ || b.l() != l_) {
            throw InputError("unit " + std::to_string(b.unit_id) +
                             " has dimensions different from the first unit");
        }
    }
    stacked_x_.resize(p_, static_cast<Eigen::Index>(n()) * l_);
    stacked_y_.resize(static_cast<Eigen::Index>(n()) * l_);
    for (int i = 0; i < n(); ++i) {
        stacked_x_.middleCols(static_cast<Eigen::Index>(i) * l_, l_) = blocks_[static_cast<size_t>(i)].x;
        stacked_y_.segment(static_cast<Eigen::Index>(i) * l_, l_) = blocks_[static_cast<size_t>(i)].y;
    }
}

Dataset Dataset::subset(const std::vector<int>& positions) const {
    std::vector<ObservationBlock> out;
    out.reserve(positions.size());
    for (int i : positions) {
        if (i < 0 || i >= n()) throw InputError("subset position out of range");
        out.push_back(blocks_[static_cast<size_t>(i)]);
    }
    return Dataset(std::move(out));
}

std::vector<std::string> Dataset::check_design_bound(double bound) const {
    std::vector<std::string> warnings;
    for (const auto& b : blocks_) {
        for (int k = 0; k < l_; ++k) {
            const double norm = b.x.col(k).norm();
            if (norm > bound) {
                std::ostringstream msg;
                msg << "unit " << b.unit_id << " measurement " << (k + 1)
                    << ": covariate norm " << norm << " exceeds bound " << bound;
                warnings.push_back(msg.str());
            }
        }
    }
    return warnings;
}

ParameterVector ParameterVector::from_beta(VectorXd beta, IndexSet m_set) {
    const int p = static_cast<int>(beta.size());
    ParameterVector out;
    out.m_set = make_index_set(std::move(m_set), p);
    for (int j = 0; j < p; ++j) {
        if (beta(j) != 0.0) out.support.push_back(j);
    }
    out.beta = std::move(beta);
    return out;
}

VectorXd linear_predictor(const ObservationBlock& block, const VectorXd& beta) {
    if (beta.size() != block.p()) {
        throw InputError("beta has length " + std::to_string(beta.size()) + ", expected " +
                         std::to_string(block.p()));
    }
    return block.x.transpose() * beta;
}

VectorXd evaluate_mean(const ObservationBlock& block, const VectorXd& beta,
                       const LinkFunction& link) {
    VectorXd eta = linear_predictor(block, beta);
    for (Eigen::Index k = 0; k < eta.size(); ++k) eta(k) = link.value(eta(k));
    return eta;
}

VectorXd residual(const ObservationBlock& block, const VectorXd& beta, const LinkFunction& link) {
    return block.y - evaluate_mean(block, beta, link);
}

Eigen::DiagonalMatrix<double, Eigen::Dynamic> mean_derivative_matrix(
    const ObservationBlock& block, const VectorXd& beta, const LinkFunction& link) {
    VectorXd eta = linear_predictor(block, beta);
    for (Eigen::Index k = 0; k < eta.size(); ++k) eta(k) = link.first(eta(k));
    return eta.asDiagonal();
}

}  // namespace pgee
