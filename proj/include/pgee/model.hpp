#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace pgee {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sorted, duplicate-free list of 0-based coordinate indices.
using IndexSet = std::vector<int>;

IndexSet make_index_set(std::vector<int> indices, int p);
bool contains(const IndexSet& set, int j);
IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet complement(const IndexSet& set, int p);

enum class LinkKind { identity, log, logit, custom };

/// Inverse link g with its first three derivatives.
///
/// The built-in links are evaluated in closed form. A custom link carries
/// user callables for g and all three derivatives; the solver needs the
/// second derivative for the Jacobian and the third is kept so that the
/// Lipschitz conditions on the derivatives can be audited.
class LinkFunction {
public:
    using ScalarFn = std::function<double(double)>;

    struct Values {
        double g;
        double d1;
        double d2;
    };

    static LinkFunction identity();
    static LinkFunction log();
    static LinkFunction logit();
    static LinkFunction custom(std::string name, ScalarFn g, ScalarFn d1, ScalarFn d2,
                               ScalarFn d3);
    // "identity" | "log" | "logit"; throws InputError otherwise.
    static LinkFunction from_name(std::string_view name);

    LinkKind kind() const { return kind_; }
    const std::string& name() const { return name_; }

    double value(double eta) const;
    double first(double eta) const;
    double second(double eta) const;
    double third(double eta) const;
    Values eval(double eta) const;

private:
    LinkFunction(LinkKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

    LinkKind kind_;
    std::string name_;
    ScalarFn g_, d1_, d2_, d3_;
};

/// One unit: response y (length l) and design x (p x l); column k is X_ik.
struct ObservationBlock {
    VectorXd y;
    MatrixXd x;
    int unit_id = 0;

    ObservationBlock() = default;
    ObservationBlock(VectorXd y_, MatrixXd x_, int id = 0);

    int p() const { return static_cast<int>(x.rows()); }
    int l() const { return static_cast<int>(y.size()); }
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<ObservationBlock> blocks);

    int n() const { return static_cast<int>(blocks_.size()); }
    int p() const { return p_; }
    int l() const { return l_; }
    const ObservationBlock& operator[](int i) const { return blocks_[static_cast<size_t>(i)]; }
    const std::vector<ObservationBlock>& blocks() const { return blocks_; }

    // [X_1 ... X_n], p x (n l); column i*l + k is X_ik.
    const MatrixXd& stacked_design() const { return stacked_x_; }
    // (Y_1', ..., Y_n')', length n l.
    const VectorXd& stacked_response() const { return stacked_y_; }

    // Units at the given positions; unit_id is preserved.
    Dataset subset(const std::vector<int>& positions) const;

    // Warnings for columns X_ik whose Euclidean norm exceeds `bound`.
    std::vector<std::string> check_design_bound(double bound = 1e6) const;

private:
    std::vector<ObservationBlock> blocks_;
    int p_ = 0;
    int l_ = 0;
    MatrixXd stacked_x_;
    VectorXd stacked_y_;
};

struct ParameterVector {
    VectorXd beta;
    IndexSet m_set;
    IndexSet support;

    static ParameterVector from_beta(VectorXd beta, IndexSet m_set);
};

// Linear predictors X_ik' beta, k = 1..l.
VectorXd linear_predictor(const ObservationBlock& block, const VectorXd& beta);

VectorXd evaluate_mean(const ObservationBlock& block, const VectorXd& beta,
                       const LinkFunction& link);

// R_i(beta) = Y_i - g(X_i' beta).
VectorXd residual(const ObservationBlock& block, const VectorXd& beta, const LinkFunction& link);

// D_i(beta) = diag(g'(X_i1' beta), ..., g'(X_il' beta)).
Eigen::DiagonalMatrix<double, Eigen::Dynamic> mean_derivative_matrix(
    const ObservationBlock& block, const VectorXd& beta, const LinkFunction& link);

}  // namespace pgee
