#pragma once

#include "pgee/model.hpp"
#include "pgee/rng.hpp"

#include <cmath>
#include <vector>

namespace testing {

using pgee::Dataset;
using pgee::MatrixXd;
using pgee::ObservationBlock;
using pgee::VectorXd;

inline MatrixXd uniform_matrix(pgee::Rng& rng, int rows, int cols, double lo = -1.0,
                               double hi = 1.0) {
    MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

inline VectorXd normal_vector(pgee::Rng& rng, int size) {
    VectorXd v(size);
    for (int i = 0; i < size; ++i) v(i) = rng.normal();
    return v;
}

inline MatrixXd random_spd(pgee::Rng& rng, int dim) {
    const MatrixXd a = uniform_matrix(rng, dim, dim);
    return a * a.transpose() + 0.5 * MatrixXd::Identity(dim, dim);
}

// Units with U(-1, 1) designs and responses y = x' beta + noise_sd * N(0, 1).
inline Dataset linear_dataset(pgee::Rng& rng, int n, int p, int l, const VectorXd& beta,
                              double noise_sd) {
    std::vector<ObservationBlock> blocks;
    for (int i = 0; i < n; ++i) {
        MatrixXd x = uniform_matrix(rng, p, l);
        VectorXd y = x.transpose() * beta + noise_sd * normal_vector(rng, l);
        blocks.emplace_back(std::move(y), std::move(x), i + 1);
    }
    return Dataset(std::move(blocks));
}

inline double rel_error(const MatrixXd& a, const MatrixXd& b) {
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testing
