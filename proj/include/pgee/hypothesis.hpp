#pragma once

#include "pgee/model.hpp"

namespace pgee {

// H0: C beta_M = t, with C an r x m matrix of full row rank.
struct HypothesisSpec {
    MatrixXd C;
    VectorXd t;
    IndexSet m_set;

    int r() const { return static_cast<int>(C.rows()); }
    int m() const { return static_cast<int>(m_set.size()); }

    // Throws InputError on shape mismatch or rank(C) < r.
    void validate() const;
};

}  // namespace pgee
