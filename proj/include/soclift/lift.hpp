#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "soclift/filter.hpp"

namespace soclift {

inline int halfvec_len(int n) { return n * (n + 1) / 2; }

// Side length n such that len == n(n+1)/2; throws ConfigError otherwise.
int halfvec_dim(int len);

// Lower Cholesky factor of a symmetric PD matrix, stacked column by column
// from the left, keeping the on-and-below-diagonal entries. Index map for
// n = 3: (L11, L21, L31, L22, L32, L33).
Eigen::VectorXd chol_halfvec(const Eigen::MatrixXd& S);

// Rebuilds L from the stacked entries and returns L L^T. Requires a
// triangular-number length and strictly positive implied diagonal.
Eigen::MatrixXd chol_halfvec_inverse(const Eigen::VectorXd& l);

// Mean-and-covariance tuple flattened to a single vector
// z = [mean; chol_halfvec(cov)], of length r + r(r+1)/2.
struct LiftedState {
    Eigen::VectorXd z;
    int state_dim = 0;

    int dim() const { return static_cast<int>(z.size()); }
    Eigen::VectorXd mean_part() const { return z.head(state_dim); }
    Eigen::VectorXd chol_part() const { return z.tail(z.size() - state_dim); }
};

LiftedState lift_state(const InfoState& p);
InfoState unlift_state(const LiftedState& e);

// Quadratic cost carried across the three representations:
//   Q, R            on (state, input)
//   Q_halfvec       on the Cholesky half-vector, so that
//                   ell^T Q_halfvec ell = tr(Q * cov)
//   Q_lifted        block-diag(Q, Q_halfvec) on the lifted vector
//   Q_dict          Q_lifted zero-padded to the dictionary dimension
struct CostMatrices {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    Eigen::MatrixXd Q_halfvec;
    Eigen::MatrixXd Q_lifted;
    Eigen::MatrixXd Q_dict;
};

// Q_halfvec = block-diag of the trailing principal submatrices of Q, one per
// column of the Cholesky factor.
CostMatrices build_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, int n_dict);

// Observable vector evaluated on a lifted state; the first dim(z) entries are
// always z itself so the lifted state can be read back by projection.
struct DictionaryState {
    Eigen::VectorXd psi;
    std::string dictionary;
};

struct Dictionary {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval; // z -> psi
    std::function<int(int)> size;                                // dim(z) -> dim(psi)
    // Index of the constant-1 observable, when the dictionary has one.
    std::function<std::optional<int>(int)> constant_index;
};

// Built-in ids: "affine" (psi = [z; 1]) and "monomials-2"
// (psi = [z; z_i z_j for i <= j; 1]). Custom dictionaries may be registered;
// their eval must keep psi.head(dim(z)) == z.
void register_dictionary(const std::string& id, Dictionary d);

DictionaryState eval_dictionary(const LiftedState& e, const std::string& id);
int dictionary_size(const std::string& id, int lifted_dim);
std::optional<int> dictionary_constant_index(const std::string& id, int lifted_dim);

} // namespace soclift
