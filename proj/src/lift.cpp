#include "soclift/lift.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "soclift/errors.hpp"

namespace soclift {

int halfvec_dim(int len) {
    const int n = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0 + 0.5);
    if (n <= 0 || halfvec_len(n) != len)
        throw ConfigError("halfvec: length " + std::to_string(len) + " is not triangular");
    return n;
}

Eigen::VectorXd chol_halfvec(const Eigen::MatrixXd& S) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError("chol_halfvec: matrix not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const int n = static_cast<int>(S.rows());
    Eigen::VectorXd l(halfvec_len(n));
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i)
            l(k++) = L(i, j);
    return l;
}

Eigen::MatrixXd chol_halfvec_inverse(const Eigen::VectorXd& l) {
    const int n = halfvec_dim(static_cast<int>(l.size()));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i)
            L(i, j) = l(k++);
    for (int j = 0; j < n; ++j)
        if (!(L(j, j) > 0.0))
            throw ConfigError("chol_halfvec_inverse: implied diagonal entry " +
                              std::to_string(j) + " not positive");
    return L * L.transpose();
}

LiftedState lift_state(const InfoState& p) {
    LiftedState e;
    e.state_dim = static_cast<int>(p.mean.size());
    e.z.resize(p.mean.size() + halfvec_len(e.state_dim));
    e.z.head(p.mean.size()) = p.mean;
    e.z.tail(halfvec_len(e.state_dim)) = chol_halfvec(p.cov);
    return e;
}

InfoState unlift_state(const LiftedState& e) {
    InfoState p;
    p.mean = e.z.head(e.state_dim);
    p.cov = chol_halfvec_inverse(e.z.tail(e.z.size() - e.state_dim));
    return p;
}

CostMatrices build_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, int n_dict) {
    if (Q.rows() != Q.cols())
        throw ConfigError("build_cost: Q must be square");
    if (R.rows() != R.cols())
        throw ConfigError("build_cost: R must be square");
    if ((Q - Q.transpose()).norm() > 1e-10 * std::max(1.0, Q.norm()))
        throw ConfigError("build_cost: Q not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw ConfigError("build_cost: Q not positive semi-definite");
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
        throw ConfigError("build_cost: R not positive definite");

    const int r = static_cast<int>(Q.rows());
    const int lifted = r + halfvec_len(r);
    if (n_dict < lifted)
        throw ConfigError("build_cost: dictionary dimension smaller than the lifted state");

    CostMatrices c;
    c.Q = Q;
    c.R = R;

    // Column j of the Cholesky factor contributes (col_j)^T Q (col_j), and
    // only its trailing entries are nonzero, so the half-vector cost is the
    // block diagonal of trailing principal submatrices of Q.
    c.Q_halfvec = Eigen::MatrixXd::Zero(halfvec_len(r), halfvec_len(r));
    int off = 0;
    for (int i = 0; i < r; ++i) {
        const int sz = r - i;
        c.Q_halfvec.block(off, off, sz, sz) = Q.bottomRightCorner(sz, sz);
        off += sz;
    }

    c.Q_lifted = Eigen::MatrixXd::Zero(lifted, lifted);
    c.Q_lifted.topLeftCorner(r, r) = Q;
    c.Q_lifted.bottomRightCorner(halfvec_len(r), halfvec_len(r)) = c.Q_halfvec;

    c.Q_dict = Eigen::MatrixXd::Zero(n_dict, n_dict);
    c.Q_dict.topLeftCorner(lifted, lifted) = c.Q_lifted;
    return c;
}

namespace {

std::map<std::string, Dictionary>& registry() {
    static std::map<std::string, Dictionary> dicts = [] {
        std::map<std::string, Dictionary> d;
        d["affine"] = Dictionary{
            [](const Eigen::VectorXd& z) {
                Eigen::VectorXd psi(z.size() + 1);
                psi.head(z.size()) = z;
                psi(z.size()) = 1.0;
                return psi;
            },
            [](int n) { return n + 1; },
            [](int n) { return std::optional<int>(n); },
        };
        d["monomials-2"] = Dictionary{
            [](const Eigen::VectorXd& z) {
                const int n = static_cast<int>(z.size());
                Eigen::VectorXd psi(n + n * (n + 1) / 2 + 1);
                psi.head(n) = z;
                int k = n;
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j)
                        psi(k++) = z(i) * z(j);
                psi(k) = 1.0;
                return psi;
            },
            [](int n) { return n + n * (n + 1) / 2 + 1; },
            [](int n) { return std::optional<int>(n + n * (n + 1) / 2); },
        };
        return d;
    }();
    return dicts;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

Dictionary lookup(const std::string& id) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(id);
    if (it == registry().end())
        throw ConfigError("dictionary: unknown id \"" + id + "\"");
    return it->second;
}

} // namespace

void register_dictionary(const std::string& id, Dictionary d) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry()[id] = std::move(d);
}

DictionaryState eval_dictionary(const LiftedState& e, const std::string& id) {
    DictionaryState out;
    out.dictionary = id;
    out.psi = lookup(id).eval(e.z);
    return out;
}

int dictionary_size(const std::string& id, int lifted_dim) {
    return lookup(id).size(lifted_dim);
}

std::optional<int> dictionary_constant_index(const std::string& id, int lifted_dim) {
    return lookup(id).constant_index(lifted_dim);
}

} // namespace soclift
