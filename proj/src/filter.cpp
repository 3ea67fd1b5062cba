#include "soclift/filter.hpp"

#include <Eigen/Cholesky>

#include "soclift/errors.hpp"

namespace soclift {

namespace {

// Symmetrize, then insist on a Cholesky-factorizable result. Roundoff can
// push an update marginally indefinite; one shot of jitter is allowed before
// giving up.
Eigen::MatrixXd ensure_spd(Eigen::MatrixXd S, const char* where) {
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() == Eigen::Success)
        return S;
    S += 1e-12 * Eigen::MatrixXd::Identity(S.rows(), S.cols());
    llt.compute(S);
    if (llt.info() == Eigen::Success)
        return S;
    throw NumericalError(std::string(where) + ": covariance lost positive definiteness");
}

} // namespace

Eigen::MatrixXd kalman_gain(const SystemModel& model, const Belief& b,
                            const Eigen::VectorXd& u) {
    const Eigen::MatrixXd H = model.jac_h(b.mean, u);
    Eigen::MatrixXd S = H * b.cov * H.transpose() + model.measurement_noise.covariance;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("kalman_gain: innovation covariance solve failed");
    // gain = cov H^T S^{-1}, computed as the transpose of S^{-1} H cov.
    return ldlt.solve(H * b.cov).transpose();
}

Belief ekf_step(const SystemModel& model, const Belief& b,
                const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd H = model.jac_h(b.mean, u);
    const Eigen::MatrixXd gain = kalman_gain(model, b, u);

    const Eigen::VectorXd mean_post = b.mean + gain * (y - model.h(b.mean, u));
    const Eigen::MatrixXd cov_post = ensure_spd(
        (Eigen::MatrixXd::Identity(b.cov.rows(), b.cov.cols()) - gain * H) * b.cov,
        "ekf_step(update)");

    const Eigen::MatrixXd F = model.jac_f(mean_post, u);
    Belief next;
    next.mean = model.f(mean_post, u);
    next.cov = ensure_spd(F * cov_post * F.transpose() + model.process_noise.covariance,
                          "ekf_step(predict)");
    return next;
}

InfoState ce_step(const SystemModel& model, const InfoState& p,
                  const Eigen::VectorXd& u) {
    const Eigen::MatrixXd H = model.jac_h(p.mean, u);
    const Eigen::MatrixXd gain = kalman_gain(model, Belief{p.mean, p.cov}, u);

    // Innovation pinned to zero: the mean evolves through prediction alone,
    // the covariance still contracts through the update.
    const Eigen::MatrixXd cov_post = ensure_spd(
        (Eigen::MatrixXd::Identity(p.cov.rows(), p.cov.cols()) - gain * H) * p.cov,
        "ce_step(update)");

    const Eigen::MatrixXd F = model.jac_f(p.mean, u);
    InfoState next;
    next.mean = model.f(p.mean, u);
    next.cov = ensure_spd(F * cov_post * F.transpose() + model.process_noise.covariance,
                          "ce_step(predict)");
    return next;
}

} // namespace soclift
