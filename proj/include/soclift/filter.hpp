#pragma once

#include <Eigen/Dense>

#include "soclift/model.hpp"

namespace soclift {

// Predicted-state pair: mean and covariance of x[k] given data through y[k-1].
struct Belief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Measurement-free surrogate of Belief used offline: evolves by prediction
// alone, with the innovation forced to zero.
struct InfoState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Gain via a symmetric-PD solve of the innovation covariance (no explicit
// inverse). H is evaluated at b.mean.
Eigen::MatrixXd kalman_gain(const SystemModel& model, const Belief& b,
                            const Eigen::VectorXd& u);

// One predict-update cycle: measurement update of (mean, cov) at the current
// step, then prediction to the next. H is evaluated at the prior mean, the
// dynamics Jacobian at the posterior mean. y is the output observed after
// applying u at the current step.
Belief ekf_step(const SystemModel& model, const Belief& b,
                const Eigen::VectorXd& u, const Eigen::VectorXd& y);

// The certainty-equivalent counterpart of ekf_step: identical covariance
// arithmetic, innovation pinned to zero, all Jacobians at p.mean. The mean
// evolves through f alone, so the whole step is deterministic.
InfoState ce_step(const SystemModel& model, const InfoState& p,
                  const Eigen::VectorXd& u);

} // namespace soclift
