#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace soclift {

using Rng = std::mt19937_64;

// One engine per (seed, purpose[, index]) so different consumers of the same
// master seed never share draws. Used to keep noise realizations independent
// of the controller under test.
Rng derived_rng(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index = 0);

// Exponential linear unit: x for x >= 0, e^x - 1 otherwise.
double elu(double x);
// Its derivative, with the value at 0 taken as 1 (both one-sided limits agree).
double elu_deriv(double x);

// Gaussian with bounded support: draws outside Mahalanobis distance `trunc`
// of the mean are rejected and redrawn. trunc = infinity gives a plain
// Gaussian.
struct NoiseSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double trunc = std::numeric_limits<double>::infinity();

    int dim() const { return static_cast<int>(mean.size()); }
    void validate(const std::string& what) const;
};

// Discrete-time stochastic system
//   x[k+1] = f(x[k], u[k]) + w[k]
//   y[k]   = h(x[k], u[k]) + v[k]
// with analytic state-Jacobians for f and h. Immutable after construction;
// safe to share across threads (each thread owns its Rng).
struct SystemModel {
    int state_dim = 0;
    int input_dim = 0;
    int output_dim = 0;

    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> f;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> h;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> jac_f;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> jac_h;

    NoiseSpec process_noise;
    NoiseSpec measurement_noise;
    NoiseSpec prior;

    void validate() const;
};

// The bundled "elu-hw" benchmark: 3-state linear dynamics driven through a
// scalar ELU output nonlinearity, which makes observability depend on which
// side of the surface sum(x) = 3 the state is on.
SystemModel example_system();

// Rejection sampler; throws NumericalError if the acceptance region is so
// small that 10^6 attempts are exceeded.
Eigen::VectorXd sample_truncated_gaussian(const NoiseSpec& spec, Rng& rng);

Eigen::VectorXd step_plant(const SystemModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, Rng& rng);
Eigen::VectorXd measure(const SystemModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, Rng& rng);

// Central finite-difference Jacobian in the state argument. Test oracle for
// analytic Jacobians; never used inside the filter.
Eigen::MatrixXd jacobian_fd(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& map,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double step = 1e-5);

} // namespace soclift
