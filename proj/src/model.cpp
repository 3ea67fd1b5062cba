#include "soclift/model.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "soclift/errors.hpp"

namespace soclift {

namespace {

constexpr long kRejectionCap = 1000000;

bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-10) {
    return (m - m.transpose()).norm() <= tol * std::max(1.0, m.norm());
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
}

} // namespace

Rng derived_rng(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                      static_cast<std::uint32_t>(seed >> 32), purpose, index};
    return Rng(seq);
}

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

double elu_deriv(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

void NoiseSpec::validate(const std::string& what) const {
    if (mean.size() == 0)
        throw ConfigError(what + ": empty mean");
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
        throw ConfigError(what + ": covariance shape does not match mean");
    if (!is_symmetric(covariance))
        throw ConfigError(what + ": covariance not symmetric");
    if (!is_positive_definite(covariance))
        throw ConfigError(what + ": covariance not positive definite");
    if (!(trunc > 0.0))
        throw ConfigError(what + ": trunc must be positive");
}

void SystemModel::validate() const {
    if (state_dim <= 0 || input_dim <= 0 || output_dim <= 0)
        throw ConfigError("model: dimensions must be positive");
    if (!f || !h || !jac_f || !jac_h)
        throw ConfigError("model: f, h and their Jacobians are required");
    process_noise.validate("model.process_noise");
    measurement_noise.validate("model.measurement_noise");
    prior.validate("model.prior");
    if (process_noise.dim() != state_dim)
        throw ConfigError("model.process_noise: dimension mismatch");
    if (measurement_noise.dim() != output_dim)
        throw ConfigError("model.measurement_noise: dimension mismatch");
    if (prior.dim() != state_dim)
        throw ConfigError("model.prior: dimension mismatch");
}

SystemModel example_system() {
    Eigen::MatrixXd A(3, 3);
    A << 0.63, 0.54, 0.0,
         0.74, 0.96, 0.68,
         0.10, -0.86, 0.54;
    Eigen::MatrixXd B(3, 1);
    B << 0.0, 1.0, 0.0;

    SystemModel m;
    m.state_dim = 3;
    m.input_dim = 1;
    m.output_dim = 1;
    m.f = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return Eigen::VectorXd(A * x + B * u);
    };
    m.jac_f = [A](const Eigen::VectorXd&, const Eigen::VectorXd&) { return A; };
    m.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::VectorXd y(1);
        y(0) = elu(x.sum() - 3.0);
        return y;
    };
    m.jac_h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::MatrixXd Hm(1, 3);
        Hm.setConstant(elu_deriv(x.sum() - 3.0));
        return Hm;
    };

    m.process_noise = {Eigen::VectorXd::Zero(3), 0.2 * Eigen::MatrixXd::Identity(3, 3), 3.0};
    m.measurement_noise = {Eigen::VectorXd::Zero(1), 0.2 * Eigen::MatrixXd::Identity(1, 1), 2.0};
    m.prior = {Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 3.0};
    m.validate();
    return m;
}

Eigen::VectorXd sample_truncated_gaussian(const NoiseSpec& spec, Rng& rng) {
    const int n = spec.dim();
    Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
    if (llt.info() != Eigen::Success)
        throw NumericalError("sample_truncated_gaussian: covariance not PD");
    const Eigen::MatrixXd L = llt.matrixL();

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(n);
    // x = mean + L z has Mahalanobis distance ||z||, so rejection happens in
    // whitened coordinates.
    for (long attempt = 0; attempt < kRejectionCap; ++attempt) {
        for (int i = 0; i < n; ++i)
            z(i) = gauss(rng);
        if (z.norm() <= spec.trunc)
            return spec.mean + L * z;
    }
    throw NumericalError("sample_truncated_gaussian: rejection cap exceeded; "
                         "trunc too small for dimension " + std::to_string(n));
}

Eigen::VectorXd step_plant(const SystemModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, Rng& rng) {
    return model.f(x, u) + sample_truncated_gaussian(model.process_noise, rng);
}

Eigen::VectorXd measure(const SystemModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, Rng& rng) {
    return model.h(x, u) + sample_truncated_gaussian(model.measurement_noise, rng);
}

Eigen::MatrixXd jacobian_fd(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& map,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double step) {
    if (!(step > 0.0))
        throw ConfigError("jacobian_fd: step must be positive");
    const Eigen::VectorXd y0 = map(x, u);
    Eigen::MatrixXd J(y0.size(), x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < x.size(); ++j) {
        xp(j) = x(j) + step;
        xm(j) = x(j) - step;
        J.col(j) = (map(xp, u) - map(xm, u)) / (2.0 * step);
        xp(j) = x(j);
        xm(j) = x(j);
    }
    return J;
}

} // namespace soclift
