#include "soclift/control.hpp"

#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "soclift/config.hpp"
#include "soclift/errors.hpp"

namespace soclift {

namespace {

double spectral_radius_of(const Eigen::MatrixXd& m) {
    if (m.rows() == 0)
        return 0.0;
    return Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

void check_cost_pair(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    if (A.rows() != A.cols() || Q.rows() != Q.cols() || R.rows() != R.cols())
        throw ConfigError("solve_dare: square matrices expected");
    if (B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols())
        throw ConfigError("solve_dare: inconsistent dimensions");
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
        throw NumericalError("solve_dare: R not positive definite");
}

} // namespace

DareResult solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                      const DareOptions& opts) {
    check_cost_pair(A, B, Q, R);
    DareResult res;
    res.P = 0.5 * (Q + Q.transpose());
    for (int i = 0; i < opts.max_iter; ++i) {
        const Eigen::MatrixXd BtPA = B.transpose() * res.P * A;
        const Eigen::MatrixXd M = R + B.transpose() * res.P * B;
        Eigen::MatrixXd next =
            Q + A.transpose() * res.P * A -
            BtPA.transpose() * Eigen::LDLT<Eigen::MatrixXd>(M).solve(BtPA);
        next = 0.5 * (next + next.transpose()).eval();
        res.last_increment = (next - res.P).norm();
        res.P = next;
        res.iterations = i + 1;
        if (res.last_increment <= opts.tol)
            return res;
    }
    std::ostringstream msg;
    msg << "solve_dare: no convergence after " << opts.max_iter
        << " iterations, last increment " << res.last_increment;
    throw NumericalError(msg.str());
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

DiagnosticsReport pbh_diagnostics(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Qsqrt) {
    DiagnosticsReport rep;
    const int n = static_cast<int>(A.rows());
    const Eigen::VectorXcd eigs = Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues();
    for (int i = 0; i < n; ++i) {
        const std::complex<double> lam = eigs(i);
        if (std::abs(lam) < 1.0 - 1e-8)
            continue;
        ModeMargin m;
        m.eigenvalue = lam;

        Eigen::MatrixXcd stab(n, n + B.cols());
        stab.leftCols(n) = A.cast<std::complex<double>>() -
                           lam * Eigen::MatrixXcd::Identity(n, n);
        stab.rightCols(B.cols()) = B.cast<std::complex<double>>();
        m.stabilizability = stab.jacobiSvd().singularValues().minCoeff();

        Eigen::MatrixXcd det(n + Qsqrt.rows(), n);
        det.topRows(n) = A.cast<std::complex<double>>() -
                         lam * Eigen::MatrixXcd::Identity(n, n);
        det.bottomRows(Qsqrt.rows()) = Qsqrt.cast<std::complex<double>>();
        m.detectability = det.jacobiSvd().singularValues().minCoeff();

        if (m.stabilizability <= rep.warn_threshold)
            rep.stabilizable = false;
        if (m.detectability <= rep.warn_threshold)
            rep.detectable = false;
        rep.boundary_modes.push_back(m);
    }
    return rep;
}

LqrGain lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                 const DareOptions& opts) {
    const DareResult dare = solve_dare(A, B, Q, R, opts);
    LqrGain g;
    g.P = dare.P;
    g.iterations = dare.iterations;
    const Eigen::MatrixXd M = R + B.transpose() * dare.P * B;
    g.K = Eigen::LDLT<Eigen::MatrixXd>(M).solve(B.transpose() * dare.P * A);
    g.spectral_radius = spectral_radius_of(A - B * g.K);
    if (g.spectral_radius >= 1.0)
        throw NumericalError("lqr_gain: closed loop not contractive (spectral radius " +
                             std::to_string(g.spectral_radius) + ")");
    return g;
}

namespace {

// True when coordinate c of the fitted predictor reproduces itself exactly
// and ignores the input: the signature of a constant observable.
bool is_constant_carrier(const LinearPredictor& p, int c, double tol = 1e-6) {
    Eigen::RowVectorXd row = p.A.row(c);
    row(c) -= 1.0;
    return row.cwiseAbs().maxCoeff() <= tol && p.B.row(c).cwiseAbs().maxCoeff() <= tol;
}

} // namespace

LqrGain design_soc_lqr(const LinearPredictor& p, const CostMatrices& cost,
                       double reg, const DareOptions& opts) {
    const int n = p.dict_dim();
    if (cost.Q_dict.rows() != n)
        throw ConfigError("design_soc_lqr: lifted cost sized " +
                          std::to_string(cost.Q_dict.rows()) + ", predictor sized " +
                          std::to_string(n));
    if (reg < 0.0)
        throw ConfigError("design_soc_lqr: reg must be non-negative");

    LqrGain g;
    g.diagnostics = pbh_diagnostics(p.A, p.B, psd_sqrt(cost.Q_dict));

    std::optional<int> constant;
    try {
        constant = dictionary_constant_index(p.dictionary, p.lifted_dim);
    } catch (const ConfigError&) {
        constant = std::nullopt; // unregistered dictionary: treat as plain
    }
    if (constant && (*constant >= n || !is_constant_carrier(p, *constant)))
        constant = std::nullopt;

    if (!constant) {
        const Eigen::MatrixXd Qr =
            cost.Q_dict + reg * Eigen::MatrixXd::Identity(n, n);
        LqrGain plain = lqr_gain(p.A, p.B, Qr, cost.R, opts);
        plain.diagnostics = g.diagnostics;
        return plain;
    }

    // The constant observable pins an exact unit eigenvalue with no input
    // authority, so the value function has a linearly growing component and
    // the plain fixed-point iteration never settles. Split that coordinate
    // out, solve the DARE on the rest, and fold its effect back in as the
    // affine term of the policy.
    const int c = *constant;
    std::vector<int> keep;
    keep.reserve(n - 1);
    for (int i = 0; i < n; ++i)
        if (i != c)
            keep.push_back(i);

    Eigen::MatrixXd Ad(n - 1, n - 1), Bd(n - 1, p.B.cols()), Qd(n - 1, n - 1);
    Eigen::VectorXd drift(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        for (int j = 0; j < n - 1; ++j) {
            Ad(i, j) = p.A(keep[i], keep[j]);
            Qd(i, j) = cost.Q_dict(keep[i], keep[j]);
        }
        Bd.row(i) = p.B.row(keep[i]);
        drift(i) = p.A(keep[i], c);
    }
    Qd += reg * Eigen::MatrixXd::Identity(n - 1, n - 1);

    const DareResult dare = solve_dare(Ad, Bd, Qd, cost.R, opts);
    const Eigen::MatrixXd M = cost.R + Bd.transpose() * dare.P * Bd;
    const Eigen::LDLT<Eigen::MatrixXd> Mldlt(M);
    const Eigen::MatrixXd Kd = Mldlt.solve(Bd.transpose() * dare.P * Ad);
    const Eigen::MatrixXd F = Ad - Bd * Kd;

    // Linear value term of V(z) = z'Pz + 2s'z + const for the drifted system
    // z' = F z + (drift - Bd*k_c): s = (I - F')^{-1} F' P drift.
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n - 1, n - 1);
    const Eigen::VectorXd s =
        (I - F.transpose()).partialPivLu().solve(F.transpose() * (dare.P * drift));
    const Eigen::VectorXd k_c = Mldlt.solve(Bd.transpose() * (dare.P * drift + s));

    g.P = Eigen::MatrixXd::Zero(n, n);
    g.s = Eigen::VectorXd::Zero(n);
    g.K = Eigen::MatrixXd::Zero(p.B.cols(), n);
    for (int i = 0; i < n - 1; ++i) {
        for (int j = 0; j < n - 1; ++j)
            g.P(keep[i], keep[j]) = dare.P(i, j);
        g.s(keep[i]) = s(i);
        g.K.col(keep[i]) = Kd.col(i);
    }
    g.K.col(c) = k_c;
    g.iterations = dare.iterations;
    g.spectral_radius = spectral_radius_of(F);
    if (g.spectral_radius >= 1.0)
        throw NumericalError("design_soc_lqr: closed loop not contractive (spectral radius " +
                             std::to_string(g.spectral_radius) + ")");
    return g;
}

namespace {

// f is input-affine with a constant input matrix iff u -> f(x, u) - f(x, 0)
// is linear and independent of x; probe both at a few points.
std::optional<Eigen::MatrixXd> exact_input_matrix(const SystemModel& model,
                                                  const Eigen::VectorXd& x0) {
    const int ru = model.input_dim;
    const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(ru);
    const Eigen::VectorXd f0 = model.f(x0, zero_u);
    Eigen::MatrixXd B(model.state_dim, ru);
    for (int j = 0; j < ru; ++j)
        B.col(j) = model.f(x0, Eigen::VectorXd::Unit(ru, j)) - f0;

    const double scale = std::max(1.0, B.norm());
    Eigen::VectorXd probe = Eigen::VectorXd::Constant(ru, -1.7);
    Eigen::VectorXd xp = x0;
    xp.array() += 0.37;
    const bool linear_in_u =
        (model.f(x0, 2.0 * probe) - f0 - 2.0 * (B * probe)).norm() <= 1e-9 * scale;
    const bool constant_in_x =
        (model.f(xp, probe) - model.f(xp, zero_u) - B * probe).norm() <= 1e-9 * scale;
    if (linear_in_u && constant_in_x)
        return B;
    return std::nullopt;
}

} // namespace

LqrGain design_ce_lqr(const SystemModel& model, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, const Eigen::VectorXd& lin_point,
                      const Eigen::VectorXd& lin_input, const DareOptions& opts) {
    const Eigen::MatrixXd A = model.jac_f(lin_point, lin_input);
    Eigen::MatrixXd B;
    if (auto exact = exact_input_matrix(model, lin_point)) {
        B = *exact;
    } else {
        B.resize(model.state_dim, model.input_dim);
        const double step = 1e-5;
        for (int j = 0; j < model.input_dim; ++j) {
            Eigen::VectorXd up = lin_input, um = lin_input;
            up(j) += step;
            um(j) -= step;
            B.col(j) = (model.f(lin_point, up) - model.f(lin_point, um)) / (2.0 * step);
        }
    }
    LqrGain g = lqr_gain(A, B, Q, R, opts);
    g.diagnostics = pbh_diagnostics(A, B, psd_sqrt(Q));
    return g;
}

namespace {

nlohmann::json diagnostics_to_json(const DiagnosticsReport& d) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& m : d.boundary_modes)
        modes.push_back({{"eigenvalue_re", m.eigenvalue.real()},
                         {"eigenvalue_im", m.eigenvalue.imag()},
                         {"stabilizability", m.stabilizability},
                         {"detectability", m.detectability}});
    return nlohmann::json{{"boundary_modes", modes},
                          {"warn_threshold", d.warn_threshold},
                          {"stabilizable", d.stabilizable},
                          {"detectable", d.detectable}};
}

DiagnosticsReport diagnostics_from_json(const nlohmann::json& j) {
    DiagnosticsReport d;
    d.warn_threshold = j.value("warn_threshold", 1e-8);
    d.stabilizable = j.value("stabilizable", true);
    d.detectable = j.value("detectable", true);
    for (const auto& m : j.value("boundary_modes", nlohmann::json::array())) {
        ModeMargin mm;
        mm.eigenvalue = {m.at("eigenvalue_re").get<double>(),
                         m.at("eigenvalue_im").get<double>()};
        mm.stabilizability = m.at("stabilizability").get<double>();
        mm.detectability = m.at("detectability").get<double>();
        d.boundary_modes.push_back(mm);
    }
    return d;
}

} // namespace

nlohmann::json gain_to_json(const LqrGain& g) {
    return nlohmann::json{{"K", matrix_to_json(g.K)},
                          {"P", matrix_to_json(g.P)},
                          {"s", vector_to_json(g.s)},
                          {"spectral_radius", g.spectral_radius},
                          {"iterations", g.iterations},
                          {"diagnostics", diagnostics_to_json(g.diagnostics)}};
}

LqrGain gain_from_json(const nlohmann::json& j) {
    LqrGain g;
    g.K = matrix_from_json(j.at("K"), "gain.K");
    g.P = matrix_from_json(j.at("P"), "gain.P");
    g.s = vector_from_json(j.value("s", nlohmann::json::array()), "gain.s");
    g.spectral_radius = j.value("spectral_radius", 0.0);
    g.iterations = j.value("iterations", 0);
    if (j.contains("diagnostics"))
        g.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    return g;
}

} // namespace soclift
