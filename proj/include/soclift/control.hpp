#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "soclift/koopman.hpp"

namespace soclift {

struct DareOptions {
    double tol = 1e-10;
    int max_iter = 100000;
};

struct DareResult {
    Eigen::MatrixXd P;
    int iterations = 0;
    double last_increment = 0.0;
};

// Fixed-point iteration P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A
// from P0 = Q until the Frobenius increment drops below tol. Throws
// NumericalError (reporting the last increment) when max_iter is exhausted.
DareResult solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                      const DareOptions& opts = {});

// Near-unit-circle eigenvalue margins. For each eigenvalue of A with
// |lambda| >= 1 - 1e-8, the smallest singular value of [A - lambda I, B]
// (stabilizability) and of [A - lambda I; Qsqrt] (detectability). Warns via
// flags, never throws.
struct ModeMargin {
    std::complex<double> eigenvalue;
    double stabilizability = 0.0;
    double detectability = 0.0;
};

struct DiagnosticsReport {
    std::vector<ModeMargin> boundary_modes;
    double warn_threshold = 1e-8;
    bool stabilizable = true;
    bool detectable = true;
};

DiagnosticsReport pbh_diagnostics(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Qsqrt);

// Symmetric PSD square root (eigendecomposition, negative eigenvalues clamped).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S);

struct LqrGain {
    Eigen::MatrixXd K; // applied control is u = -K * state
    Eigen::MatrixXd P;
    // Linear value-function term paired with P when the design had a
    // constant-carrier coordinate; empty otherwise.
    Eigen::VectorXd s;
    double spectral_radius = 0.0; // closed loop, constant carrier excluded
    int iterations = 0;
    DiagnosticsReport diagnostics;
};

// K = (R + B^T P B)^{-1} B^T P A from the DARE solution; asserts the closed
// loop is a contraction.
LqrGain lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                 const DareOptions& opts = {});

// Gain for the fitted predictor under the lifted cost. When the dictionary
// carries a constant-1 observable, that coordinate is an exact unit
// eigenvalue of the fitted A with no input authority, so the plain DARE
// iteration cannot settle; the design then splits it out, solves the DARE on
// the remaining coordinates (cost Q_dict + reg*I there), and recovers the
// constant column of K from the linear value-function term. reg also guards
// marginally undetectable fitted modes.
LqrGain design_soc_lqr(const LinearPredictor& p, const CostMatrices& cost,
                       double reg = 1e-9, const DareOptions& opts = {});

// Baseline gain from the model linearized at (lin_point, lin_input), the
// noise-free full-information reading of the plant. The input matrix is
// measured exactly for input-affine f (detected), by central differences
// otherwise.
LqrGain design_ce_lqr(const SystemModel& model, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, const Eigen::VectorXd& lin_point,
                      const Eigen::VectorXd& lin_input, const DareOptions& opts = {});

nlohmann::json gain_to_json(const LqrGain& g);
LqrGain gain_from_json(const nlohmann::json& j);

} // namespace soclift
