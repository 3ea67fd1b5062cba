#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "soclift/lift.hpp"

namespace soclift {

// How the initial covariance of each training trajectory is randomized.
//   "wishart":        S0 = G G^T + jitter*I with G = scale * standard normal
//   "fixed-identity": S0 = I
struct InitCovScheme {
    std::string name = "wishart";
    double scale = 0.5;
    double jitter = 0.1;
};

struct TrainingConfig {
    int num_trajectories = 100;
    int steps_per_trajectory = 200;
    NoiseSpec excitation;       // input sequence injected during rollouts
    NoiseSpec init_mean;        // distribution of the initial mean
    InitCovScheme init_cov;
    std::string dictionary = "affine";
    std::uint64_t seed = 0;

    int total_samples() const { return num_trajectories * steps_per_trajectory; }
};

// Snapshot pairs: column j of psi_plus is the dictionary state one step after
// column j of psi_minus under input u_data column j. Pairs never straddle a
// trajectory boundary.
struct DataMatrices {
    Eigen::MatrixXd psi_plus;
    Eigen::MatrixXd psi_minus;
    Eigen::MatrixXd u_data;
    std::string dictionary;
    int state_dim = 0;
    int lifted_dim = 0;
    int discarded_trajectories = 0;

    int samples() const { return static_cast<int>(u_data.cols()); }
};

// Fitted one-step predictor psi' = A psi + B u with the lifted state read
// back through the projection z = C psi, C = [I 0].
struct LinearPredictor {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    std::string dictionary;
    int state_dim = 0;
    int lifted_dim = 0;
    double residual = 0.0;           // Frobenius norm of the fit residual
    double min_singular_value = 0.0; // of the stacked regressor (excitation proxy)
    bool rank_deficient = false;

    int dict_dim() const { return static_cast<int>(A.rows()); }
};

// Rollout of ce_step per trajectory, recording dictionary states. A
// trajectory whose covariance update breaks down is discarded and resampled
// (counted in the result).
DataMatrices collect_data(const SystemModel& model, const TrainingConfig& cfg);

// Least squares min ||psi_plus - [A B] [psi_minus; u_data]||_F, solved
// jointly through an SVD of the stacked regressor; ridge > 0 adds Tikhonov
// rows. Rank deficiency (at 1e-10 of the top singular value) is flagged, not
// fatal.
LinearPredictor fit_edmd(const DataMatrices& data, double ridge = 0.0);

DictionaryState predict(const LinearPredictor& p, const DictionaryState& psi,
                        const Eigen::VectorXd& u);

// RMS of ||C psi_hat[k] - z[k]|| over fresh validation rollouts, one entry
// per horizon step (entry 0 is 0 by construction).
std::vector<double> prediction_error(const LinearPredictor& p, const SystemModel& model,
                                     const TrainingConfig& cfg, int horizon);

// CSV exchange: one file per matrix (prefix + "_psi_plus.csv" etc.),
// column-major values, first row "rows,cols".
void save_data_csv(const DataMatrices& data, const std::string& prefix);
DataMatrices load_data_csv(const std::string& prefix);

nlohmann::json predictor_to_json(const LinearPredictor& p);
LinearPredictor predictor_from_json(const nlohmann::json& j);

} // namespace soclift
