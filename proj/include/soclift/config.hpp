#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "soclift/koopman.hpp"
#include "soclift/model.hpp"

namespace soclift {

// JSON helpers shared by the serializers. Matrices are nested row-major
// arrays; vectors are flat arrays.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& field);

NoiseSpec noise_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json noise_to_json(const NoiseSpec& n);

// Loadable model family: linear dynamics x' = A x + B u with an output map
// that is either "elu-sum" (y = elu(sum(x) - offset), scalar) or "linear"
// (y = C x), plus the three noise specs. {"name": "elu-hw"} selects the
// bundled example.
SystemModel model_from_json(const nlohmann::json& j);

struct CostConfig {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
};

struct SimulationConfig {
    int horizon = 1000;
    std::vector<std::uint64_t> seeds;
    std::string controller = "soc-lqr"; // soc-lqr | ce-lqr | zero | custom-gain
    Eigen::MatrixXd custom_gain;        // used by "custom-gain" only
};

struct ControlConfig {
    double reg = 1e-9;
    double dare_tol = 1e-10;
    int dare_max_iter = 100000;
    double ridge = 0.0; // eDMD regularization
};

struct ExperimentConfig {
    nlohmann::json model_json; // as loaded, for re-serialization
    SystemModel model;
    CostConfig cost;
    TrainingConfig training;
    SimulationConfig simulation;
    ControlConfig control;
};

// Schema-checked parse; errors name the offending field
// ("training.num_trajectories: ..."). Missing sections fall back to the
// documented defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

// Reads a config file; the name "elu-hw" (when no such file exists) resolves
// to the bundled benchmark config.
ExperimentConfig load_experiment(const std::string& path_or_name);

// The bundled benchmark: elu-hw model, Q = I, R = 1, affine dictionary,
// 100 x 200 training rollouts, horizon 1000, seeds 1..20.
nlohmann::json builtin_experiment_json();

std::vector<std::uint64_t> parse_seed_range(const std::string& text);

} // namespace soclift
