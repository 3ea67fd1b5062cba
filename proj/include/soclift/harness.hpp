#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "soclift/config.hpp"
#include "soclift/control.hpp"

namespace soclift {

enum class ControllerKind { soc_lqr, ce_lqr, zero, custom_gain };

// A feedback law bound to what it reads: soc_lqr consumes the dictionary
// state of the current belief, the others consume the belief mean.
struct Controller {
    ControllerKind kind = ControllerKind::zero;
    Eigen::MatrixXd K;
    std::string dictionary; // soc_lqr only
};

Controller soc_controller(const LinearPredictor& p, const LqrGain& g);
Controller ce_controller(const LqrGain& g);
Controller zero_controller(int input_dim);
Controller custom_controller(const Eigen::MatrixXd& K);

Eigen::VectorXd control_input(const Controller& c, const Belief& b);

struct RunParams {
    int horizon = 1000;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
};

struct TraceStep {
    Eigen::VectorXd x_true;
    Eigen::VectorXd x_est; // predicted mean before y[k] arrives
    Eigen::MatrixXd cov;
    Eigen::VectorXd u;
    Eigen::VectorXd y;
    double stage_cost = 0.0; // x_true' Q x_true + u' R u
    double sum_x = 0.0;      // half-space indicator sum(x_true)
};

struct Trace {
    std::vector<TraceStep> steps;
    bool has_terminal = false;
    Eigen::VectorXd x_true_final;
    Eigen::VectorXd x_est_final;
    Eigen::MatrixXd cov_final;
    bool truncated = false; // filter breakdown before the horizon
    std::string error;
};

// Closed loop of plant, filter and controller: the control acts on the
// one-step-behind belief, the measurement of the current state then updates
// it. Noise streams (plant / measurement / initial state) are derived
// independently from the seed, so matched seeds see identical realizations
// under any controller.
Trace run_closed_loop(const SystemModel& model, const Controller& c,
                      const RunParams& params, std::uint64_t seed);

struct Summary {
    double avg_cost = 0.0;      // (terminal + sum of stage costs) / N, true states
    double epsilon = 0.0;       // mean squared estimation error of the predicted mean
    double mean_sum_x = 0.0;
    double avg_cov_trace = 0.0;
    int horizon = 0;
};

// Recomputes stage costs from the recorded states with the given (Q, R).
Summary metrics(const Trace& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

struct CompareResult {
    Summary baseline;
    Summary candidate;
    std::vector<Summary> baseline_per_seed;
    std::vector<Summary> candidate_per_seed;
    std::vector<std::uint64_t> seeds;
    double cost_reduction_pct = 0.0;    // (1 - candidate/baseline) * 100
    double epsilon_reduction_pct = 0.0;
    int seeds_candidate_lower_cov_trace = 0;
};

// Matched-seed average of both controllers over the same noise realizations.
CompareResult compare_controllers(const SystemModel& model, const Controller& baseline,
                                  const Controller& candidate, const RunParams& params,
                                  const std::vector<std::uint64_t>& seeds);

// Everything the training stage produces.
struct TrainedBundle {
    LinearPredictor predictor;
    LqrGain soc_gain;
    LqrGain ce_gain;
    DataMatrices data; // kept for diagnostics/export
};

// collect_data + fit_edmd + design_soc_lqr (+ the CE baseline gain).
TrainedBundle train_pipeline(const ExperimentConfig& cfg);

// Full benchmark: train, then CE-LQR vs SOC-LQR on matched seeds.
CompareResult run_comparison(const ExperimentConfig& cfg);

// CSV trace: header k, x1.., xhat1.., trSigma, u, y, stage_cost, sumx; one
// row per step plus a terminal row (u and y written as zeros there and
// stage_cost holding the terminal cost). 17 significant digits.
std::string trace_to_csv(const Trace& t);
Trace trace_from_csv(const std::string& text);
void export_trace_csv(const Trace& t, const std::string& path);

nlohmann::json summary_to_json(const Summary& s);
nlohmann::json comparison_to_json(const CompareResult& r);
void write_text_file(const std::string& path, const std::string& content);

// Minimal line chart, one polyline per series.
struct ChartSeries {
    std::string name;
    std::vector<double> values;
};
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series);

nlohmann::json bundle_to_json(const TrainedBundle& b, const ExperimentConfig& cfg);

} // namespace soclift
