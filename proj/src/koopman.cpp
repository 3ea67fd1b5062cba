#include "soclift/koopman.hpp"

#include <fstream>
#include <sstream>

#include <Eigen/SVD>

#include "soclift/config.hpp"
#include "soclift/errors.hpp"

namespace soclift {

namespace {

// Stream purposes 1000+ are reserved for training; the attempt number is
// folded in so a discarded trajectory resamples from a fresh stream.
Rng trajectory_rng(std::uint64_t seed, int trajectory, int attempt) {
    return derived_rng(seed, 1000 + static_cast<std::uint32_t>(attempt),
                       static_cast<std::uint32_t>(trajectory));
}

Eigen::MatrixXd initial_covariance(const InitCovScheme& scheme, int n, Rng& rng) {
    if (scheme.name == "fixed-identity")
        return Eigen::MatrixXd::Identity(n, n);
    if (scheme.name == "wishart") {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                G(i, j) = scheme.scale * gauss(rng);
        return G * G.transpose() + scheme.jitter * Eigen::MatrixXd::Identity(n, n);
    }
    throw ConfigError("init_cov_scheme: unknown scheme \"" + scheme.name + "\"");
}

} // namespace

DataMatrices collect_data(const SystemModel& model, const TrainingConfig& cfg) {
    if (cfg.num_trajectories <= 0 || cfg.steps_per_trajectory <= 0)
        throw ConfigError("training: trajectory counts must be positive");
    cfg.excitation.validate("training.excitation");
    cfg.init_mean.validate("training.init_mean");
    if (cfg.excitation.dim() != model.input_dim)
        throw ConfigError("training.excitation: dimension mismatch");
    if (cfg.init_mean.dim() != model.state_dim)
        throw ConfigError("training.init_mean: dimension mismatch");

    const int lifted = model.state_dim + halfvec_len(model.state_dim);
    const int n_dict = dictionary_size(cfg.dictionary, lifted);
    const int d = cfg.total_samples();
    if (d < n_dict + model.input_dim)
        throw ConfigError("training: need at least " + std::to_string(n_dict + model.input_dim) +
                          " samples for a full-rank fit, got " + std::to_string(d));

    DataMatrices out;
    out.dictionary = cfg.dictionary;
    out.state_dim = model.state_dim;
    out.lifted_dim = lifted;
    out.psi_plus.resize(n_dict, d);
    out.psi_minus.resize(n_dict, d);
    out.u_data.resize(model.input_dim, d);

    int col = 0;
    for (int t = 0; t < cfg.num_trajectories; ++t) {
        constexpr int kMaxAttempts = 100;
        bool done = false;
        for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
            Rng rng = trajectory_rng(cfg.seed, t, attempt);
            try {
                InfoState pi;
                pi.mean = sample_truncated_gaussian(cfg.init_mean, rng);
                pi.cov = initial_covariance(cfg.init_cov, model.state_dim, rng);
                const int base = col;
                for (int k = 0; k < cfg.steps_per_trajectory; ++k) {
                    const Eigen::VectorXd u = sample_truncated_gaussian(cfg.excitation, rng);
                    out.psi_minus.col(base + k) =
                        eval_dictionary(lift_state(pi), cfg.dictionary).psi;
                    pi = ce_step(model, pi, u);
                    out.psi_plus.col(base + k) =
                        eval_dictionary(lift_state(pi), cfg.dictionary).psi;
                    out.u_data.col(base + k) = u;
                }
                col += cfg.steps_per_trajectory;
                done = true;
            } catch (const NumericalError&) {
                ++out.discarded_trajectories;
            }
        }
        if (!done)
            throw NumericalError("collect_data: trajectory " + std::to_string(t) +
                                 " kept breaking down after " + std::to_string(kMaxAttempts) +
                                 " resamples");
    }
    return out;
}

LinearPredictor fit_edmd(const DataMatrices& data, double ridge) {
    const int n = static_cast<int>(data.psi_minus.rows());
    const int ru = static_cast<int>(data.u_data.rows());
    const int d = data.samples();
    if (data.psi_plus.rows() != n || data.psi_plus.cols() != d || data.psi_minus.cols() != d)
        throw ConfigError("fit_edmd: inconsistent data matrix shapes");
    if (d < n + ru)
        throw ConfigError("fit_edmd: fewer samples than unknowns");
    if (ridge < 0.0)
        throw ConfigError("fit_edmd: ridge must be non-negative");

    Eigen::MatrixXd regressor(n + ru, d);
    regressor.topRows(n) = data.psi_minus;
    regressor.bottomRows(ru) = data.u_data;

    LinearPredictor p;
    {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(regressor.transpose(),
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
        p.min_singular_value = svd.singularValues().minCoeff();
        p.rank_deficient =
            p.min_singular_value < 1e-10 * svd.singularValues().maxCoeff();
    }

    Eigen::MatrixXd theta_t; // (n+ru) x n, the transpose of [A B]
    if (ridge > 0.0) {
        Eigen::MatrixXd lhs(d + n + ru, n + ru);
        lhs.topRows(d) = regressor.transpose();
        lhs.bottomRows(n + ru) =
            std::sqrt(ridge) * Eigen::MatrixXd::Identity(n + ru, n + ru);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d + n + ru, n);
        rhs.topRows(d) = data.psi_plus.transpose();
        theta_t = lhs.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
    } else {
        theta_t = regressor.transpose()
                      .bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                      .solve(data.psi_plus.transpose());
    }

    p.A = theta_t.topRows(n).transpose();
    p.B = theta_t.bottomRows(ru).transpose();
    p.dictionary = data.dictionary;
    p.state_dim = data.state_dim;
    p.lifted_dim = data.lifted_dim;
    p.C = Eigen::MatrixXd::Zero(data.lifted_dim, n);
    p.C.leftCols(data.lifted_dim).setIdentity();
    p.residual = (data.psi_plus - p.A * data.psi_minus - p.B * data.u_data).norm();
    return p;
}

DictionaryState predict(const LinearPredictor& p, const DictionaryState& psi,
                        const Eigen::VectorXd& u) {
    if (psi.dictionary != p.dictionary)
        throw ConfigError("predict: dictionary mismatch (\"" + psi.dictionary +
                          "\" vs \"" + p.dictionary + "\")");
    if (psi.psi.size() != p.A.cols() || u.size() != p.B.cols())
        throw ConfigError("predict: dimension mismatch");
    DictionaryState next;
    next.dictionary = psi.dictionary;
    next.psi = p.A * psi.psi + p.B * u;
    return next;
}

std::vector<double> prediction_error(const LinearPredictor& p, const SystemModel& model,
                                     const TrainingConfig& cfg, int horizon) {
    if (horizon < 0)
        throw ConfigError("prediction_error: horizon must be non-negative");
    const int n_val = 10;
    std::vector<double> sq(horizon + 1, 0.0);
    for (int t = 0; t < n_val; ++t) {
        Rng rng = derived_rng(cfg.seed, 2000, static_cast<std::uint32_t>(t));
        InfoState pi;
        pi.mean = sample_truncated_gaussian(cfg.init_mean, rng);
        pi.cov = initial_covariance(cfg.init_cov, model.state_dim, rng);
        DictionaryState psi_hat = eval_dictionary(lift_state(pi), cfg.dictionary);
        sq[0] += 0.0;
        for (int k = 1; k <= horizon; ++k) {
            const Eigen::VectorXd u = sample_truncated_gaussian(cfg.excitation, rng);
            pi = ce_step(model, pi, u);
            psi_hat = predict(p, psi_hat, u);
            const Eigen::VectorXd z = lift_state(pi).z;
            sq[k] += (p.C * psi_hat.psi - z).squaredNorm();
        }
    }
    std::vector<double> rms(horizon + 1);
    for (int k = 0; k <= horizon; ++k)
        rms[k] = std::sqrt(sq[k] / n_val);
    return rms;
}

namespace {

void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("save_data_csv: cannot open " + path);
    out << m.rows() << "," << m.cols() << "\n";
    out.precision(17);
    for (int j = 0; j < m.cols(); ++j) {
        for (int i = 0; i < m.rows(); ++i)
            out << (i ? "," : "") << m(i, j);
        out << "\n";
    }
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("load_data_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("load_data_csv: empty file " + path);
    int rows = 0, cols = 0;
    char comma = 0;
    std::istringstream hdr(line);
    if (!(hdr >> rows >> comma >> cols) || comma != ',' || rows <= 0 || cols < 0)
        throw ConfigError("load_data_csv: bad header in " + path);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        if (!std::getline(in, line))
            throw ConfigError("load_data_csv: truncated file " + path);
        std::istringstream row(line);
        std::string cell;
        for (int i = 0; i < rows; ++i) {
            if (!std::getline(row, cell, ','))
                throw ConfigError("load_data_csv: short column in " + path);
            m(i, j) = std::stod(cell);
        }
    }
    return m;
}

} // namespace

void save_data_csv(const DataMatrices& data, const std::string& prefix) {
    save_matrix_csv(data.psi_plus, prefix + "_psi_plus.csv");
    save_matrix_csv(data.psi_minus, prefix + "_psi_minus.csv");
    save_matrix_csv(data.u_data, prefix + "_u.csv");
    nlohmann::json meta{{"dictionary", data.dictionary},
                        {"state_dim", data.state_dim},
                        {"lifted_dim", data.lifted_dim},
                        {"discarded_trajectories", data.discarded_trajectories}};
    std::ofstream out(prefix + "_meta.json");
    if (!out)
        throw ConfigError("save_data_csv: cannot open " + prefix + "_meta.json");
    out << meta.dump(2) << "\n";
}

DataMatrices load_data_csv(const std::string& prefix) {
    DataMatrices data;
    data.psi_plus = load_matrix_csv(prefix + "_psi_plus.csv");
    data.psi_minus = load_matrix_csv(prefix + "_psi_minus.csv");
    data.u_data = load_matrix_csv(prefix + "_u.csv");
    std::ifstream in(prefix + "_meta.json");
    if (!in)
        throw ConfigError("load_data_csv: cannot open " + prefix + "_meta.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    data.dictionary = meta.at("dictionary").get<std::string>();
    data.state_dim = meta.at("state_dim").get<int>();
    data.lifted_dim = meta.at("lifted_dim").get<int>();
    data.discarded_trajectories = meta.value("discarded_trajectories", 0);
    return data;
}

nlohmann::json predictor_to_json(const LinearPredictor& p) {
    return nlohmann::json{{"A", matrix_to_json(p.A)},
                          {"B", matrix_to_json(p.B)},
                          {"C", matrix_to_json(p.C)},
                          {"dictionary", p.dictionary},
                          {"state_dim", p.state_dim},
                          {"lifted_dim", p.lifted_dim},
                          {"residual", p.residual},
                          {"min_singular_value", p.min_singular_value},
                          {"rank_deficient", p.rank_deficient}};
}

LinearPredictor predictor_from_json(const nlohmann::json& j) {
    LinearPredictor p;
    p.A = matrix_from_json(j.at("A"), "predictor.A");
    p.B = matrix_from_json(j.at("B"), "predictor.B");
    p.C = matrix_from_json(j.at("C"), "predictor.C");
    p.dictionary = j.at("dictionary").get<std::string>();
    p.state_dim = j.at("state_dim").get<int>();
    p.lifted_dim = j.at("lifted_dim").get<int>();
    p.residual = j.value("residual", 0.0);
    p.min_singular_value = j.value("min_singular_value", 0.0);
    p.rank_deficient = j.value("rank_deficient", false);
    return p;
}

} // namespace soclift
