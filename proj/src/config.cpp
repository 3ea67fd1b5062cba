#include "soclift/config.hpp"

#include <filesystem>
#include <fstream>

#include "soclift/errors.hpp"

namespace soclift {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(field + ": expected a nested array (matrix rows)");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
            throw ConfigError(field + ": ragged rows");
        for (int c = 0; c < cols; ++c) {
            if (!j[i][c].is_number())
                throw ConfigError(field + ": non-numeric entry");
            m(i, c) = j[i][c].get<double>();
        }
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array())
        throw ConfigError(field + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw ConfigError(field + ": non-numeric entry");
        v(static_cast<int>(i)) = j[i].get<double>();
    }
    return v;
}

NoiseSpec noise_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_object())
        throw ConfigError(field + ": expected an object {mean, cov, trunc}");
    NoiseSpec n;
    if (!j.contains("mean"))
        throw ConfigError(field + ".mean: missing");
    n.mean = vector_from_json(j.at("mean"), field + ".mean");
    if (!j.contains("cov"))
        throw ConfigError(field + ".cov: missing");
    n.covariance = matrix_from_json(j.at("cov"), field + ".cov");
    if (j.contains("trunc")) {
        if (j.at("trunc").is_string() && j.at("trunc").get<std::string>() == "inf")
            n.trunc = std::numeric_limits<double>::infinity();
        else if (j.at("trunc").is_number())
            n.trunc = j.at("trunc").get<double>();
        else
            throw ConfigError(field + ".trunc: expected a number or \"inf\"");
    }
    n.validate(field);
    return n;
}

nlohmann::json noise_to_json(const NoiseSpec& n) {
    nlohmann::json j{{"mean", vector_to_json(n.mean)}, {"cov", matrix_to_json(n.covariance)}};
    if (std::isinf(n.trunc))
        j["trunc"] = "inf";
    else
        j["trunc"] = n.trunc;
    return j;
}

SystemModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("model: expected an object");
    if (j.contains("name")) {
        const std::string name = j.at("name").get<std::string>();
        if (name == "elu-hw")
            return example_system();
        throw ConfigError("model.name: unknown built-in \"" + name + "\"");
    }

    if (!j.contains("A"))
        throw ConfigError("model.A: missing");
    const Eigen::MatrixXd A = matrix_from_json(j.at("A"), "model.A");
    if (!j.contains("B"))
        throw ConfigError("model.B: missing");
    const Eigen::MatrixXd B = matrix_from_json(j.at("B"), "model.B");
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw ConfigError("model: A must be square and B row-compatible");

    SystemModel m;
    m.state_dim = static_cast<int>(A.rows());
    m.input_dim = static_cast<int>(B.cols());
    m.f = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return Eigen::VectorXd(A * x + B * u);
    };
    m.jac_f = [A](const Eigen::VectorXd&, const Eigen::VectorXd&) { return A; };

    if (!j.contains("output"))
        throw ConfigError("model.output: missing");
    const nlohmann::json& out = j.at("output");
    const std::string type = out.value("type", "");
    if (type == "elu-sum") {
        const double offset = out.value("offset", 0.0);
        m.output_dim = 1;
        m.h = [offset](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
            Eigen::VectorXd y(1);
            y(0) = elu(x.sum() - offset);
            return y;
        };
        m.jac_h = [offset](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
            Eigen::MatrixXd H(1, x.size());
            H.setConstant(elu_deriv(x.sum() - offset));
            return H;
        };
    } else if (type == "linear") {
        if (!out.contains("C"))
            throw ConfigError("model.output.C: missing");
        const Eigen::MatrixXd C = matrix_from_json(out.at("C"), "model.output.C");
        if (C.cols() != A.rows())
            throw ConfigError("model.output.C: column count must match the state dimension");
        m.output_dim = static_cast<int>(C.rows());
        m.h = [C](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
            return Eigen::VectorXd(C * x);
        };
        m.jac_h = [C](const Eigen::VectorXd&, const Eigen::VectorXd&) { return C; };
    } else {
        throw ConfigError("model.output.type: expected \"elu-sum\" or \"linear\"");
    }

    if (!j.contains("process_noise"))
        throw ConfigError("model.process_noise: missing");
    m.process_noise = noise_from_json(j.at("process_noise"), "model.process_noise");
    if (!j.contains("measurement_noise"))
        throw ConfigError("model.measurement_noise: missing");
    m.measurement_noise = noise_from_json(j.at("measurement_noise"), "model.measurement_noise");
    if (!j.contains("prior"))
        throw ConfigError("model.prior: missing");
    m.prior = noise_from_json(j.at("prior"), "model.prior");
    m.validate();
    return m;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos)
            comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t dots = item.find("..");
        try {
            if (dots == std::string::npos) {
                seeds.push_back(std::stoull(item));
            } else {
                const std::uint64_t lo = std::stoull(item.substr(0, dots));
                const std::uint64_t hi = std::stoull(item.substr(dots + 2));
                if (hi < lo)
                    throw ConfigError("seeds: descending range \"" + item + "\"");
                for (std::uint64_t s = lo; s <= hi; ++s)
                    seeds.push_back(s);
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("seeds: cannot parse \"" + item + "\"");
        } catch (const std::out_of_range&) {
            throw ConfigError("seeds: out of range \"" + item + "\"");
        }
        pos = comma + 1;
    }
    if (seeds.empty())
        throw ConfigError("seeds: at least one seed required");
    return seeds;
}

namespace {

int get_positive_int(const nlohmann::json& j, const std::string& key,
                     const std::string& field, int fallback) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number_integer() || j.at(key).get<int>() <= 0)
        throw ConfigError(field + ": expected a positive integer");
    return j.at(key).get<int>();
}

std::vector<std::uint64_t> seeds_from_json(const nlohmann::json& j) {
    if (j.is_string())
        return parse_seed_range(j.get<std::string>());
    if (j.is_array()) {
        std::vector<std::uint64_t> seeds;
        for (const auto& s : j) {
            if (!s.is_number_unsigned() && !s.is_number_integer())
                throw ConfigError("simulation.seeds: expected integers");
            seeds.push_back(s.get<std::uint64_t>());
        }
        if (seeds.empty())
            throw ConfigError("simulation.seeds: at least one seed required");
        return seeds;
    }
    throw ConfigError("simulation.seeds: expected an array or a range string");
}

} // namespace

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("config: expected a JSON object");
    ExperimentConfig cfg;

    if (!j.contains("model"))
        throw ConfigError("model: missing section");
    cfg.model_json = j.at("model");
    cfg.model = model_from_json(cfg.model_json);

    const nlohmann::json cost = j.value("cost", nlohmann::json::object());
    cfg.cost.Q = cost.contains("Q")
                     ? matrix_from_json(cost.at("Q"), "cost.Q")
                     : Eigen::MatrixXd(Eigen::MatrixXd::Identity(cfg.model.state_dim,
                                                                 cfg.model.state_dim));
    cfg.cost.R = cost.contains("R")
                     ? matrix_from_json(cost.at("R"), "cost.R")
                     : Eigen::MatrixXd(Eigen::MatrixXd::Identity(cfg.model.input_dim,
                                                                 cfg.model.input_dim));
    if (cfg.cost.Q.rows() != cfg.model.state_dim)
        throw ConfigError("cost.Q: size must match the state dimension");
    if (cfg.cost.R.rows() != cfg.model.input_dim)
        throw ConfigError("cost.R: size must match the input dimension");

    const nlohmann::json tr = j.value("training", nlohmann::json::object());
    cfg.training.num_trajectories =
        get_positive_int(tr, "num_trajectories", "training.num_trajectories", 100);
    cfg.training.steps_per_trajectory =
        get_positive_int(tr, "steps_per_trajectory", "training.steps_per_trajectory", 200);
    cfg.training.excitation =
        tr.contains("excitation")
            ? noise_from_json(tr.at("excitation"), "training.excitation")
            : NoiseSpec{Eigen::VectorXd::Zero(cfg.model.input_dim),
                        0.2 * Eigen::MatrixXd::Identity(cfg.model.input_dim,
                                                        cfg.model.input_dim),
                        2.0};
    cfg.training.init_mean = tr.contains("init_mean")
                                 ? noise_from_json(tr.at("init_mean"), "training.init_mean")
                                 : cfg.model.prior;
    if (tr.contains("init_cov_scheme")) {
        const nlohmann::json& sc = tr.at("init_cov_scheme");
        cfg.training.init_cov.name = sc.value("name", "wishart");
        cfg.training.init_cov.scale = sc.value("scale", 0.5);
        cfg.training.init_cov.jitter = sc.value("jitter", 0.1);
        if (cfg.training.init_cov.name != "wishart" &&
            cfg.training.init_cov.name != "fixed-identity")
            throw ConfigError("training.init_cov_scheme.name: unknown scheme");
    }
    cfg.training.dictionary = tr.value("dictionary", std::string("affine"));
    if (tr.contains("seed"))
        cfg.training.seed = tr.at("seed").get<std::uint64_t>();

    const nlohmann::json sim = j.value("simulation", nlohmann::json::object());
    cfg.simulation.horizon = get_positive_int(sim, "horizon", "simulation.horizon", 1000);
    cfg.simulation.seeds = sim.contains("seeds") ? seeds_from_json(sim.at("seeds"))
                                                 : parse_seed_range("1..20");
    cfg.simulation.controller = sim.value("controller", std::string("soc-lqr"));
    if (cfg.simulation.controller != "soc-lqr" && cfg.simulation.controller != "ce-lqr" &&
        cfg.simulation.controller != "zero" && cfg.simulation.controller != "custom-gain")
        throw ConfigError("simulation.controller: expected soc-lqr | ce-lqr | zero | custom-gain");
    if (sim.contains("custom_gain"))
        cfg.simulation.custom_gain = matrix_from_json(sim.at("custom_gain"),
                                                      "simulation.custom_gain");
    else if (cfg.simulation.controller == "custom-gain")
        throw ConfigError("simulation.custom_gain: required for controller custom-gain");

    const nlohmann::json ctl = j.value("control", nlohmann::json::object());
    cfg.control.reg = ctl.value("reg", 1e-9);
    cfg.control.dare_tol = ctl.value("dare_tol", 1e-10);
    cfg.control.dare_max_iter = ctl.value("dare_max_iter", 100000);
    cfg.control.ridge = ctl.value("ridge", 0.0);
    if (cfg.control.reg < 0 || cfg.control.dare_tol <= 0 || cfg.control.dare_max_iter <= 0 ||
        cfg.control.ridge < 0)
        throw ConfigError("control: reg/ridge must be >= 0, dare_tol/dare_max_iter positive");

    return cfg;
}

nlohmann::json builtin_experiment_json() {
    return nlohmann::json{
        {"model", {{"name", "elu-hw"}}},
        {"cost",
         {{"Q", {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}}, {"R", {{1.0}}}}},
        {"training",
         {{"num_trajectories", 100},
          {"steps_per_trajectory", 200},
          {"excitation", {{"mean", {0.0}}, {"cov", {{0.2}}}, {"trunc", 2.0}}},
          {"init_cov_scheme", {{"name", "wishart"}, {"scale", 0.5}, {"jitter", 0.1}}},
          {"dictionary", "affine"},
          {"seed", 12345}}},
        {"simulation", {{"horizon", 1000}, {"seeds", "1..20"}, {"controller", "soc-lqr"}}},
        {"control", {{"reg", 1e-9}, {"dare_tol", 1e-10}, {"dare_max_iter", 100000}}}};
}

ExperimentConfig load_experiment(const std::string& path_or_name) {
    if (!std::filesystem::exists(path_or_name)) {
        if (path_or_name == "elu-hw")
            return experiment_from_json(builtin_experiment_json());
        throw ConfigError("config: no such file or built-in name \"" + path_or_name + "\"");
    }
    std::ifstream in(path_or_name);
    if (!in)
        throw ConfigError("config: cannot open " + path_or_name);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path_or_name + ": " + e.what());
    }
    return experiment_from_json(j);
}

} // namespace soclift
