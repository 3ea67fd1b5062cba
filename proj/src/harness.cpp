#include "soclift/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "soclift/errors.hpp"

namespace soclift {

namespace {

// Stream purposes for a closed-loop run; training uses 1000+.
enum StreamPurpose : std::uint32_t {
    kPlantNoise = 0,
    kMeasurementNoise = 1,
    kInitialState = 2,
};

void append_value(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

Controller soc_controller(const LinearPredictor& p, const LqrGain& g) {
    Controller c;
    c.kind = ControllerKind::soc_lqr;
    c.K = g.K;
    c.dictionary = p.dictionary;
    if (c.K.cols() != p.dict_dim())
        throw ConfigError("soc_controller: gain width does not match the predictor");
    return c;
}

Controller ce_controller(const LqrGain& g) {
    Controller c;
    c.kind = ControllerKind::ce_lqr;
    c.K = g.K;
    return c;
}

Controller zero_controller(int input_dim) {
    Controller c;
    c.kind = ControllerKind::zero;
    c.K = Eigen::MatrixXd::Zero(input_dim, 1);
    return c;
}

Controller custom_controller(const Eigen::MatrixXd& K) {
    Controller c;
    c.kind = ControllerKind::custom_gain;
    c.K = K;
    return c;
}

Eigen::VectorXd control_input(const Controller& c, const Belief& b) {
    switch (c.kind) {
    case ControllerKind::zero:
        return Eigen::VectorXd::Zero(c.K.rows());
    case ControllerKind::ce_lqr:
    case ControllerKind::custom_gain:
        return -(c.K * b.mean);
    case ControllerKind::soc_lqr: {
        const DictionaryState psi =
            eval_dictionary(lift_state(InfoState{b.mean, b.cov}), c.dictionary);
        return -(c.K * psi.psi);
    }
    }
    throw ConfigError("control_input: unknown controller kind");
}

Trace run_closed_loop(const SystemModel& model, const Controller& c,
                      const RunParams& params, std::uint64_t seed) {
    if (params.horizon < 1)
        throw ConfigError("run_closed_loop: horizon must be >= 1");
    if (params.Q.rows() != model.state_dim || params.R.rows() != model.input_dim)
        throw ConfigError("run_closed_loop: cost dimensions do not match the model");

    Rng plant_rng = derived_rng(seed, kPlantNoise);
    Rng meas_rng = derived_rng(seed, kMeasurementNoise);
    Rng init_rng = derived_rng(seed, kInitialState);

    Eigen::VectorXd x = sample_truncated_gaussian(model.prior, init_rng);
    Belief belief{model.prior.mean, model.prior.covariance};

    Trace trace;
    trace.steps.reserve(params.horizon);
    for (int k = 0; k < params.horizon; ++k) {
        TraceStep step;
        step.x_true = x;
        step.x_est = belief.mean;
        step.cov = belief.cov;
        step.u = control_input(c, belief);
        step.sum_x = x.sum();
        step.stage_cost = x.dot(params.Q * x) + step.u.dot(params.R * step.u);

        // u is applied, the output of the current state becomes available,
        // then the plant moves on; the filter digests (u, y) one step behind
        // the controller.
        step.y = measure(model, x, step.u, meas_rng);
        const Eigen::VectorXd x_next = step_plant(model, x, step.u, plant_rng);
        try {
            belief = ekf_step(model, belief, step.u, step.y);
        } catch (const NumericalError& e) {
            trace.steps.push_back(std::move(step));
            trace.truncated = true;
            trace.error = e.what();
            return trace;
        }
        x = x_next;
        trace.steps.push_back(std::move(step));
    }
    trace.has_terminal = true;
    trace.x_true_final = x;
    trace.x_est_final = belief.mean;
    trace.cov_final = belief.cov;
    return trace;
}

Summary metrics(const Trace& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    Summary s;
    s.horizon = static_cast<int>(t.steps.size());
    if (s.horizon == 0)
        return s;
    double cost = 0.0, err = 0.0, sumx = 0.0, covtr = 0.0;
    for (const TraceStep& step : t.steps) {
        cost += step.x_true.dot(Q * step.x_true) + step.u.dot(R * step.u);
        err += (step.x_est - step.x_true).squaredNorm();
        sumx += step.x_true.sum();
        covtr += step.cov.trace();
    }
    if (t.has_terminal)
        cost += t.x_true_final.dot(Q * t.x_true_final);
    s.avg_cost = cost / s.horizon;
    s.epsilon = err / s.horizon;
    s.mean_sum_x = sumx / s.horizon;
    s.avg_cov_trace = covtr / s.horizon;
    return s;
}

CompareResult compare_controllers(const SystemModel& model, const Controller& baseline,
                                  const Controller& candidate, const RunParams& params,
                                  const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty())
        throw ConfigError("compare_controllers: at least one seed required");
    CompareResult r;
    r.seeds = seeds;
    auto accumulate = [](Summary& acc, const Summary& s) {
        acc.avg_cost += s.avg_cost;
        acc.epsilon += s.epsilon;
        acc.mean_sum_x += s.mean_sum_x;
        acc.avg_cov_trace += s.avg_cov_trace;
        acc.horizon = s.horizon;
    };
    for (std::uint64_t seed : seeds) {
        const Summary sb = metrics(run_closed_loop(model, baseline, params, seed),
                                   params.Q, params.R);
        const Summary sc = metrics(run_closed_loop(model, candidate, params, seed),
                                   params.Q, params.R);
        r.baseline_per_seed.push_back(sb);
        r.candidate_per_seed.push_back(sc);
        accumulate(r.baseline, sb);
        accumulate(r.candidate, sc);
        if (sc.avg_cov_trace < sb.avg_cov_trace)
            ++r.seeds_candidate_lower_cov_trace;
    }
    const double n = static_cast<double>(seeds.size());
    for (Summary* s : {&r.baseline, &r.candidate}) {
        s->avg_cost /= n;
        s->epsilon /= n;
        s->mean_sum_x /= n;
        s->avg_cov_trace /= n;
    }
    r.cost_reduction_pct = 100.0 * (1.0 - r.candidate.avg_cost / r.baseline.avg_cost);
    r.epsilon_reduction_pct = 100.0 * (1.0 - r.candidate.epsilon / r.baseline.epsilon);
    return r;
}

TrainedBundle train_pipeline(const ExperimentConfig& cfg) {
    TrainedBundle b;
    b.data = collect_data(cfg.model, cfg.training);
    b.predictor = fit_edmd(b.data, cfg.control.ridge);

    const CostMatrices cost =
        build_cost(cfg.cost.Q, cfg.cost.R, b.predictor.dict_dim());
    const DareOptions opts{cfg.control.dare_tol, cfg.control.dare_max_iter};
    b.soc_gain = design_soc_lqr(b.predictor, cost, cfg.control.reg, opts);
    b.ce_gain = design_ce_lqr(cfg.model, cfg.cost.Q, cfg.cost.R,
                              Eigen::VectorXd::Zero(cfg.model.state_dim),
                              Eigen::VectorXd::Zero(cfg.model.input_dim), opts);
    return b;
}

CompareResult run_comparison(const ExperimentConfig& cfg) {
    const TrainedBundle b = train_pipeline(cfg);
    const RunParams params{cfg.simulation.horizon, cfg.cost.Q, cfg.cost.R};
    return compare_controllers(cfg.model, ce_controller(b.ce_gain),
                               soc_controller(b.predictor, b.soc_gain), params,
                               cfg.simulation.seeds);
}

std::string trace_to_csv(const Trace& t) {
    const int rx = t.steps.empty()
                       ? (t.has_terminal ? static_cast<int>(t.x_true_final.size()) : 3)
                       : static_cast<int>(t.steps[0].x_true.size());
    const int ru = t.steps.empty() ? 1 : static_cast<int>(t.steps[0].u.size());
    const int ry = t.steps.empty() ? 1 : static_cast<int>(t.steps[0].y.size());

    std::string out = "k";
    auto columns = [&out](const std::string& base, int n) {
        if (n == 1) {
            out += "," + base;
        } else {
            for (int i = 1; i <= n; ++i)
                out += "," + base + std::to_string(i);
        }
    };
    columns("x", rx);
    columns("xhat", rx);
    out += ",trSigma";
    columns("u", ru);
    columns("y", ry);
    out += ",stage_cost,sumx\n";

    auto row = [&out](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& xh,
                      double trS, const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                      double cost, double sumx) {
        out += std::to_string(k);
        for (int i = 0; i < x.size(); ++i) {
            out += ',';
            append_value(out, x(i));
        }
        for (int i = 0; i < xh.size(); ++i) {
            out += ',';
            append_value(out, xh(i));
        }
        out += ',';
        append_value(out, trS);
        for (int i = 0; i < u.size(); ++i) {
            out += ',';
            append_value(out, u(i));
        }
        for (int i = 0; i < y.size(); ++i) {
            out += ',';
            append_value(out, y(i));
        }
        out += ',';
        append_value(out, cost);
        out += ',';
        append_value(out, sumx);
        out += '\n';
    };

    int k = 0;
    for (const TraceStep& s : t.steps)
        row(k++, s.x_true, s.x_est, s.cov.trace(), s.u, s.y, s.stage_cost, s.sum_x);
    if (t.has_terminal) {
        // Terminal row: no input or output exists at the horizon, so those
        // columns hold zeros and stage_cost holds the terminal state cost
        // already folded into the achieved-cost metric.
        row(k, t.x_true_final, t.x_est_final, t.cov_final.trace(),
            Eigen::VectorXd::Zero(ru), Eigen::VectorXd::Zero(ry), 0.0,
            t.x_true_final.sum());
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    return cells;
}

} // namespace

Trace trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("trace_from_csv: missing header");
    const std::vector<std::string> header = split_csv_line(line);

    auto count_prefix = [&header](const std::string& base) {
        int n = 0;
        for (const std::string& h : header)
            if (h == base || (h.rfind(base, 0) == 0 &&
                              h.size() > base.size() &&
                              std::isdigit(static_cast<unsigned char>(h[base.size()]))))
                ++n;
        return n;
    };
    const int rx = count_prefix("x");
    const int ru = count_prefix("u");
    const int ry = count_prefix("y");
    if (rx <= 0 || ru <= 0 || ry <= 0 ||
        static_cast<int>(header.size()) != 1 + 2 * rx + 1 + ru + ry + 2)
        throw ConfigError("trace_from_csv: unrecognized header");

    struct Row {
        Eigen::VectorXd x, xh, u, y;
        double trS = 0, cost = 0, sumx = 0;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ConfigError("trace_from_csv: ragged row");
        Row r;
        int c = 1;
        auto grab = [&cells, &c](int n) {
            Eigen::VectorXd v(n);
            for (int i = 0; i < n; ++i)
                v(i) = std::stod(cells[c++]);
            return v;
        };
        r.x = grab(rx);
        r.xh = grab(rx);
        r.trS = std::stod(cells[c++]);
        r.u = grab(ru);
        r.y = grab(ry);
        r.cost = std::stod(cells[c++]);
        r.sumx = std::stod(cells[c]);
        rows.push_back(std::move(r));
    }

    Trace t;
    if (rows.empty())
        return t;
    // The last row is the terminal record written by trace_to_csv.
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        TraceStep s;
        s.x_true = rows[i].x;
        s.x_est = rows[i].xh;
        s.cov = Eigen::MatrixXd::Zero(rx, rx); // full covariance is not in the CSV
        s.cov.diagonal().setConstant(rows[i].trS / rx);
        s.u = rows[i].u;
        s.y = rows[i].y;
        s.stage_cost = rows[i].cost;
        s.sum_x = rows[i].sumx;
        t.steps.push_back(std::move(s));
    }
    t.has_terminal = true;
    t.x_true_final = rows.back().x;
    t.x_est_final = rows.back().xh;
    t.cov_final = Eigen::MatrixXd::Zero(rx, rx);
    t.cov_final.diagonal().setConstant(rows.back().trS / rx);
    return t;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot open for writing: " + path);
    out << content;
    if (!out)
        throw ConfigError("write failed: " + path);
}

void export_trace_csv(const Trace& t, const std::string& path) {
    write_text_file(path, trace_to_csv(t));
}

nlohmann::json summary_to_json(const Summary& s) {
    return nlohmann::json{{"cost", s.avg_cost},
                          {"epsilon", s.epsilon},
                          {"mean_sum_x", s.mean_sum_x},
                          {"avg_cov_trace", s.avg_cov_trace},
                          {"horizon", s.horizon}};
}

nlohmann::json comparison_to_json(const CompareResult& r) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < r.seeds.size(); ++i)
        per_seed.push_back({{"seed", r.seeds[i]},
                            {"ce", summary_to_json(r.baseline_per_seed[i])},
                            {"soc", summary_to_json(r.candidate_per_seed[i])}});
    return nlohmann::json{
        {"ce", summary_to_json(r.baseline)},
        {"soc", summary_to_json(r.candidate)},
        {"reduction",
         {{"cost_pct", r.cost_reduction_pct}, {"epsilon_pct", r.epsilon_reduction_pct}}},
        {"seeds_soc_lower_cov_trace", r.seeds_candidate_lower_cov_trace},
        {"num_seeds", r.seeds.size()},
        {"per_seed", per_seed}};
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series) {
    const int width = 860, height = 420, margin = 50;
    double lo = 0.0, hi = 1.0;
    std::size_t max_len = 1;
    bool first = true;
    for (const ChartSeries& s : series) {
        max_len = std::max(max_len, s.values.size());
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12)
        hi = lo + 1.0;

    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n"
        << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << margin << "\" y=\"" << margin - 8
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << hi << "</text>\n"
        << "<text x=\"" << margin << "\" y=\"" << height - margin + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << lo << "</text>\n";

    int color = 0;
    for (const ChartSeries& s : series) {
        if (s.values.empty())
            continue;
        svg << "<polyline fill=\"none\" stroke=\"" << palette[color % 5]
            << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double px =
                margin + (width - 2.0 * margin) * (max_len > 1 ? double(i) / (max_len - 1) : 0.0);
            const double py =
                height - margin - (height - 2.0 * margin) * (s.values[i] - lo) / (hi - lo);
            svg << px << "," << py << " ";
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << width - margin - 120 << "\" y=\"" << margin + 16 * (color + 1)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << palette[color % 5]
            << "\">" << s.name << "</text>\n";
        ++color;
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

nlohmann::json bundle_to_json(const TrainedBundle& b, const ExperimentConfig& cfg) {
    return nlohmann::json{
        {"model", cfg.model_json},
        {"cost", {{"Q", matrix_to_json(cfg.cost.Q)}, {"R", matrix_to_json(cfg.cost.R)}}},
        {"predictor", predictor_to_json(b.predictor)},
        {"soc_gain", gain_to_json(b.soc_gain)},
        {"ce_gain", gain_to_json(b.ce_gain)},
        {"training",
         {{"num_trajectories", cfg.training.num_trajectories},
          {"steps_per_trajectory", cfg.training.steps_per_trajectory},
          {"excitation", noise_to_json(cfg.training.excitation)},
          {"init_mean", noise_to_json(cfg.training.init_mean)},
          {"init_cov_scheme",
           {{"name", cfg.training.init_cov.name},
            {"scale", cfg.training.init_cov.scale},
            {"jitter", cfg.training.init_cov.jitter}}},
          {"dictionary", cfg.training.dictionary},
          {"seed", cfg.training.seed},
          {"discarded_trajectories", b.data.discarded_trajectories}}},
        {"fit",
         {{"residual", b.predictor.residual},
          {"min_singular_value", b.predictor.min_singular_value},
          {"rank_deficient", b.predictor.rank_deficient}}}};
}

} // namespace soclift
