// sqbox command-line tool: simulation, fitting, band prediction, coverage
// evaluation, and the replication studies, all file-driven.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqbox/conformal.hpp"
#include "sqbox/envs/battle.hpp"
#include "sqbox/envs/tamarisk.hpp"
#include "sqbox/envs/trajectory.hpp"
#include "sqbox/errors.hpp"
#include "sqbox/eval.hpp"
#include "sqbox/qrf.hpp"
#include "sqbox/trajband.hpp"

namespace {

using json = nlohmann::json;

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Relative paths land under SQBOX_OUT_DIR when it is set. Parent
// directories are created on demand so --out results/report.json works on
// a fresh tree; a failure surfaces when the file itself is opened.
std::string resolve_out(const std::string& path) {
    std::string resolved = path;
    if (!path.empty() && path.front() != '/') {
        if (const char* dir = std::getenv("SQBOX_OUT_DIR")) {
            std::string d = dir;
            if (!d.empty()) {
                if (d.back() != '/') d += '/';
                resolved = d + path;
            }
        }
    }
    std::filesystem::path parent =
        std::filesystem::path(resolved).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    return resolved;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sqbox::IoError("cannot open for writing: " + path);
    out << text;
    out.flush();
    if (!out) throw sqbox::IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sqbox::IoError("cannot open: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw sqbox::IoError("cannot parse " + path + ": " + e.what());
    }
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(
                       static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw sqbox::InvalidConfig("not a number: '" + item + "'");
        }
    }
    if (values.empty())
        throw sqbox::InvalidConfig("empty start-state vector");
    return values;
}

void emit(std::ostream& out, const std::string& text,
          const std::string& out_path) {
    if (out_path.empty()) {
        out << text;
    } else {
        write_text_file(resolve_out(out_path), text);
        std::cout << "wrote " << resolve_out(out_path) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Plot-data exports: (x, y, series) triples, one CSV per panel.

std::string join_dir(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

class PlotWriter {
  public:
    explicit PlotWriter(const std::string& dir) : dir_(dir) {}

    void write(const std::string& name,
               const std::vector<std::array<std::string, 3>>& rows) {
        std::string text = "x,y,series\n";
        for (const auto& row : rows)
            text += row[0] + "," + row[1] + "," + row[2] + "\n";
        std::string path = resolve_out(join_dir(dir_, name));
        write_text_file(path, text);
        std::cout << "wrote " << path << "\n";
    }

  private:
    std::string dir_;
};

void emit_gaussian_plots(const json& report, PlotWriter& writer) {
    std::vector<std::array<std::string, 3>> coverage, quantile, width;
    for (const json& r : report.at("records")) {
        std::string series = r.at("method").get<std::string>() +
                             ":rho=" + fmt_g(r.at("rho").get<double>());
        std::string x = fmt_g(r.at("delta").get<double>());
        coverage.push_back(
            {x, fmt_g(r.at("mean_coverage").get<double>()), series});
        quantile.push_back(
            {x, fmt_g(r.at("coverage_delta_quantile").get<double>()),
             series});
        width.push_back({x, fmt_g(r.at("mean_width").get<double>()), series});
    }
    writer.write("gaussian-coverage.csv", coverage);
    writer.write("gaussian-coverage-quantile.csv", quantile);
    writer.write("gaussian-width.csv", width);
}

void emit_mdp_plots(const json& report, PlotWriter& writer) {
    const std::string env = report.at("env").get<std::string>();
    std::vector<std::array<std::string, 3>> coverage, ci, width, by_t, fail;
    for (const json& r : report.at("records")) {
        std::string series = r.at("method").get<std::string>() +
                             ":delta=" + fmt_g(r.at("delta").get<double>());
        std::string x = std::to_string(r.at("size").get<long>());
        coverage.push_back({x, fmt_g(r.at("coverage").get<double>()),
                            series});
        ci.push_back({x, fmt_g(r.at("ci_lower").get<double>()), series});
        width.push_back({x, fmt_g(r.at("mean_width").get<double>()), series});
    }
    for (const json& p : report.at("width_profiles")) {
        std::string series = p.at("method").get<std::string>() +
                             ":delta=" + fmt_g(p.at("delta").get<double>());
        const auto values = p.at("mean_width_by_t").get<std::vector<double>>();
        for (std::size_t t = 0; t < values.size(); ++t)
            by_t.push_back(
                {std::to_string(t + 1), fmt_g(values[t]), series});
    }
    for (const json& c : report.at("failure_table").at("cells")) {
        std::string series = "key2=" + std::to_string(c.at("key2").get<long>());
        fail.push_back({std::to_string(c.at("key1").get<long>()),
                        fmt_g(c.at("rate").get<double>()), series});
    }
    writer.write(env + "-coverage.csv", coverage);
    writer.write(env + "-ci-lower.csv", ci);
    writer.write(env + "-width.csv", width);
    writer.write(env + "-width-by-t.csv", by_t);
    writer.write(env + "-failure.csv", fail);
}

void emit_quantile_plots(const json& report, PlotWriter& writer) {
    std::vector<std::array<std::string, 3>> success, med;
    for (const json& r : report.at("records")) {
        std::string delta = fmt_g(r.at("delta").get<double>());
        std::string x = std::to_string(r.at("n").get<long>());
        success.push_back(
            {x, fmt_g(r.at("strict_success").get<double>()),
             "strict:delta=" + delta});
        success.push_back({x, fmt_g(r.at("ucb_success").get<double>()),
                           "ucb:delta=" + delta});
        med.push_back({x, fmt_g(r.at("strict_median").get<double>()),
                       "strict:delta=" + delta});
        med.push_back({x, fmt_g(r.at("ucb_median").get<double>()),
                       "ucb:delta=" + delta});
    }
    writer.write("quantile-ci-success.csv", success);
    writer.write("quantile-ci-median.csv", med);
}

void emit_plot_files(const json& report, const std::string& out_dir) {
    PlotWriter writer(out_dir);
    const std::string kind = report.value("kind", "");
    if (kind == "gaussian-study") {
        emit_gaussian_plots(report, writer);
    } else if (kind == "mdp-study") {
        emit_mdp_plots(report, writer);
    } else if (kind == "quantile-ci-study") {
        emit_quantile_plots(report, writer);
    } else {
        throw sqbox::InvalidConfig("unknown report kind: '" + kind + "'");
    }
}

// ---------------------------------------------------------------------------
// Shared option bundles.

struct ForestOpts {
    long trees = 1000;
    long min_leaf = 20;
    long features_per_split = 0;
    int workers = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--trees", trees, "trees per timestep forest")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--min-leaf", min_leaf, "minimum leaf size")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--features-per-split", features_per_split,
                        "candidate features per split (0 auto, -1 all)");
        cmd->add_option("--workers", workers,
                        "worker threads (0 = SQBOX_WORKERS or hardware)");
    }

    sqbox::ForestParams params(std::uint64_t seed) const {
        sqbox::ForestParams p;
        p.tree_count = trees;
        p.min_leaf = min_leaf;
        p.features_per_split = features_per_split;
        p.seed = seed;
        p.workers = workers;
        return p;
    }
};

struct StrategyOpts {
    std::string name = "strict";
    double ucb_confidence = 0.0;  // 0: derive 1 - delta/2

    void attach(CLI::App* cmd) {
        cmd->add_option("--strategy", name, "conformal quantile strategy")
            ->check(CLI::IsMember({"strict", "ucb"}));
        cmd->add_option("--ucb-confidence", ucb_confidence,
                        "UCB confidence level (default 1 - delta/2)")
            ->check(CLI::Range(0.0, 1.0));
    }

    sqbox::QuantileStrategy strategy(double delta) const {
        if (name == "strict") return sqbox::QuantileStrategy::strict();
        if (ucb_confidence > 0.0)
            return sqbox::QuantileStrategy::ucb(ucb_confidence);
        return sqbox::QuantileStrategy::ucb_for(delta);
    }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
    std::string env;
    long n = 100;
    long horizon = 0;  // 0: environment default
    std::uint64_t seed = 1;
    std::string out;
    double budget = 2.0;
    bool top_fix = false;
    bool no_noise = false;
};

void run_simulate(const SimulateOpts& opt) {
    sqbox::TrajectoryFile file;
    file.env = opt.env;
    file.seed = opt.seed;
    if (opt.env == "tamarisk") {
        sqbox::TamariskConfig config;
        if (opt.horizon > 0) config.horizon = opt.horizon;
        config.budget = opt.budget;
        config.top_filter_eradicate_plant = opt.top_fix;
        file.config_json = sqbox::tamarisk_config_json(config);
        file.records = sqbox::sample_trajectories(config, opt.n, opt.seed);
    } else {
        sqbox::BattleConfig config;
        if (opt.horizon > 0) config.horizon = opt.horizon;
        config.reward_noise = !opt.no_noise;
        file.config_json = sqbox::battle_config_json(config);
        file.records = sqbox::sample_trajectories(config, opt.n, opt.seed);
    }
    std::string path = resolve_out(opt.out);
    sqbox::save_trajectories(file, path);
    std::cout << "wrote " << opt.n << " " << opt.env << " trajectories to "
              << path << "\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
    std::string input;
    std::string method;  // sqbox | cte
    long l = 0;          // 0: half of the records
    long m = 100;
    double delta = 0.1;
    double delta_prime = 0.2;
    std::uint64_t seed = 1;
    std::string out;
    ForestOpts forest;
    StrategyOpts strategy;
};

void run_fit(const FitOpts& opt) {
    sqbox::TrajectoryFile file = sqbox::load_trajectories(opt.input);
    sqbox::TrajectoryDataset data = sqbox::to_dataset(file.records);
    sqbox::SplitConfig config;
    config.l = opt.l > 0 ? opt.l : static_cast<long>(data.size()) / 2;
    config.m = opt.m;
    config.delta = opt.delta;
    config.delta_prime = opt.method == "cte" ? opt.delta : opt.delta_prime;
    config.strategy = opt.strategy.strategy(opt.delta);
    sqbox::ForestParams params = opt.forest.params(opt.seed);
    std::string path = resolve_out(opt.out);
    if (opt.method == "sqbox") {
        sqbox::SqboxModel model = sqbox::fit_sqbox(data, config, params);
        sqbox::save_model(model, path);
        std::cout << "sqbox model: beta " << fmt_g(model.beta)
                  << ", guaranteed " << (model.guaranteed ? "yes" : "no")
                  << ", wrote " << path << "\n";
    } else {
        sqbox::CteModel model = sqbox::fit_cte(data, config, params);
        sqbox::save_model(model, path);
        std::cout << "cte model: c_hat " << fmt_g(model.c_hat)
                  << ", guaranteed " << (model.guaranteed ? "yes" : "no")
                  << ", wrote " << path << "\n";
    }
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string model;
    std::string start;  // comma-separated feature vector
    std::string input;  // alternative: take a start state from a file
    long index = 0;
    std::string out;
};

void run_predict(const PredictOpts& opt) {
    std::vector<double> x;
    if (!opt.start.empty()) {
        x = parse_csv_doubles(opt.start);
    } else if (!opt.input.empty()) {
        sqbox::TrajectoryFile file = sqbox::load_trajectories(opt.input);
        if (opt.index < 0 ||
            opt.index >= static_cast<long>(file.records.size()))
            throw sqbox::InvalidConfig("--index out of range");
        x = file.records[opt.index].start_features;
    } else {
        throw sqbox::InvalidConfig("predict needs --start or --input");
    }

    const std::string kind = sqbox::model_kind_in_file(opt.model);
    sqbox::Band band;
    std::string header;
    if (kind == "sqbox-model") {
        sqbox::SqboxModel model = sqbox::load_sqbox_model(opt.model);
        band = sqbox::predict_band(model, x);
        header = "# sqbox-model delta " + fmt_g(model.config.delta) +
                 " beta " + fmt_g(model.beta) + "\n";
    } else if (kind == "cte-model") {
        sqbox::CteModel model = sqbox::load_cte_model(opt.model);
        band = sqbox::predict_band(model, x);
        header = "# cte-model delta " + fmt_g(model.config.delta) +
                 " total_exceedance_bound " + fmt_g(model.c_hat) + "\n";
    } else {
        throw sqbox::IoError("not a model file: " + opt.model);
    }

    std::string text = header + "t\tlo\thi\n";
    for (std::size_t t = 0; t < band.horizon(); ++t)
        text += std::to_string(t + 1) + "\t" + fmt_g(band.lo[t]) + "\t" +
                fmt_g(band.hi[t]) + "\n";
    emit(std::cout, text, opt.out);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string model;
    std::string input;
    double ci_confidence = 0.99;
    std::string out;
};

void run_evaluate(const EvaluateOpts& opt) {
    const std::string kind = sqbox::model_kind_in_file(opt.model);
    sqbox::SqboxModel sq;
    sqbox::CteModel cte;
    if (kind == "sqbox-model") {
        sq = sqbox::load_sqbox_model(opt.model);
    } else if (kind == "cte-model") {
        cte = sqbox::load_cte_model(opt.model);
    } else {
        throw sqbox::IoError("not a model file: " + opt.model);
    }
    const bool is_sqbox = kind == "sqbox-model";

    sqbox::TrajectoryFile file = sqbox::load_trajectories(opt.input);
    sqbox::TrajectoryDataset data = sqbox::to_dataset(file.records);
    const long n = static_cast<long>(data.size());
    const long h = static_cast<long>(data.horizon());
    const long model_h = static_cast<long>(
        is_sqbox ? sq.horizon() : cte.horizon());
    if (h != model_h)
        throw sqbox::LengthMismatch("model horizon " +
                                    std::to_string(model_h) +
                                    " but trajectories have " +
                                    std::to_string(h));

    // Start states repeat heavily; predict one band per distinct state.
    std::map<std::vector<double>, sqbox::Band> bands;
    long band_hits = 0, cert_hits = 0;
    std::vector<double> width_by_t(h, 0.0);
    std::vector<long> violations_by_t(h, 0);
    for (long i = 0; i < n; ++i) {
        std::vector<double> x(data.features.row(i),
                              data.features.row(i) + data.features.cols());
        auto it = bands.find(x);
        if (it == bands.end()) {
            sqbox::Band band = is_sqbox ? sqbox::predict_band(sq, x)
                                        : sqbox::predict_band(cte, x);
            it = bands.emplace(std::move(x), std::move(band)).first;
        }
        const sqbox::Band& band = it->second;
        bool inside = true;
        double total_ex = 0.0;
        for (long t = 0; t < h; ++t) {
            double b = data.behavior.at(i, t);
            double ex = std::max({0.0, band.lo[t] - b, b - band.hi[t]});
            if (ex > 0.0) {
                inside = false;
                violations_by_t[t] += 1;
            }
            total_ex += ex;
            width_by_t[t] += band.hi[t] - band.lo[t];
        }
        band_hits += inside ? 1 : 0;
        if (!is_sqbox) cert_hits += total_ex <= cte.c_hat ? 1 : 0;
    }
    double mean_width = 0.0;
    std::vector<double> violation_rate(h);
    for (long t = 0; t < h; ++t) {
        width_by_t[t] /= static_cast<double>(n);
        violation_rate[t] =
            static_cast<double>(violations_by_t[t]) / static_cast<double>(n);
        mean_width += width_by_t[t];
    }
    mean_width /= static_cast<double>(h);

    const long hits = is_sqbox ? band_hits : cert_hits;
    sqbox::CoverageSummary cov =
        sqbox::summarize_coverage(hits, n, opt.ci_confidence);

    json model_doc = read_json_file(opt.model);
    model_doc.erase("forests");
    json doc;
    doc["kind"] = "coverage-report";
    doc["model"] = std::move(model_doc);
    doc["input"] = opt.input;
    doc["n"] = n;
    doc["horizon"] = h;
    doc["ci_confidence"] = opt.ci_confidence;
    doc["coverage"] = cov.coverage;
    doc["ci_lower"] = cov.ci_lower;
    doc["mean_width"] = mean_width;
    doc["mean_width_by_t"] = width_by_t;
    doc["violation_rate_by_t"] = violation_rate;
    if (!is_sqbox) {
        doc["band_coverage"] =
            static_cast<double>(band_hits) / static_cast<double>(n);
        doc["c_hat"] = cte.c_hat;
    }
    emit(std::cout, doc.dump(2) + "\n", opt.out);
    std::cerr << "coverage " << fmt_g(cov.coverage) << " (lower bound "
              << fmt_g(cov.ci_lower) << " at confidence "
              << fmt_g(opt.ci_confidence) << "), mean width "
              << fmt_g(mean_width) << "\n";
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentOpts {
    std::string name;
    std::string out_dir = ".";
    bool quick = false;
    std::uint64_t seed = 1;
    double ci_confidence = 0.99;
    long replications = 0;  // 0: study default
    long trials = 0;
    long pool = 0;
    long test = 0;
    std::vector<long> sizes;
    std::vector<double> deltas;
    long m = 0;
    double delta_prime = 0.0;
    bool no_noise = false;
    ForestOpts forest;
};

void write_report(const ExperimentOpts& opt, const std::string& name,
                  const std::string& text) {
    std::string path = resolve_out(join_dir(opt.out_dir, name));
    write_text_file(path, text);
    std::cout << "wrote " << path << "\n";
    emit_plot_files(json::parse(text), opt.out_dir);
}

void run_experiment(const ExperimentOpts& opt) {
    if (opt.name == "gaussian") {
        sqbox::GaussianStudyConfig config;
        config.seed = opt.seed;
        config.ci_confidence = opt.ci_confidence;
        if (opt.quick) {
            config.replications = 10;
            config.n_test = 500;
        }
        if (opt.replications > 0) config.replications = opt.replications;
        if (!opt.deltas.empty()) config.deltas = opt.deltas;
        write_report(opt, "gaussian-report.json",
                     to_json_string(sqbox::run_gaussian_study(config)));
    } else if (opt.name == "tamarisk" || opt.name == "battle") {
        sqbox::MdpStudyConfig config;
        config.env = opt.name;
        config.seed = opt.seed;
        config.ci_confidence = opt.ci_confidence;
        config.forest = opt.forest.params(opt.seed);
        config.battle.reward_noise = !opt.no_noise;
        if (opt.quick) {
            config.sizes = {100, 200};
            config.deltas = {0.2, 0.1};
            config.pool = 1000;
            config.test = 600;
            config.m = 50;
            config.failure_size = 200;
            config.forest.tree_count =
                std::min<long>(config.forest.tree_count, 50);
        }
        if (opt.pool > 0) config.pool = opt.pool;
        if (opt.test > 0) config.test = opt.test;
        if (!opt.sizes.empty()) {
            config.sizes = opt.sizes;
            config.failure_size = config.sizes.back();
        }
        if (!opt.deltas.empty()) {
            config.deltas = opt.deltas;
            if (std::find(config.deltas.begin(), config.deltas.end(),
                          config.failure_delta) == config.deltas.end())
                config.failure_delta = config.deltas.front();
        }
        if (opt.m > 0) config.m = opt.m;
        if (opt.delta_prime > 0.0) config.delta_prime = opt.delta_prime;
        write_report(opt, opt.name + "-report.json",
                     to_json_string(sqbox::run_mdp_study(config)));
    } else if (opt.name == "quantile-ci") {
        sqbox::QuantileCiStudyConfig config;
        config.seed = opt.seed;
        if (opt.quick) {
            config.trials = 100;
            config.sizes = {200, 400};
        }
        if (opt.trials > 0) config.trials = opt.trials;
        if (!opt.sizes.empty()) config.sizes = opt.sizes;
        if (!opt.deltas.empty()) config.deltas = opt.deltas;
        write_report(opt, "quantile-ci-report.json",
                     to_json_string(sqbox::run_quantile_ci_study(config)));
    } else {
        throw sqbox::InvalidConfig("unknown experiment: " + opt.name);
    }
}

void apply_workers(int workers) {
    if (workers >= 1)
        setenv("SQBOX_WORKERS", std::to_string(workers).c_str(), 1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "distribution-free prediction boxes and trajectory bands"};
    app.require_subcommand(1);

    SimulateOpts sim;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "sample trajectories from a built-in environment");
    c_sim->add_option("--env", sim.env, "environment")
        ->required()
        ->check(CLI::IsMember({"tamarisk", "battle"}));
    c_sim->add_option("--n", sim.n, "number of trajectories")
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--horizon", sim.horizon,
                      "steps per trajectory (0 = environment default)");
    c_sim->add_option("--seed", sim.seed, "master seed");
    c_sim->add_option("--out", sim.out, "output trajectory file")->required();
    c_sim->add_option("--budget", sim.budget, "tamarisk action budget");
    c_sim->add_flag("--top-fix", sim.top_fix,
                    "tamarisk: allow eradicate+plant in the top filter");
    c_sim->add_flag("--no-noise", sim.no_noise,
                    "battle: disable reward noise");
    c_sim->callback([&] { run_simulate(sim); });

    FitOpts fit;
    CLI::App* c_fit = app.add_subcommand(
        "fit", "fit a trajectory band model from a trajectory file");
    c_fit->add_option("--input", fit.input, "trajectory file")->required();
    c_fit->add_option("--method", fit.method, "band construction")
        ->required()
        ->check(CLI::IsMember({"sqbox", "cte"}));
    c_fit->add_option("--l", fit.l,
                      "training rows (default: half of the records)");
    c_fit->add_option("--m", fit.m, "scale rows (sqbox)");
    c_fit->add_option("--delta", fit.delta, "target miscoverage")
        ->check(CLI::Range(0.0, 1.0));
    c_fit->add_option("--delta-prime", fit.delta_prime,
                      "inner band miscoverage (sqbox; cte uses --delta)")
        ->check(CLI::Range(0.0, 1.0));
    c_fit->add_option("--seed", fit.seed, "forest seed");
    c_fit->add_option("--out", fit.out, "model file")->required();
    fit.forest.attach(c_fit);
    fit.strategy.attach(c_fit);
    c_fit->callback([&] {
        apply_workers(fit.forest.workers);
        run_fit(fit);
    });

    PredictOpts pred;
    CLI::App* c_pred = app.add_subcommand(
        "predict", "emit the band for one start state");
    c_pred->add_option("--model", pred.model, "model file")->required();
    c_pred->add_option("--start", pred.start,
                       "start state as comma-separated numbers");
    c_pred->add_option("--input", pred.input,
                       "trajectory file to take a start state from");
    c_pred->add_option("--index", pred.index, "record index in --input");
    c_pred->add_option("--out", pred.out, "output file (default stdout)");
    c_pred->callback([&] { run_predict(pred); });

    EvaluateOpts ev;
    CLI::App* c_ev = app.add_subcommand(
        "evaluate", "measure coverage of a model on test trajectories");
    c_ev->add_option("--model", ev.model, "model file")->required();
    c_ev->add_option("--input", ev.input, "test trajectory file")->required();
    c_ev->add_option("--ci-confidence", ev.ci_confidence,
                     "one-sided lower bound confidence")
        ->check(CLI::Range(0.0, 1.0));
    c_ev->add_option("--out", ev.out, "report file (default stdout)");
    c_ev->callback([&] { run_evaluate(ev); });

    ExperimentOpts ex;
    CLI::App* c_ex = app.add_subcommand(
        "experiment", "run a replication study end to end");
    c_ex->add_option("name", ex.name, "study name")
        ->required()
        ->check(CLI::IsMember(
            {"gaussian", "tamarisk", "battle", "quantile-ci"}));
    c_ex->add_option("--out-dir", ex.out_dir, "output directory");
    c_ex->add_flag("--quick", ex.quick,
                   "shrink replication counts for smoke runs");
    c_ex->add_option("--seed", ex.seed, "master seed");
    c_ex->add_option("--ci-confidence", ex.ci_confidence,
                     "coverage lower-bound confidence")
        ->check(CLI::Range(0.0, 1.0));
    c_ex->add_option("--replications", ex.replications,
                     "gaussian: replication count");
    c_ex->add_option("--trials", ex.trials, "quantile-ci: trials per cell");
    c_ex->add_option("--pool", ex.pool, "mdp: trajectory pool size");
    c_ex->add_option("--test", ex.test, "mdp: test trajectories");
    c_ex->add_option("--sizes", ex.sizes, "grid of train/calibration sizes");
    c_ex->add_option("--deltas", ex.deltas, "grid of miscoverage levels");
    c_ex->add_option("--m", ex.m, "mdp: scale rows");
    c_ex->add_option("--delta-prime", ex.delta_prime,
                     "mdp: inner band miscoverage")
        ->check(CLI::Range(0.0, 1.0));
    c_ex->add_flag("--no-noise", ex.no_noise, "battle: disable reward noise");
    ex.forest.attach(c_ex);
    c_ex->callback([&] {
        apply_workers(ex.forest.workers);
        run_experiment(ex);
    });

    std::string plot_report, plot_dir = ".";
    CLI::App* c_plot = app.add_subcommand(
        "plot-data", "re-emit (x, y, series) CSV panels from a report");
    c_plot->add_option("--report", plot_report, "report JSON file")
        ->required();
    c_plot->add_option("--out-dir", plot_dir, "output directory");
    c_plot->callback(
        [&] { emit_plot_files(read_json_file(plot_report), plot_dir); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const sqbox::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const sqbox::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
