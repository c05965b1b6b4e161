// rsm: dataset generation, training, evaluation, experiments and separability reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rsm/errors.hpp"
#include "rsm/harness.hpp"

namespace fs = std::filesystem;
using namespace rsm;
using harness::Model;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open " + path.string());
    return json::parse(in);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write " + path.string());
    return out;
}

// Optional overrides under "task_options" in a config file.
tasks::TaskOptions task_options_from(const json& j, tasks::TaskOptions opts = {}) {
    if (!j.is_object()) return opts;
    opts.train_count = j.value("train_count", opts.train_count);
    opts.test_count = j.value("test_count", opts.test_count);
    opts.negative_fraction = j.value("negative_fraction", opts.negative_fraction);
    if (j.contains("train_window")) opts.train_window = {j["train_window"][0], j["train_window"][1]};
    if (j.contains("test_window")) opts.test_window = {j["test_window"][0], j["test_window"][1]};
    if (j.contains("grammar")) opts.grammar = tasks::Pcfg::from_json(j["grammar"]);
    return opts;
}

struct Common {
    int train_count = 100;
    int test_count = 100;

    void add(CLI::App* app) {
        app->add_option("--train-count", train_count, "Training sequences")->check(CLI::PositiveNumber);
        app->add_option("--test-count", test_count, "Test sequences")->check(CLI::PositiveNumber);
    }
    tasks::TaskOptions options() const {
        tasks::TaskOptions o;
        o.train_count = train_count;
        o.test_count = test_count;
        return o;
    }
};

int cmd_generate(const std::string& task, std::uint64_t seed, const fs::path& out, const Common& common) {
    const auto ds = tasks::make_task(task, seed, common.options());
    tasks::write_dataset(out, ds);
    std::cout << task << ": " << ds.train.size() << " train, " << ds.test.size() << " test -> " << out.string()
              << '\n';
    return 0;
}

// Config: {"hyperparameters": {...}, "neurons": 256, "seed": 0, "task_options": {...}}.
// Without hyperparameters the search runs first.
int cmd_train(const std::string& task, const std::string& model_name, const fs::path& config_path,
              const fs::path& out, const Common& common) {
    const json cfg = config_path.empty() ? json::object() : read_json(config_path);
    harness::ExperimentConfig ec;
    ec.task = task;
    ec.model = harness::model_from_string(model_name);
    ec.neurons = cfg.value("neurons", 0);
    ec.seed = cfg.value("seed", std::uint64_t{0});
    ec.search_budget = cfg.value("search_budget", ec.search_budget);
    ec.validation_sets = cfg.value("validation_sets", ec.validation_sets);
    ec.task_options = task_options_from(cfg.value("task_options", json::object()), common.options());

    harness::Hyperparameters hp;
    if (cfg.contains("hyperparameters")) {
        hp = harness::Hyperparameters::from_json(cfg["hyperparameters"]);
    } else {
        hp = harness::hyperparameter_search(ec).best;
    }
    const auto ds = tasks::make_task(task, ec.seed, ec.task_options);
    const int neurons = harness::effective_neurons(hp.kind, ec.resolved_neurons(), ds.input_dim);
    const Reservoir reservoir = harness::build_reservoir(hp, neurons, ds.input_dim, ec.seed + 1);

    json machine = {{"model", harness::to_string(ec.model)}, {"task", task}, {"hyperparameters", hp.to_json()}};
    const auto start = std::chrono::steady_clock::now();
    if (harness::is_rsm(ec.model)) {
        FitOptions fo;
        fo.classifier_regularization = hp.classifier_regularization;
        fo.kernel_width_factor = hp.kernel_width_factor;
        fo.ridge_regularization = hp.ridge_regularization;
        fo.out_mode = ds.out_mode;
        machine["rsm"] = fit(reservoir, ds.train, fo).to_json();
    } else {
        std::vector<Sequence> xs;
        std::vector<Eigen::MatrixXd> ys;
        for (const auto& a : ds.train) {
            xs.push_back(a.x);
            ys.push_back(a.y);
        }
        const auto esn = fit_esn(reservoir, xs, ys, hp.ridge_regularization);
        machine["esn"] = {{"reservoir", esn.reservoir.to_json()}, {"readout", esn.readout.to_json()}};
    }
    machine["train_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    tasks::write_dataset(out, ds);
    open_out(out / "machine.json") << machine.dump() << '\n';
    std::cout << "trained " << machine["model"].get<std::string>() << " on " << task << " in "
              << machine["train_seconds"].get<double>() << " s -> " << (out / "machine.json").string() << '\n';
    return 0;
}

int cmd_eval(const fs::path& machine_path, const fs::path& data_path, const fs::path& out) {
    const json machine = read_json(machine_path);
    const auto items = tasks::read_test_jsonl(fs::is_directory(data_path) ? data_path / "test.jsonl" : data_path);
    std::vector<Eigen::MatrixXd> predicted, desired;
    int runaway = 0;
    if (machine.contains("rsm")) {
        const StackMachine m = StackMachine::from_json(machine["rsm"]);
        std::vector<Sequence> xs;
        for (const auto& it : items) xs.push_back(it.x);
        RunOptions ro;
        ro.throw_on_runaway = false;
        for (auto& r : m.run_batch(xs, ro)) {
            runaway += r.runaway;
            predicted.push_back(std::move(r.y));
        }
    } else {
        const EchoStateNetwork esn{Reservoir::from_json(machine.at("esn").at("reservoir")),
                                   LinearReadout::from_json(machine["esn"].at("readout"))};
        for (const auto& it : items) predicted.push_back(esn.run(it.x));
    }
    for (const auto& it : items) desired.push_back(it.y);

    harness::ResultRow row;
    row.model = machine.value("model", "?");
    row.task = machine.value("task", "?");
    row.mae = harness::dataset_mae(predicted, desired);
    row.train_seconds = machine.value("train_seconds", 0.0);
    row.hp = harness::Hyperparameters::from_json(machine.at("hyperparameters"));
    auto csv = open_out(out);
    harness::write_csv(csv, {row});
    std::cout << row.model << " on " << row.task << ": MAE " << row.mae;
    if (runaway) std::cout << " (" << runaway << " runaway sequences)";
    std::cout << '\n';
    return 0;
}

int cmd_experiment(harness::ExperimentConfig ec, const fs::path& config_path, const fs::path& out, bool timing,
                   const fs::path& search_log) {
    if (!config_path.empty()) {
        const json cfg = read_json(config_path);
        if (cfg.contains("hyperparameters")) ec.fixed = harness::Hyperparameters::from_json(cfg["hyperparameters"]);
        ec.task_options = task_options_from(cfg.value("task_options", json::object()), ec.task_options);
    }
    harness::SearchResult search;
    const auto rows = harness::run_experiment(ec, &search);
    auto csv = open_out(out);
    harness::write_csv(csv, rows, timing);

    if (!search_log.empty()) {
        json log = ec.to_json();
        log["trials"] = json::array();
        for (const auto& t : search.trials)
            log["trials"].push_back({{"hyperparameters", t.hp.to_json()},
                                     {"validation_mae", std::isfinite(t.mae) ? json(t.mae) : json(nullptr)}});
        open_out(search_log) << log.dump(2) << '\n';
    }

    double mean = 0.0, sq = 0.0, secs = 0.0;
    for (const auto& r : rows) {
        mean += r.mae;
        secs += r.train_seconds;
    }
    mean /= static_cast<double>(rows.size());
    for (const auto& r : rows) sq += (r.mae - mean) * (r.mae - mean);
    std::cout << harness::to_string(ec.model) << " on " << ec.task << ": MAE " << mean << " +- "
              << std::sqrt(sq / static_cast<double>(rows.size())) << ", train " << secs / static_cast<double>(rows.size())
              << " s per repeat\n";
    return 0;
}

int cmd_separability(const std::string& reservoir_path, int maxlen, std::vector<std::string> symbols,
                     const fs::path& out, std::uint64_t seed) {
    const Reservoir r = reservoir_path == "example-crj" ? harness::example_crj()
                                                        : Reservoir::from_json(read_json(reservoir_path));
    if (symbols.empty()) {
        if (r.inputs() == 3) {
            symbols = {"a", "b", "S"};
        } else {
            for (int i = 0; i < r.inputs(); ++i) symbols.push_back("s" + std::to_string(i));
        }
    }
    if (static_cast<int>(symbols.size()) != r.inputs())
        throw DimensionError("separability: " + std::to_string(symbols.size()) + " symbols for a reservoir with " +
                             std::to_string(r.inputs()) + " inputs");
    const SymbolTable table = SymbolTable::one_hot(symbols, {});
    harness::SeparabilityOptions so;
    so.seed = seed;
    const auto rep = harness::separability_report(r, maxlen, table, so);
    auto csv = open_out(out);
    harness::write_projection_csv(csv, rep);
    std::cout << rep.words << (rep.exhaustive ? " words (all)" : " sampled words") << ", overall accuracy "
              << rep.overall << '\n';
    for (std::size_t i = 0; i < rep.symbols.size(); ++i)
        std::cout << "  " << rep.symbols[i] << ": " << rep.accuracy[i] << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reservoir stack machines: datasets, training and experiments"};
    app.require_subcommand(1);

    std::string task, model = "ldn-RSM", config, machine, data, reservoir = "example-crj";
    fs::path out, search_log;
    std::uint64_t seed = 0;
    int maxlen = 10;
    bool no_timing = false;
    std::vector<std::string> symbols;
    Common common;
    harness::ExperimentConfig ec;

    const auto task_check = CLI::IsMember(tasks::task_names());

    auto* gen = app.add_subcommand("generate", "Sample a train/test dataset");
    gen->add_option("--task", task, "Task name")->required()->check(task_check);
    gen->add_option("--seed", seed, "Dataset seed");
    gen->add_option("--out", out, "Output directory")->required();
    common.add(gen);

    auto* train = app.add_subcommand("train", "Fit one model and save it with its dataset");
    train->add_option("--task", task, "Task name")->required()->check(task_check);
    train->add_option("--model", model, "Model name");
    train->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
    train->add_option("--out", out, "Output directory")->required();
    common.add(train);

    auto* ev = app.add_subcommand("eval", "Score a saved model on a test file");
    ev->add_option("--machine", machine, "machine.json from train")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data, "test.jsonl, or a dataset directory")->required()->check(CLI::ExistingPath);
    ev->add_option("--out", out, "Result CSV")->required();

    auto* exp = app.add_subcommand("experiment", "Hyperparameter search plus repeated runs");
    exp->add_option("--task", ec.task, "Task name")->required()->check(task_check);
    exp->add_option("--model", model, "Model name");
    exp->add_option("--repeats", ec.repeats, "Repeats")->check(CLI::PositiveNumber);
    exp->add_option("--budget", ec.search_budget, "Search budget")->check(CLI::PositiveNumber);
    exp->add_option("--validation-sets", ec.validation_sets, "Validation datasets per candidate")
        ->check(CLI::PositiveNumber);
    exp->add_option("--neurons", ec.neurons, "Reservoir size (0: default)")->check(CLI::NonNegativeNumber);
    exp->add_option("--seed", ec.seed, "Experiment seed");
    exp->add_option("--config", config, "JSON with fixed hyperparameters or task_options")->check(CLI::ExistingFile);
    exp->add_option("--search-log", search_log, "Write every search trial as JSON");
    exp->add_flag("--no-timing", no_timing, "Write train_seconds as 0");
    exp->add_option("--out", out, "Result CSV")->required();
    common.add(exp);

    auto* sep = app.add_subcommand("separability", "Last-symbol linear separability of a reservoir");
    sep->add_option("--reservoir", reservoir, "Reservoir JSON, or example-crj");
    sep->add_option("--maxlen", maxlen, "Maximum word length")->check(CLI::Range(1, 12));
    sep->add_option("--symbols", symbols, "Symbol names, one per input")->delimiter(',');
    sep->add_option("--seed", seed, "Sampling seed");
    sep->add_option("--out", out, "Projection CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(task, seed, out, common);
        if (train->parsed()) return cmd_train(task, model, config, out, common);
        if (ev->parsed()) return cmd_eval(machine, data, out);
        if (exp->parsed()) {
            ec.model = harness::model_from_string(model);
            ec.task_options = common.options();
            return cmd_experiment(ec, config, out, !no_timing, search_log);
        }
        if (sep->parsed()) return cmd_separability(reservoir, maxlen, symbols, out, seed);
    } catch (const rsm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
