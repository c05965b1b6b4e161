// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on stderr.
//
//   acceptance [criterion ...]      run the listed criteria (default: all nine)
//
// RSM_ACCEPTANCE_BUDGET and RSM_ACCEPTANCE_VALIDATION set the search for the language
// experiments (default 4 and 1); RSM_ACCEPTANCE_OUT names the directory for result CSVs.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfg_oracle.hpp"
#include "rsm/harness.hpp"
#include "rsm/lr1.hpp"
#include "rsm/memory_machine.hpp"
#include "rsm/stack_machine.hpp"
#include "rsm/tasks.hpp"

using namespace rsm;
using harness::ExperimentConfig;
using harness::Model;
using harness::ResultRow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int env_int(const char* name, int fallback) {
    const char* v = std::getenv(name);
    return v ? std::atoi(v) : fallback;
}

std::filesystem::path out_dir() {
    const char* v = std::getenv("RSM_ACCEPTANCE_OUT");
    std::filesystem::path dir = v ? v : "acceptance_results";
    std::filesystem::create_directories(dir);
    return dir;
}

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back((ok ? "  ok   " : "  FAIL ") + what);
    }
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

struct Summary {
    double mean = 0.0, max = 0.0, min = 0.0, max_train = 0.0;
};

Summary summarize(const std::vector<ResultRow>& rows) {
    Summary s;
    s.min = rows.front().mae;
    for (const auto& r : rows) {
        s.mean += r.mae / static_cast<double>(rows.size());
        s.max = std::max(s.max, r.mae);
        s.min = std::min(s.min, r.mae);
        s.max_train = std::max(s.max_train, r.train_seconds);
    }
    return s;
}

// Experiments are shared between criteria (2, 3 and 9 read the same runs).
std::map<std::string, std::vector<ResultRow>> g_runs;

std::vector<ResultRow> run(const ExperimentConfig& cfg) {
    const std::string key = harness::to_string(cfg.model) + "/" + cfg.task + "/" + std::to_string(cfg.resolved_neurons());
    if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;
    const auto t0 = Clock::now();
    auto rows = harness::run_experiment(cfg);
    const auto s = summarize(rows);
    std::cerr << "[acceptance] " << key << ": mean MAE " << fmt(s.mean) << ", max " << fmt(s.max) << " ("
              << fmt(seconds_since(t0), 3) << " s)\n";
    std::ofstream csv(out_dir() / (harness::to_string(cfg.model) + "_" + cfg.task + "_" +
                                   std::to_string(cfg.resolved_neurons()) + ".csv"));
    harness::write_csv(csv, rows);
    g_runs[key] = rows;
    return rows;
}

ExperimentConfig language_config(Model model, const std::string& task) {
    ExperimentConfig cfg;
    cfg.task = task;
    cfg.model = model;
    cfg.neurons = 256;
    cfg.repeats = 10;
    cfg.search_budget = env_int("RSM_ACCEPTANCE_BUDGET", 4);
    cfg.validation_sets = env_int("RSM_ACCEPTANCE_VALIDATION", 1);
    cfg.seed = 1;
    cfg.measure_fidelity = harness::is_rsm(model);
    return cfg;
}

const std::vector<Model> kRsms = {Model::ldn_rsm, Model::crj_rsm, Model::rand_rsm};
const std::vector<Model> kEsns = {Model::rand_esn, Model::crj_esn, Model::ldn_esn};
const std::vector<std::string> kLanguages = {"dyck1", "dyck2", "dyck3", "anbn", "palindrome", "json"};

oracle::Cfg oracle_for(const std::string& name) {
    if (name == "anbn") return oracle::anbn_cfg();
    if (name == "palindrome") return oracle::palindrome_cfg();
    if (name == "json") return oracle::json_cfg();
    if (name == "latch") return oracle::latch_cfg();
    return oracle::dyck_cfg(name.back() - '0');
}

// 1: the parser against brute-force grammar membership.
Outcome parser_matches_oracle() {
    Outcome out;
    const int bound = 12;
    const int samples = 100000;
    const auto t0 = Clock::now();
    for (const auto& name : tasks::language_names()) {
        const auto a = lr1::automaton_by_name(name);
        const oracle::Language lang(oracle_for(name), bound);
        const auto terminals = a.table.terminal_ids();
        const auto k = static_cast<long long>(terminals.size());

        long long checked = 0, disagree = 0;
        auto check = [&](const Word& w) {
            oracle::Word names;
            for (int s : w) names.push_back(a.table.name(s));
            ++checked;
            disagree += lr1::parse(a, w) != lang.contains(names);
        };
        const bool exhaustive = k <= 4;
        if (exhaustive) {
            for (int len = 0; len <= bound; ++len) {
                Word w(static_cast<std::size_t>(len), terminals.front());
                std::vector<int> digits(static_cast<std::size_t>(len), 0);
                while (true) {
                    for (int i = 0; i < len; ++i) w[static_cast<std::size_t>(i)] = terminals[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])];
                    check(w);
                    int i = 0;
                    while (i < len && ++digits[static_cast<std::size_t>(i)] == k) digits[static_cast<std::size_t>(i++)] = 0;
                    if (i == len) break;
                }
            }
        } else {
            // Uniform random words miss nearly every member, so all members are checked as well.
            std::mt19937_64 rng(12345);
            std::uniform_int_distribution<int> length(0, bound);
            std::uniform_int_distribution<long long> letter(0, k - 1);
            for (int i = 0; i < samples; ++i) {
                Word w(static_cast<std::size_t>(length(rng)));
                for (auto& s : w) s = terminals[static_cast<std::size_t>(letter(rng))];
                check(w);
            }
            for (const auto& member : lang.words()) check(a.table.ids(member));
        }
        out.require(disagree == 0, name + ": " + std::to_string(checked) + (exhaustive ? " words (all)" : " words (sampled + members)") +
                                       ", " + std::to_string(disagree) + " disagreements");
    }
    const double elapsed = seconds_since(t0);
    out.require(elapsed < 120.0, "runtime " + fmt(elapsed, 3) + " s (limit 120 s)");
    return out;
}

// 2: every RSM at 256 neurons on the six languages.
Outcome languages_zero_error() {
    Outcome out;
    for (const auto& task : kLanguages)
        for (Model m : kRsms) {
            const auto rows = run(language_config(m, task));
            const auto s = summarize(rows);
            out.require(s.max < 0.01, harness::to_string(m) + " " + task + ": MAE " + fmt(s.mean) + " (max over " +
                                          std::to_string(rows.size()) + " repeats " + fmt(s.max) + ")");
            out.require(s.max_train < 60.0, harness::to_string(m) + " " + task + ": slowest training " +
                                                fmt(s.max_train, 3) + " s");
        }
    return out;
}

// 3: latch. The cycle reservoir is reported but not required.
Outcome latch() {
    Outcome out;
    for (Model m : kRsms) {
        const auto rows = run(language_config(m, "latch"));
        const auto s = summarize(rows);
        const std::string what = harness::to_string(m) + " latch: MAE " + fmt(s.mean) + " (max " + fmt(s.max) + ")";
        if (m == Model::crj_rsm) out.notes.push_back("  info " + what);
        else out.require(s.max < 0.01, what);
    }
    return out;
}

int repeats_in(const tasks::TestItem& item, int end_channel) {
    int n = 0;
    for (Eigen::Index t = 0; t < item.x.rows(); ++t) n += item.x(t, end_channel) == 1.0;
    return n;
}

// 4: copy and repeat copy with the LDN stack machine and a ridge output.
Outcome copy_tasks() {
    Outcome out;
    for (const std::string task : {"copy", "repeat_copy"}) {
        ExperimentConfig cfg;
        cfg.task = task;
        cfg.model = Model::ldn_rsm;
        cfg.neurons = 512;
        cfg.repeats = 10;
        cfg.seed = 2;
        harness::SearchResult search;
        const auto t0 = Clock::now();
        const auto rows = harness::run_experiment(cfg, &search);
        std::cerr << "[acceptance] ldn-RSM/" << task << " done in " << fmt(seconds_since(t0), 3) << " s\n";
        std::ofstream csv(out_dir() / ("ldn-RSM_" + task + "_512.csv"));
        harness::write_csv(csv, rows);
        const auto s = summarize(rows);
        out.require(s.max < 0.01, "ldn-RSM " + task + ": MAE " + fmt(s.mean) + " (max over 10 repeats " + fmt(s.max) + ")");
        if (task != "repeat_copy") continue;

        // A fresh dataset, scored only on the sequences with more repeats than training allows.
        const auto ds = tasks::make_task(task, 777, cfg.task_options);
        const auto ev = harness::evaluate(cfg.model, search.best, cfg.resolved_neurons(), ds, 778);
        const int end_channel = cfg.task_options.copy_bits;
        std::vector<Eigen::MatrixXd> pred, want;
        for (std::size_t i = 0; i < ds.test.size(); ++i)
            if (repeats_in(ds.test[i], end_channel) > cfg.task_options.repeat_train_max) {
                pred.push_back(ev.predictions[i]);
                want.push_back(ds.test[i].y);
            }
        const double longer = pred.empty() ? 1.0 : harness::dataset_mae(pred, want);
        out.require(!pred.empty() && longer < 0.01, "repeat_copy, " + std::to_string(pred.size()) +
                                                        " test sequences with more than " +
                                                        std::to_string(cfg.task_options.repeat_train_max) +
                                                        " repeats: MAE " + fmt(longer));
    }
    return out;
}

// 5: plain echo state networks fail where a stack is needed, at 256 and 1024 neurons.
Outcome esn_controls() {
    Outcome out;
    const std::vector<std::pair<std::string, double>> floors = {
        {"latch", 0.3}, {"copy", 0.15}, {"repeat_copy", 0.25}, {"dyck1", 0.05}, {"dyck2", 0.05}, {"dyck3", 0.05}};
    for (int neurons : {256, 1024})
        for (const auto& [task, floor] : floors)
            for (Model m : kEsns) {
                ExperimentConfig cfg;
                cfg.task = task;
                cfg.model = m;
                cfg.neurons = neurons;
                cfg.seed = 3;
                if (neurons > 256) {
                    cfg.repeats = 3;
                    cfg.search_budget = 4;
                    cfg.validation_sets = 1;
                }
                const auto rows = run(cfg);
                const auto s = summarize(rows);
                out.require(s.min > floor, harness::to_string(m) + " " + task + " at " + std::to_string(neurons) +
                                               " neurons: MAE " + fmt(s.mean) + " (min " + fmt(s.min) +
                                               ", must exceed " + fmt(floor) + ")");
            }
    return out;
}

// 6: teacher-forced stacks inside collect_training equal the parser's stacks.
Outcome teacher_forcing_stacks() {
    Outcome out;
    for (const auto& name : tasks::language_names()) {
        tasks::TaskOptions opts;
        opts.train_count = 1000;
        opts.test_count = 0;
        const auto ds = tasks::make_task(name, 6, opts);
        const auto& a = *ds.automaton;
        const auto r = build_random(16, ds.input_dim, 0.9, 1.0, 6);
        long long steps = 0, mismatched = 0;
        for (std::size_t i = 0; i < ds.train.size(); ++i) {
            StackLog log;
            collect_training(r, ds.train[i], &log);
            const auto trace = lr1::parse_with_trace(a, ds.train_words[i]);
            if (log.size() != trace.steps.size()) {
                ++mismatched;
                continue;
            }
            for (std::size_t t = 0; t < log.size(); ++t) {
                ++steps;
                const auto& want = trace.steps[t].stack_after;
                bool same = log[t].size() == want.size();
                for (std::size_t k = 0; same && k < want.size(); ++k) {
                    const Eigen::VectorXd code =
                        want[k] == lr1::kEndMarker ? Eigen::VectorXd::Zero(a.table.dim()) : a.table.code(want[k]);
                    same = log[t][k] == code;
                }
                mismatched += !same;
            }
        }
        out.require(ds.train.size() == 1000 && mismatched == 0,
                    name + ": " + std::to_string(ds.train.size()) + " words, " + std::to_string(steps) + " steps, " +
                        std::to_string(mismatched) + " mismatches");
    }
    return out;
}

// 7: a contractive reservoir forgets the first letter, so no readout can tell the probe words apart.
Outcome suffix_probe() {
    Outcome out;
    const auto table = SymbolTable::one_hot({"a", "b", "$"}, {});
    const auto reservoir = build_random(256, 3, 0.9, 1.0, 7);
    const double d = suffix_convergence_probe(reservoir, 50, table);
    out.require(d < 1e-6, "state distance at T = 50: " + fmt(d));

    // Readout fitted on the palindrome task, whose alphabet matches the probe table.
    const auto ds = tasks::make_task("palindrome", 7);
    std::vector<Sequence> xs;
    std::vector<Eigen::MatrixXd> ys;
    for (const auto& ann : ds.train) {
        xs.push_back(ann.x);
        ys.push_back(ann.y);
    }
    const auto& pt = ds.automaton->table;
    const auto esn = fit_esn(build_random(256, ds.input_dim, 0.9, 1.0, 7), xs, ys, 1e-4);
    Word base(50, pt.id("a"));
    base.push_back(pt.id("$"));
    base.insert(base.end(), 50, pt.id("a"));
    Word variant = base;
    variant.insert(variant.begin(), pt.id("b"));
    const auto ya = esn.run(pt.encode_word(base));
    const auto yb = esn.run(pt.encode_word(variant));
    const double fa = ya(ya.rows() - 1, 0), fb = yb(yb.rows() - 1, 0);
    out.require((fa > 0.5) == (fb > 0.5), "ESN final outputs " + fmt(fa, 8) + " and " + fmt(fb, 8) +
                                              " threshold to the same class (difference " + fmt(std::abs(fa - fb)) + ")");
    const bool pa = lr1::parse(*ds.automaton, base), pb = lr1::parse(*ds.automaton, variant);
    out.require(pa && !pb, "parser: " + std::to_string(pa) + " and " + std::to_string(pb));
    return out;
}

// 8: last-symbol linear separability of the five-neuron cycle reservoir.
Outcome separability() {
    Outcome out;
    const auto table = SymbolTable::one_hot({"a", "b", "S"}, {});
    const auto rep = harness::separability_report(harness::example_crj(), 10, table);
    out.require(rep.exhaustive && rep.words == 88572, std::to_string(rep.words) + " words, all lengths 1..10");
    out.require(rep.overall == 1.0, "last-symbol accuracy " + fmt(rep.overall, 8));
    return out;
}

// 9: every fitted language RSM reproduces its own training decisions.
Outcome fidelity() {
    Outcome out;
    std::vector<std::pair<Model, std::string>> runs;
    for (const auto& task : kLanguages)
        for (Model m : kRsms) runs.emplace_back(m, task);
    for (Model m : kRsms) runs.emplace_back(m, "latch");
    for (const auto& [m, task] : runs) {
        const auto rows = run(language_config(m, task));
        long long decisions = 0, agreeing = 0;
        int fitted = 0;
        for (const auto& r : rows)
            if (r.fidelity) {
                ++fitted;
                decisions += r.fidelity->decisions;
                agreeing += r.fidelity->agreeing;
            }
        const std::string what = harness::to_string(m) + " " + task + ": " + std::to_string(agreeing) + "/" +
                                 std::to_string(decisions) + " decisions over " + std::to_string(fitted) + " machines";
        out.require(fitted == static_cast<int>(rows.size()) && agreeing == decisions, what);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"parser agrees with grammar membership", parser_matches_oracle},
        {"stack machines reach zero error on the languages", languages_zero_error},
        {"latch", latch},
        {"copy and repeat copy", copy_tasks},
        {"echo state network controls fail", esn_controls},
        {"teacher-forced stacks equal parser stacks", teacher_forcing_stacks},
        {"suffix convergence probe", suffix_probe},
        {"separability of the example cycle reservoir", separability},
        {"training fidelity", fidelity},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        for (const auto& n : o.notes) std::cout << n << '\n';
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << " ("
                  << fmt(seconds_since(t0), 3) << " s)" << std::endl;
        all &= o.pass;
    }
    return all ? 0 : 1;
}
