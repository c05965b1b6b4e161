#include "rsm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "rsm/errors.hpp"

namespace rsm::harness {

double mae(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& desired) {
    if (predicted.rows() != desired.rows() || predicted.cols() != desired.cols())
        throw DimensionError("mae: shape " + std::to_string(predicted.rows()) + "x" + std::to_string(predicted.cols()) +
                             " vs " + std::to_string(desired.rows()) + "x" + std::to_string(desired.cols()));
    if (predicted.size() == 0) return 0.0;
    return (predicted - desired).cwiseAbs().mean();
}

double dataset_mae(const std::vector<Eigen::MatrixXd>& predicted, const std::vector<Eigen::MatrixXd>& desired) {
    if (predicted.size() != desired.size()) throw DimensionError("dataset_mae: sequence counts differ");
    if (predicted.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) total += mae(predicted[i], desired[i]);
    return total / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------------------------
// Models and hyperparameters

std::string to_string(Model m) {
    switch (m) {
        case Model::rand_esn: return "rand-ESN";
        case Model::crj_esn: return "crj-ESN";
        case Model::ldn_esn: return "ldn-ESN";
        case Model::rand_rsm: return "rand-RSM";
        case Model::crj_rsm: return "crj-RSM";
        case Model::ldn_rsm: return "ldn-RSM";
        case Model::rmm_probe: return "rmm-probe";
    }
    return "?";
}

const std::vector<Model>& all_models() {
    static const std::vector<Model> models = {Model::rand_esn, Model::crj_esn, Model::ldn_esn, Model::rand_rsm,
                                              Model::crj_rsm,  Model::ldn_rsm, Model::rmm_probe};
    return models;
}

Model model_from_string(const std::string& s) {
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Model m : all_models()) {
        std::string name = to_string(m);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (name == lower) return m;
    }
    throw ConfigurationError("unknown model '" + s + "'");
}

bool is_rsm(Model m) { return m == Model::rand_rsm || m == Model::crj_rsm || m == Model::ldn_rsm; }

ReservoirKind reservoir_kind(Model m) {
    switch (m) {
        case Model::crj_esn:
        case Model::crj_rsm: return ReservoirKind::crj;
        case Model::ldn_esn:
        case Model::ldn_rsm: return ReservoirKind::ldn;
        default: return ReservoirKind::rand;
    }
}

json Hyperparameters::to_json() const {
    json j = {{"kind", to_string(kind)},
              {"classifier_regularization", classifier_regularization},
              {"kernel_width_factor", kernel_width_factor},
              {"ridge_regularization", ridge_regularization}};
    switch (kind) {
        case ReservoirKind::rand:
            j["spectral_radius"] = spectral_radius;
            j["input_scale"] = input_scale;
            break;
        case ReservoirKind::crj:
            j["cycle_weight"] = cycle_weight;
            j["jump_weight"] = jump_weight;
            j["jump_length"] = jump_length;
            j["input_weight"] = input_weight;
            break;
        case ReservoirKind::ldn: j["theta"] = theta; break;
        case ReservoirKind::custom: break;
    }
    return j;
}

Hyperparameters Hyperparameters::from_json(const json& j) {
    Hyperparameters hp;
    hp.kind = reservoir_kind_from_string(j.at("kind").get<std::string>());
    hp.spectral_radius = j.value("spectral_radius", hp.spectral_radius);
    hp.input_scale = j.value("input_scale", hp.input_scale);
    hp.cycle_weight = j.value("cycle_weight", hp.cycle_weight);
    hp.jump_weight = j.value("jump_weight", hp.jump_weight);
    hp.jump_length = j.value("jump_length", hp.jump_length);
    hp.input_weight = j.value("input_weight", hp.input_weight);
    hp.theta = j.value("theta", hp.theta);
    hp.classifier_regularization = j.value("classifier_regularization", hp.classifier_regularization);
    hp.kernel_width_factor = j.value("kernel_width_factor", hp.kernel_width_factor);
    hp.ridge_regularization = j.value("ridge_regularization", hp.ridge_regularization);
    return hp;
}

int effective_neurons(ReservoirKind kind, int neurons, int inputs) {
    if (kind != ReservoirKind::ldn) return neurons;
    const int m = (neurons / inputs) * inputs;
    if (m < inputs) throw ConfigurationError("LDN needs at least one neuron per input channel");
    return m;
}

Reservoir build_reservoir(const Hyperparameters& hp, int neurons, int inputs, std::uint64_t seed) {
    switch (hp.kind) {
        case ReservoirKind::rand: return build_random(neurons, inputs, hp.spectral_radius, hp.input_scale, seed);
        case ReservoirKind::crj:
            return build_crj(neurons, inputs, hp.cycle_weight, hp.jump_weight, hp.jump_length, hp.input_weight, seed);
        case ReservoirKind::ldn: return build_ldn(effective_neurons(hp.kind, neurons, inputs), inputs, hp.theta);
        case ReservoirKind::custom: break;
    }
    throw ConfigurationError("build_reservoir: custom reservoirs have no hyperparameters");
}

SearchSpace SearchSpace::for_task(const std::string& task) {
    SearchSpace s;
    if (task == "copy" || task == "repeat_copy") {
        s.theta_min = 25.0;
        s.theta_max = 40.0;
    }
    return s;
}

json SearchSpace::to_json() const {
    return {{"spectral_radius", {radius_min, radius_max}},   {"input_scale", {input_scale_min, input_scale_max}},
            {"crj_weights", {crj_weight_min, crj_weight_max}}, {"crj_input_weight", {crj_input_min, crj_input_max}},
            {"theta", {theta_min, theta_max}},
            {"kernel_width_factor_log_uniform", {width_min, width_max}},                 {"classifier_regularization_log_uniform", {classifier_reg_min, classifier_reg_max}},
            {"ridge_regularization_log_uniform", {reg_min, reg_max}}};
}

Hyperparameters draw_hyperparameters(ReservoirKind kind, int neurons, const SearchSpace& space, tasks::Rng& rng) {
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto log_uniform = [&](double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); };
    Hyperparameters hp;
    hp.kind = kind;
    switch (kind) {
        case ReservoirKind::rand:
            hp.spectral_radius = uniform(space.radius_min, space.radius_max);
            hp.input_scale = uniform(space.input_scale_min, space.input_scale_max);
            break;
        case ReservoirKind::crj: {
            const int max_jump = std::max(2, neurons / 2);
            for (int attempt = 0;; ++attempt) {
                if (attempt == 1000) throw ConfigurationError("CRJ search space yields no contractive reservoir");
                hp.cycle_weight = uniform(space.crj_weight_min, space.crj_weight_max);
                hp.jump_weight = uniform(space.crj_weight_min, space.crj_weight_max);
                hp.jump_length = std::uniform_int_distribution<int>(2, max_jump)(rng);
                hp.input_weight = uniform(space.crj_input_min, space.crj_input_max);
                if (build_crj(neurons, 1, hp.cycle_weight, hp.jump_weight, hp.jump_length, 1.0).spectral_radius() < 1.0)
                    break;
            }
            break;
        }
        case ReservoirKind::ldn: hp.theta = uniform(space.theta_min, space.theta_max); break;
        case ReservoirKind::custom: throw ConfigurationError("cannot draw hyperparameters for a custom reservoir");
    }
    hp.classifier_regularization = log_uniform(space.classifier_reg_min, space.classifier_reg_max);
    hp.kernel_width_factor = log_uniform(space.width_min, space.width_max);
    hp.ridge_regularization = log_uniform(space.reg_min, space.reg_max);
    return hp;
}

int ExperimentConfig::resolved_neurons() const {
    if (neurons > 0) return neurons;
    if (is_rsm(model) && (task == "copy" || task == "repeat_copy")) return 512;
    return 256;
}

json ExperimentConfig::to_json() const {
    json j = {{"task", task},
              {"model", to_string(model)},
              {"neurons", resolved_neurons()},
              {"repeats", repeats},
              {"search_budget", search_budget},
              {"validation_sets", validation_sets},
              {"seed", seed},
              {"search_space", resolved_space().to_json()}};
    if (fixed) j["fixed"] = fixed->to_json();
    return j;
}

// ---------------------------------------------------------------------------------------------
// Evaluation

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Sequence with_end_row(const Sequence& x) {
    Sequence out = Sequence::Zero(x.rows() + 1, x.cols());
    out.topRows(x.rows()) = x;
    return out;
}

}  // namespace

Evaluation evaluate(Model model, const Hyperparameters& hp, int neurons, const tasks::TaskDataset& ds,
                    std::uint64_t reservoir_seed, bool measure_fidelity) {
    if (hp.kind != reservoir_kind(model)) throw ConfigurationError("evaluate: hyperparameters do not match the model");
    const Reservoir reservoir = build_reservoir(hp, neurons, ds.input_dim, reservoir_seed);
    Evaluation ev;
    std::vector<Eigen::MatrixXd> desired;
    std::vector<Sequence> xs;
    for (const auto& item : ds.test) {
        xs.push_back(item.x);
        desired.push_back(item.y);
    }

    if (is_rsm(model)) {
        FitOptions fo;
        fo.classifier_regularization = hp.classifier_regularization;
        fo.kernel_width_factor = hp.kernel_width_factor;
        fo.ridge_regularization = hp.ridge_regularization;
        fo.out_mode = ds.out_mode;
        auto start = Clock::now();
        const StackMachine machine = fit(reservoir, ds.train, fo);
        ev.train_seconds = seconds_since(start);
        start = Clock::now();
        RunOptions ro;
        ro.throw_on_runaway = false;
        for (auto& r : machine.run_batch(xs, ro)) {
            ev.runaway_sequences += r.runaway;
            ev.clamped_sequences += r.clamped_pop;
            ev.predictions.push_back(std::move(r.y));
        }
        ev.eval_seconds = seconds_since(start);
        if (measure_fidelity) ev.fidelity = training_fidelity(machine, ds.train);
    } else {
        std::vector<Sequence> train_x;
        std::vector<Eigen::MatrixXd> train_y;
        for (const auto& a : ds.train) {
            train_x.push_back(a.x);
            train_y.push_back(a.y);
        }
        auto start = Clock::now();
        const EchoStateNetwork esn = fit_esn(reservoir, train_x, train_y, hp.ridge_regularization);
        ev.train_seconds = seconds_since(start);
        start = Clock::now();
        if (model == Model::rmm_probe) {
            // A memory machine that never addresses memory: the strongest readout available to it
            // on words whose states have converged.
            const MemoryMachine rmm(reservoir, 1, constant_address(0), output_from_readout(esn.readout));
            for (const auto& x : xs) ev.predictions.push_back(rmm.run(with_end_row(x)).y);
        } else {
            ev.predictions = esn.run_batch(xs);
        }
        ev.eval_seconds = seconds_since(start);
    }
    ev.mae = dataset_mae(ev.predictions, desired);
    return ev;
}

SearchResult hyperparameter_search(const ExperimentConfig& cfg) {
    if (cfg.search_budget < 1) throw ConfigurationError("hyperparameter search needs a budget of at least 1");
    if (cfg.validation_sets < 1) throw ConfigurationError("hyperparameter search needs a validation set");
    const int neurons = cfg.resolved_neurons();
    const ReservoirKind kind = reservoir_kind(cfg.model);
    std::vector<tasks::TaskDataset> validation;
    for (int v = 0; v < cfg.validation_sets; ++v)
        validation.push_back(tasks::make_task(cfg.task, derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(v)),
                                              cfg.task_options));

    tasks::Rng rng(derive_seed(cfg.seed, 2));
    const SearchSpace space = cfg.resolved_space();
    SearchResult res;
    res.best_mae = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.search_budget; ++i) {
        Trial trial{draw_hyperparameters(kind, neurons, space, rng), 0.0};
        try {
            for (int v = 0; v < cfg.validation_sets; ++v)
                trial.mae += evaluate(cfg.model, trial.hp, neurons, validation[static_cast<std::size_t>(v)],
                                      derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(i)))
                                 .mae;
            trial.mae /= cfg.validation_sets;
        } catch (const Error&) {
            trial.mae = std::numeric_limits<double>::infinity();
        }
        if (i == 0 || trial.mae < res.best_mae) {
            res.best = trial.hp;
            res.best_mae = trial.mae;
        }
        res.trials.push_back(trial);
    }
    return res;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, SearchResult* search) {
    if (cfg.repeats < 1) throw ConfigurationError("run_experiment: repeats must be at least 1");
    if (cfg.resolved_neurons() < 1) throw ConfigurationError("run_experiment: neurons must be positive");
    Hyperparameters hp;
    if (cfg.fixed) {
        hp = *cfg.fixed;
    } else {
        SearchResult s = hyperparameter_search(cfg);
        hp = s.best;
        if (search) *search = std::move(s);
    }
    std::vector<ResultRow> rows;
    for (int r = 0; r < cfg.repeats; ++r) {
        const auto ds = tasks::make_task(cfg.task, derive_seed(cfg.seed, 4, static_cast<std::uint64_t>(r)),
                                         cfg.task_options);
        const Evaluation ev = evaluate(cfg.model, hp, cfg.resolved_neurons(), ds,
                                       derive_seed(cfg.seed, 5, static_cast<std::uint64_t>(r)), cfg.measure_fidelity);
        rows.push_back({to_string(cfg.model), cfg.task, r, ev.mae, ev.train_seconds, ev.eval_seconds, hp,
                        ev.runaway_sequences, ev.fidelity});
    }
    return rows;
}

namespace {

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool timing) {
    out << "model,task,repeat,mae,train_seconds,hyperparameters\n";
    std::ostringstream line;
    for (const auto& r : rows) {
        line.str("");
        line << std::setprecision(17) << r.model << ',' << r.task << ',' << r.repeat << ',' << r.mae << ','
             << (timing ? r.train_seconds : 0.0) << ',' << csv_quote(r.hp.to_json().dump()) << '\n';
        out << line.str();
    }
}

// ---------------------------------------------------------------------------------------------
// Separability

namespace {

// Multinomial logistic regression by damped Newton steps. Rows of x are samples.
Eigen::MatrixXd fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes, double lambda) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, classes);

    auto probabilities = [&](const Eigen::MatrixXd& weights) {
        Eigen::MatrixXd s = x * weights;
        s.colwise() -= s.rowwise().maxCoeff();
        s = s.array().exp().matrix();
        s.array().colwise() /= s.rowwise().sum().array();
        return s;
    };
    auto loss = [&](const Eigen::MatrixXd& weights) {
        Eigen::MatrixXd s = x * weights;
        const Eigen::VectorXd mx = s.rowwise().maxCoeff();
        s.colwise() -= mx;
        const Eigen::VectorXd lse = s.array().exp().rowwise().sum().log().matrix() + mx;
        const double data = (lse - (x * weights).cwiseProduct(onehot).rowwise().sum()).mean();
        return data + 0.5 * lambda * weights.squaredNorm();
    };

    const Eigen::Index k = d * classes;
    double current = loss(w);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::MatrixXd p = probabilities(w);
        const Eigen::MatrixXd grad = x.transpose() * (p - onehot) / static_cast<double>(n) + lambda * w;
        if (grad.norm() < 1e-12) break;
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
        for (int c = 0; c < classes; ++c) {
            for (int c2 = c; c2 < classes; ++c2) {
                Eigen::VectorXd weight = -p.col(c).cwiseProduct(p.col(c2));
                if (c == c2) weight += p.col(c);
                const Eigen::MatrixXd block = x.transpose() * weight.asDiagonal() * x / static_cast<double>(n);
                hess.block(c * d, c2 * d, d, d) = block;
                if (c != c2) hess.block(c2 * d, c * d, d, d) = block.transpose();
            }
        }
        hess.diagonal().array() += lambda;
        const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(grad.data(), k);
        const Eigen::VectorXd step = hess.ldlt().solve(g);
        const Eigen::MatrixXd delta = Eigen::Map<const Eigen::MatrixXd>(step.data(), d, classes);
        double t = 1.0;
        double next = loss(w - delta);
        while (next > current - 1e-4 * t * g.dot(step) && t > 1e-8) {
            t *= 0.5;
            next = loss(w - t * delta);
        }
        if (t <= 1e-8) break;
        w -= t * delta;
        const double improvement = current - next;
        current = next;
        if (improvement < 1e-14) break;
    }
    return w;
}

Eigen::MatrixXd principal_directions(const Eigen::MatrixXd& centered, int count) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<Eigen::Index>(1, centered.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::Index keep = std::min<Eigen::Index>(count, cov.cols());
    // Eigenvalues ascend; take the last `keep` columns, largest first.
    return eig.eigenvectors().rightCols(keep).rowwise().reverse();
}

}  // namespace

SeparabilityReport separability_report(const Reservoir& reservoir, int max_len, const SymbolTable& table,
                                       const SeparabilityOptions& opts) {
    if (max_len < 1) throw ConfigurationError("separability_report: max_len must be positive");
    if (table.dim() != reservoir.inputs()) throw DimensionError("separability_report: table does not match reservoir");
    const int c = table.size();
    SeparabilityReport rep;
    for (int i = 0; i < c; ++i) rep.symbols.push_back(table.name(i));

    long double total = 0;
    for (int len = 1; len <= max_len; ++len) total += std::pow(static_cast<long double>(c), len);
    rep.exhaustive = total <= static_cast<long double>(opts.enumeration_limit);

    std::vector<Eigen::VectorXd> states;
    if (rep.exhaustive) {
        // Breadth-first over the word trie: every node is one word.
        std::vector<Eigen::VectorXd> frontier{reservoir.zero_state()};
        for (int len = 1; len <= max_len; ++len) {
            std::vector<Eigen::VectorXd> next;
            next.reserve(frontier.size() * static_cast<std::size_t>(c));
            for (const auto& h : frontier)
                for (int s = 0; s < c; ++s) {
                    next.push_back(reservoir.step(h, table.code(s)));
                    states.push_back(next.back());
                    rep.last_symbol.push_back(s);
                }
            frontier = std::move(next);
        }
    } else {
        tasks::Rng rng(opts.seed);
        std::uniform_int_distribution<int> len_dist(1, max_len), sym(0, c - 1);
        for (int i = 0; i < opts.samples; ++i) {
            Eigen::VectorXd h = reservoir.zero_state();
            int last = 0;
            for (int t = 0, len = len_dist(rng); t < len; ++t) {
                last = sym(rng);
                h = reservoir.step(h, table.code(last));
            }
            states.push_back(std::move(h));
            rep.last_symbol.push_back(last);
        }
    }
    rep.words = static_cast<int>(states.size());
    rep.states.resize(rep.words, reservoir.neurons());
    for (int i = 0; i < rep.words; ++i) rep.states.row(i) = states[static_cast<std::size_t>(i)].transpose();

    const Eigen::RowVectorXd mean = rep.states.colwise().mean();
    const Eigen::MatrixXd centered = rep.states.rowwise() - mean;
    rep.projection = centered * principal_directions(centered, 2);

    rep.accuracy.assign(static_cast<std::size_t>(c), 1.0);
    if (c == 1) {
        rep.overall = 1.0;
        return rep;
    }
    // Standardized features plus bias; at most 400 parameters, using leading components when
    // the reservoir is wide.
    const int max_features = std::max(1, 400 / c - 1);
    Eigen::MatrixXd feats = centered;
    if (feats.cols() > max_features) feats = centered * principal_directions(centered, max_features);
    Eigen::RowVectorXd scale = (feats.array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j)
        if (!(scale(j) > 1e-15)) scale(j) = 1.0;
    Eigen::MatrixXd design(feats.rows(), feats.cols() + 1);
    design.leftCols(feats.cols()) = feats.array().rowwise() / scale.array();
    design.col(feats.cols()).setOnes();

    const Eigen::MatrixXd w = fit_softmax(design, rep.last_symbol, c, opts.regularization);
    const Eigen::MatrixXd scores = design * w;
    std::vector<int> hits(static_cast<std::size_t>(c), 0), counts(static_cast<std::size_t>(c), 0);
    int correct = 0;
    for (int i = 0; i < rep.words; ++i) {
        Eigen::Index best;
        scores.row(i).maxCoeff(&best);
        const auto truth = static_cast<std::size_t>(rep.last_symbol[static_cast<std::size_t>(i)]);
        ++counts[truth];
        if (static_cast<std::size_t>(best) == truth) {
            ++hits[truth];
            ++correct;
        }
    }
    for (int s = 0; s < c; ++s)
        rep.accuracy[static_cast<std::size_t>(s)] =
            counts[static_cast<std::size_t>(s)] == 0
                ? 1.0
                : static_cast<double>(hits[static_cast<std::size_t>(s)]) / counts[static_cast<std::size_t>(s)];
    rep.overall = static_cast<double>(correct) / rep.words;
    return rep;
}

void write_projection_csv(std::ostream& out, const SeparabilityReport& report) {
    out << "x,y,symbol\n";
    for (Eigen::Index i = 0; i < report.projection.rows(); ++i) {
        const double x = report.projection(i, 0);
        const double y = report.projection.cols() > 1 ? report.projection(i, 1) : 0.0;
        out << x << ',' << y << ',' << report.symbols[static_cast<std::size_t>(report.last_symbol[static_cast<std::size_t>(i)])]
            << '\n';
    }
}

Reservoir example_crj() { return build_crj(5, 3, 0.5, 0.2, 2, 1.0); }

}  // namespace rsm::harness
