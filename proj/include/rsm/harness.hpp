#pragma once

// Experiment orchestration: models, hyperparameter search, repeated train/test runs, CSV
// output and the separability diagnostic.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsm/memory_machine.hpp"
#include "rsm/stack_machine.hpp"
#include "rsm/tasks.hpp"

namespace rsm::harness {

/// Mean of |predicted - desired| over all entries.
double mae(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& desired);
/// Mean over sequences of the per-sequence MAE.
double dataset_mae(const std::vector<Eigen::MatrixXd>& predicted, const std::vector<Eigen::MatrixXd>& desired);

enum class Model { rand_esn, crj_esn, ldn_esn, rand_rsm, crj_rsm, ldn_rsm, rmm_probe };

std::string to_string(Model m);
Model model_from_string(const std::string& s);
bool is_rsm(Model m);
ReservoirKind reservoir_kind(Model m);
const std::vector<Model>& all_models();

struct Hyperparameters {
    ReservoirKind kind = ReservoirKind::rand;
    double spectral_radius = 0.9;
    double input_scale = 1.0;
    double cycle_weight = 0.5;
    double jump_weight = 0.5;
    int jump_length = 2;
    double input_weight = 1.0;
    double theta = 50.0;
    double classifier_regularization = 1e-4;
    double kernel_width_factor = 1.0;
    double ridge_regularization = 1e-4;

    /// Only the fields relevant to `kind`, plus both regularizations.
    json to_json() const;
    static Hyperparameters from_json(const json& j);
};

/// Neuron count actually used: LDN reservoirs are trimmed to a multiple of the input dimension.
int effective_neurons(ReservoirKind kind, int neurons, int inputs);

Reservoir build_reservoir(const Hyperparameters& hp, int neurons, int inputs, std::uint64_t seed);

struct SearchSpace {
    double radius_min = 0.5, radius_max = 0.99;
    double input_scale_min = 0.1, input_scale_max = 2.0;
    double crj_weight_min = 0.1, crj_weight_max = 0.95;
    double crj_input_min = 0.1, crj_input_max = 2.0;
    double theta_min = 2.0, theta_max = 25.0;
    double width_min = 0.05, width_max = 1.0;  ///< log-uniform kernel width factor
    double classifier_reg_min = 1e-6, classifier_reg_max = 1e-1;
    double reg_min = 1e-6, reg_max = 1e2;  ///< ridge

    /// The copy tasks read symbols about 20 stack cells deep, so their LDN window is longer.
    static SearchSpace for_task(const std::string& task);
    json to_json() const;
};

/// One random configuration. CRJ draws whose spectral radius reaches 1 are redrawn.
Hyperparameters draw_hyperparameters(ReservoirKind kind, int neurons, const SearchSpace& space, tasks::Rng& rng);

struct ExperimentConfig {
    std::string task;
    Model model = Model::ldn_rsm;
    int neurons = 0;  ///< 0: 256, or 512 for stack machines on the copy tasks
    int repeats = 10;
    int search_budget = 20;
    int validation_sets = 3;
    std::uint64_t seed = 0;
    tasks::TaskOptions task_options;
    /// Defaults to SearchSpace::for_task(task).
    std::optional<SearchSpace> space;
    /// Skips the search.
    std::optional<Hyperparameters> fixed;
    /// Stack machines only: score every repeat's machine on its own training decisions.
    bool measure_fidelity = false;

    int resolved_neurons() const;
    SearchSpace resolved_space() const { return space ? *space : SearchSpace::for_task(task); }
    json to_json() const;
};

struct Evaluation {
    double mae = 0.0;
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    int runaway_sequences = 0;
    int clamped_sequences = 0;
    std::optional<Fidelity> fidelity;
    std::vector<Eigen::MatrixXd> predictions;
};

/// Trains on ds.train and scores on ds.test.
Evaluation evaluate(Model model, const Hyperparameters& hp, int neurons, const tasks::TaskDataset& ds,
                    std::uint64_t reservoir_seed, bool measure_fidelity = false);

struct Trial {
    Hyperparameters hp;
    double mae = 0.0;  ///< mean validation MAE; +inf when training or running failed
};

struct SearchResult {
    Hyperparameters best;
    double best_mae = 0.0;
    std::vector<Trial> trials;
};

SearchResult hyperparameter_search(const ExperimentConfig& cfg);

struct ResultRow {
    std::string model;
    std::string task;
    int repeat = 0;
    double mae = 0.0;
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    Hyperparameters hp;
    int runaway_sequences = 0;
    std::optional<Fidelity> fidelity;
};

/// Search once (unless cfg.fixed), then `repeats` runs on fresh datasets.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, SearchResult* search = nullptr);

/// Header model,task,repeat,mae,train_seconds,hyperparameters. With `timing` off the
/// train_seconds column is written as 0 so output is byte-identical across runs.
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool timing = true);

struct SeparabilityReport {
    std::vector<std::string> symbols;
    std::vector<double> accuracy;  ///< per symbol: share of words ending in it that are classified correctly
    double overall = 0.0;
    int words = 0;
    bool exhaustive = true;
    Eigen::MatrixXd states;       ///< one row per word
    std::vector<int> last_symbol;
    Eigen::MatrixXd projection;   ///< two leading principal components of `states`
};

struct SeparabilityOptions {
    /// Enumerate every word when the count does not exceed this; sample otherwise.
    long long enumeration_limit = 200000;
    int samples = 5000;
    double regularization = 1e-6;
    std::uint64_t seed = 0;
};

/// Encodes words of length 1..max_len over the table's symbols and fits a multinomial
/// logistic regression predicting the last symbol from the final state.
SeparabilityReport separability_report(const Reservoir& reservoir, int max_len, const SymbolTable& table,
                                       const SeparabilityOptions& opts = {});

/// Columns x,y,symbol.
void write_projection_csv(std::ostream& out, const SeparabilityReport& report);

/// The five-neuron cycle reservoir with jumps over one-hot {a, b, S}: jump length 2, cycle
/// weight 0.5, input weight 1 and jump weight 0.2.
Reservoir example_crj();

}  // namespace rsm::harness
