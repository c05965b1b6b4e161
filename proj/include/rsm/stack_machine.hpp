#pragma once

// Reservoir stack machines: teacher-forced training data collection, fitting and the
// free-running dynamics with a state-caching stack.

#include <Eigen/Dense>

#include <vector>

#include "rsm/classifiers.hpp"
#include "rsm/reservoir.hpp"

namespace rsm {

/// Desired behavior for one input sequence of length T. Every row of `pops`/`pushes` covers
/// one outer step (T + 1 rows) and ends with the (0, zero vector) sentinel.
struct Annotation {
    Sequence x;                                         ///< T x n
    std::vector<std::vector<int>> pops;                 ///< j_{t,tau}
    std::vector<std::vector<Eigen::VectorXd>> pushes;   ///< a_{t,tau}; zero vector = no push
    std::vector<int> shift;                             ///< rho_t
    Eigen::MatrixXd y;                                  ///< (T + 1) x L

    int length() const { return static_cast<int>(x.rows()); }
    int input_dim() const { return static_cast<int>(x.cols()); }
    int output_dim() const { return static_cast<int>(y.cols()); }
    int max_pop() const;

    /// Shape and sentinel checks.
    void validate() const;

    json to_json() const;
    static Annotation from_json(const json& j);
};

/// A stack whose every cell also stores the reservoir state after folding the cells below
/// and including it, so pops restore the representation without re-running the reservoir.
class StackWithStates {
public:
    explicit StackWithStates(const Reservoir& reservoir);

    void push(const Eigen::VectorXd& symbol);
    /// Throws PopUnderflowError when j exceeds the height.
    void pop(int j);
    /// Pops min(j, height); returns true when clamping was needed.
    bool pop_clamped(int j);

    int size() const { return static_cast<int>(symbols_.size()); }
    bool empty() const { return symbols_.empty(); }
    /// g: the state of the top cell, or zero for the empty stack.
    const Eigen::VectorXd& state() const { return states_.empty() ? zero_ : states_.back(); }
    const std::vector<Eigen::VectorXd>& symbols() const { return symbols_; }
    const std::vector<Eigen::VectorXd>& states() const { return states_; }

    /// Re-folds the reservoir over the current symbols from zero.
    Eigen::VectorXd refold() const;

private:
    const Reservoir* reservoir_;
    Eigen::VectorXd zero_;
    std::vector<Eigen::VectorXd> symbols_;
    std::vector<Eigen::VectorXd> states_;
};

/// Rows are (h, g) concatenations of width 2m.
struct TrainingData {
    Eigen::MatrixXd popush_x;
    std::vector<int> pop_y;
    std::vector<Eigen::VectorXd> push_y;
    Eigen::MatrixXd step_x;
    std::vector<int> shift_y;
    Eigen::MatrixXd out_y;
};

/// Stack contents (bottom to top) after every outer step, the shift included.
using StackLog = std::vector<std::vector<Eigen::VectorXd>>;

/// Replays an annotation under teacher forcing. Appends the stack after every outer step to
/// `log` when given.
TrainingData collect_training(const Reservoir& reservoir, const Annotation& ann, StackLog* log = nullptr);

/// Concatenates collect_training over a corpus.
TrainingData collect_training(const Reservoir& reservoir, const std::vector<Annotation>& corpus);

enum class OutputMode { classifier, ridge };

struct FitOptions {
    double classifier_regularization = 1e-4;
    /// Multiplies the automatic RBF gamma.
    double kernel_width_factor = 1.0;
    /// Tenfold regularization cuts allowed while a classifier misses a training decision.
    int classifier_refits = 3;
    OutputMode out_mode = OutputMode::classifier;
    double ridge_regularization = 1e-4;
    int max_inner_iterations = 64;
};

struct StepRecord {
    std::vector<std::pair<int, int>> actions;  ///< (pop count, push class) incl. the final (0, 0)
    bool shift = false;
};

struct RunResult {
    Eigen::MatrixXd y;                 ///< (T + 1) x L
    bool clamped_pop = false;          ///< a pop exceeded the stack height
    bool runaway = false;              ///< the inner loop hit the guard (only when not throwing)
    std::vector<StepRecord> steps;     ///< filled when requested
    StackLog stacks;                   ///< filled when requested
};

struct RunOptions {
    bool throw_on_runaway = true;
    bool record_steps = false;
    /// Re-folds the reservoir after every stack change and throws NumericalError unless the
    /// cached state matches bit for bit.
    bool check_cache = false;
};

class StackMachine {
public:
    StackMachine(Reservoir reservoir, KernelClassifier pop, KernelClassifier push, KernelClassifier shift,
                 std::vector<Eigen::VectorXd> push_codes, OutputMode out_mode, KernelClassifier out_classifier,
                 std::vector<Eigen::VectorXd> out_values, LinearReadout out_ridge, int max_inner_iterations = 64);

    const Reservoir& reservoir() const { return reservoir_; }
    const KernelClassifier& pop_classifier() const { return pop_; }
    const KernelClassifier& push_classifier() const { return push_; }
    const KernelClassifier& shift_classifier() const { return shift_; }
    const KernelClassifier& out_classifier() const { return out_classifier_; }
    const LinearReadout& out_ridge() const { return out_ridge_; }
    OutputMode out_mode() const { return out_mode_; }
    /// Push class k > 0 pushes push_codes()[k - 1].
    const std::vector<Eigen::VectorXd>& push_codes() const { return push_codes_; }
    /// Output class k of the classifier mode emits out_values()[k].
    const std::vector<Eigen::VectorXd>& out_values() const { return out_values_; }
    int max_inner_iterations() const { return max_inner_iterations_; }
    int output_dim() const;
    int max_pop() const;

    /// Push class of a code: 0 for the zero vector, otherwise its index in push_codes() + 1.
    int push_class(const Eigen::VectorXd& code) const;

    RunResult run(const Sequence& x, const RunOptions& opts = {}) const;
    /// Runs every sequence in lockstep so classifier queries are evaluated in batches.
    std::vector<RunResult> run_batch(const std::vector<Sequence>& xs, const RunOptions& opts = {}) const;

    json to_json() const;
    static StackMachine from_json(const json& j);

private:
    Reservoir reservoir_;
    KernelClassifier pop_, push_, shift_;
    std::vector<Eigen::VectorXd> push_codes_;
    OutputMode out_mode_;
    KernelClassifier out_classifier_;
    std::vector<Eigen::VectorXd> out_values_;
    LinearReadout out_ridge_;
    int max_inner_iterations_;
};

StackMachine fit(const Reservoir& reservoir, const std::vector<Annotation>& corpus, const FitOptions& opts = {});

struct Fidelity {
    long long decisions = 0;
    long long agreeing = 0;
    double rate() const { return decisions == 0 ? 1.0 : static_cast<double>(agreeing) / decisions; }
};

/// Agreement of the machine's pop, push and shift classifiers with the annotated actions at
/// every teacher-forced decision point of the corpus.
Fidelity training_fidelity(const StackMachine& machine, const std::vector<Annotation>& corpus);

}  // namespace rsm
