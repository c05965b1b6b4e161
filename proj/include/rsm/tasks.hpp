#pragma once

// Word samplers, desired outputs and stack annotations for the benchmark tasks.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rsm/lr1.hpp"
#include "rsm/stack_machine.hpp"

namespace rsm::tasks {

using Rng = std::mt19937_64;
using NameWord = std::vector<std::string>;

struct Production {
    std::vector<std::string> rhs;  ///< empty for epsilon
    double probability = 0.0;
};

/// Probabilistic context-free grammar over symbol names. Any name with productions is a
/// nonterminal; everything else is emitted as a terminal.
struct Pcfg {
    std::string start;
    std::map<std::string, std::vector<Production>> productions;

    /// Probabilities must be positive and sum to one per nonterminal.
    void validate() const;
    bool is_nonterminal(const std::string& name) const { return productions.count(name) > 0; }

    json to_json() const;
    static Pcfg from_json(const json& j);
};

inline constexpr long long kMaxRejections = 1000000;

/// Rejection-samples `count` words with length in [min_len, max_len].
std::vector<NameWord> sample_pcfg(const Pcfg& g, int min_len, int max_len, int count, std::uint64_t seed);
std::vector<NameWord> sample_pcfg(const Pcfg& g, int min_len, int max_len, int count, Rng& rng);

Pcfg dyck_pcfg(int kinds);
Pcfg json_pcfg();
Pcfg latch_pcfg();

/// Draws one positive word with length in [min_len, max_len].
using WordSampler = std::function<NameWord(int min_len, int max_len, Rng& rng)>;

WordSampler pcfg_sampler(Pcfg g);
/// a^n b^n with n uniform over the window.
WordSampler anbn_sampler();
/// w $ reverse(w) with |w| uniform over the window and letters uniform.
WordSampler palindrome_sampler();

struct Window {
    int min_len = 0;
    int max_len = 0;
};

struct TaskOptions {
    int train_count = 100;
    int test_count = 100;
    Window train_window{1, 50};
    Window test_window{50, 120};
    /// Fraction of words replaced by corrupted negatives.
    double negative_fraction = 0.5;
    /// Grammar tasks draw each training word with a length floor uniform over the train window
    /// instead of plain rejection into the window.
    bool spread_train_lengths = true;
    /// Replaces the default grammar of dyck1..3, json and latch.
    std::optional<Pcfg> grammar;
    /// Copy tasks.
    int copy_bits = 8;
    int copy_fill_height = 20;
    Window copy_length{1, 20};
    Window repeat_length{1, 10};
    int repeat_train_max = 10;
    int repeat_test_max = 20;
};

struct TestItem {
    Sequence x;
    Eigen::MatrixXd y;  ///< (T + 1) x L
    std::vector<int> word;  ///< symbol ids for language tasks
};

struct TaskDataset {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<Annotation> train;
    std::vector<TestItem> test;
    std::vector<Word> train_words;  ///< language tasks only
    std::optional<lr1::Automaton> automaton;
    OutputMode out_mode = OutputMode::classifier;
    int input_dim = 0;
    int output_dim = 0;
    json manifest;
};

const std::vector<std::string>& language_names();
const std::vector<std::string>& task_names();
bool is_language(const std::string& name);

/// Annotation of one word from its parse trace: recorded reductions, shift every step and
/// output 1 exactly where the stack at output time is a single accepting nonterminal.
Annotation annotate(const lr1::Automaton& automaton, const Word& word);

/// Desired outputs of a word, as in annotate().
Eigen::MatrixXd desired_outputs(const lr1::Automaton& automaton, const Word& word);

/// One substitution, deletion or insertion that turns `word` into a non-member with length in
/// `window`. Throws SamplingExhaustedError after repeated failures.
Word corrupt(const lr1::Automaton& automaton, const Word& word, Window window, Rng& rng);

TaskDataset make_language_task(const std::string& name, std::uint64_t seed, const TaskOptions& opts = {});
TaskDataset make_copy_task(std::uint64_t seed, const TaskOptions& opts = {});
TaskDataset make_repeat_copy_task(std::uint64_t seed, const TaskOptions& opts = {});
TaskDataset make_task(const std::string& name, std::uint64_t seed, const TaskOptions& opts = {});

/// Copy-task sequence layout: bits, end channel, placeholder channel.
int copy_input_dim(const TaskOptions& opts);
Eigen::VectorXd copy_placeholder(const TaskOptions& opts);

/// Builds the annotation of a repeat-copy sequence with `repeats` end tokens (1 = copy).
Annotation copy_annotation(const Eigen::MatrixXd& bits, int repeats, const TaskOptions& opts);

void write_jsonl(const std::filesystem::path& path, const std::vector<Annotation>& anns);
std::vector<Annotation> read_annotations_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<TestItem>& items);
std::vector<TestItem> read_test_jsonl(const std::filesystem::path& path);

/// Writes train.jsonl, test.jsonl and manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const TaskDataset& ds);

}  // namespace rsm::tasks
