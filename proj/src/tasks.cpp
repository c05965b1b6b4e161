#include "rsm/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "rsm/errors.hpp"
#include "rsm/json_util.hpp"

namespace rsm::tasks {

// ---------------------------------------------------------------------------------------------
// PCFG

void Pcfg::validate() const {
    if (!is_nonterminal(start)) throw ConfigurationError("pcfg: start symbol '" + start + "' has no productions");
    for (const auto& [lhs, prods] : productions) {
        if (prods.empty()) throw ConfigurationError("pcfg: '" + lhs + "' has an empty production list");
        double total = 0.0;
        for (const auto& p : prods) {
            if (!(p.probability > 0.0)) throw ConfigurationError("pcfg: non-positive probability for '" + lhs + "'");
            total += p.probability;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ConfigurationError("pcfg: probabilities of '" + lhs + "' sum to " + std::to_string(total));
    }
}

json Pcfg::to_json() const {
    json prods = json::object();
    for (const auto& [lhs, list] : productions) {
        json arr = json::array();
        for (const auto& p : list) arr.push_back({{"rhs", p.rhs}, {"p", p.probability}});
        prods[lhs] = std::move(arr);
    }
    return {{"start", start}, {"productions", prods}};
}

Pcfg Pcfg::from_json(const json& j) {
    Pcfg g;
    g.start = j.at("start").get<std::string>();
    for (const auto& [lhs, arr] : j.at("productions").items())
        for (const auto& p : arr)
            g.productions[lhs].push_back({p.at("rhs").get<std::vector<std::string>>(), p.at("p").get<double>()});
    g.validate();
    return g;
}

namespace {

// Leftmost derivation with early rejection once the emitted prefix plus the shortest
// possible yield of the pending symbols exceeds the window.
class Deriver {
public:
    explicit Deriver(Pcfg g) : g_(std::move(g)) {
        g_.validate();
        for (const auto& [lhs, prods] : g_.productions) {
            std::vector<double> w;
            for (const auto& p : prods) w.push_back(p.probability);
            choose_.emplace(lhs, std::discrete_distribution<int>(w.begin(), w.end()));
        }
        compute_min_yield();
    }

    std::optional<NameWord> draw(int max_len, Rng& rng) {
        constexpr long long kMaxExpansions = 1000000;
        NameWord out;
        std::vector<std::string> pending{g_.start};
        long long pending_min = min_yield(g_.start);
        long long expansions = 0;
        while (!pending.empty()) {
            std::string sym = std::move(pending.back());
            pending.pop_back();
            pending_min -= min_yield(sym);
            if (!g_.is_nonterminal(sym)) {
                out.push_back(std::move(sym));
            } else {
                if (++expansions > kMaxExpansions) return std::nullopt;
                const auto& prods = g_.productions.at(sym);
                const auto& rhs = prods[static_cast<std::size_t>(choose_.at(sym)(rng))].rhs;
                for (auto it = rhs.rbegin(); it != rhs.rend(); ++it) {
                    pending.push_back(*it);
                    pending_min += min_yield(*it);
                }
            }
            if (static_cast<long long>(out.size()) + pending_min > max_len) return std::nullopt;
        }
        return out;
    }

private:
    long long min_yield(const std::string& sym) const {
        auto it = min_.find(sym);
        return it == min_.end() ? 1 : it->second;
    }

    void compute_min_yield() {
        constexpr long long inf = std::numeric_limits<long long>::max() / 4;
        for (const auto& [lhs, _] : g_.productions) min_[lhs] = inf;
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& [lhs, prods] : g_.productions) {
                for (const auto& p : prods) {
                    long long total = 0;
                    for (const auto& s : p.rhs) total = std::min(inf, total + min_yield(s));
                    if (total < min_[lhs]) {
                        min_[lhs] = total;
                        changed = true;
                    }
                }
            }
        }
        for (const auto& [lhs, v] : min_)
            if (v >= inf) throw ConfigurationError("pcfg: '" + lhs + "' derives no finite word");
    }

    Pcfg g_;
    std::map<std::string, std::discrete_distribution<int>> choose_;
    std::map<std::string, long long> min_;
};

}  // namespace

std::vector<NameWord> sample_pcfg(const Pcfg& g, int min_len, int max_len, int count, Rng& rng) {
    if (min_len < 0 || min_len > max_len) throw ConfigurationError("sample_pcfg: need 0 <= min_len <= max_len");
    if (count < 0) throw ConfigurationError("sample_pcfg: negative count");
    Deriver d(g);
    std::vector<NameWord> out;
    long long rejected = 0;
    while (static_cast<int>(out.size()) < count) {
        auto w = d.draw(max_len, rng);
        if (w && static_cast<int>(w->size()) >= min_len) {
            out.push_back(std::move(*w));
            continue;
        }
        if (++rejected >= kMaxRejections)
            throw SamplingExhaustedError("sample_pcfg: " + std::to_string(kMaxRejections) +
                                         " draws rejected for window [" + std::to_string(min_len) + ", " +
                                         std::to_string(max_len) + "]");
    }
    return out;
}

std::vector<NameWord> sample_pcfg(const Pcfg& g, int min_len, int max_len, int count, std::uint64_t seed) {
    Rng rng(seed);
    return sample_pcfg(g, min_len, max_len, count, rng);
}

Pcfg dyck_pcfg(int kinds) {
    static const std::vector<std::pair<std::string, std::string>> brackets = {{"(", ")"}, {"[", "]"}, {"{", "}"}};
    if (kinds < 1 || kinds > 3) throw ConfigurationError("dyck_pcfg: kinds must be 1, 2 or 3");
    Pcfg g;
    g.start = "S";
    auto& s = g.productions["S"];
    for (int k = 0; k < kinds; ++k) s.push_back({{brackets[k].first, "S", brackets[k].second, "S"}, 0.4 / kinds});
    s.push_back({{}, 0.6});
    return g;
}

Pcfg json_pcfg() {
    Pcfg g;
    g.start = "V";
    g.productions["V"] = {{{"{", "O", "}"}, 0.15}, {{"[", "A", "]"}, 0.15}, {{"{", "}"}, 0.1},
                          {{"[", "]"}, 0.1},       {{"n"}, 0.25},          {{"s"}, 0.25}};
    g.productions["O"] = {{{"k", ":", "V"}, 0.5}, {{"k", ":", "V", ",", "O"}, 0.5}};
    g.productions["A"] = {{{"V"}, 0.5}, {{"V", ",", "A"}, 0.5}};
    return g;
}

Pcfg latch_pcfg() {
    // Odd parity as a right-linear grammar.
    Pcfg g;
    g.start = "Odd";
    g.productions["Odd"] = {{{"0", "Odd"}, 0.5}, {{"1", "Even"}, 0.5}};
    g.productions["Even"] = {{{"0", "Even"}, 0.48}, {{"1", "Odd"}, 0.48}, {{}, 0.04}};
    return g;
}

WordSampler pcfg_sampler(Pcfg g) {
    auto d = std::make_shared<Deriver>(std::move(g));
    return [d](int min_len, int max_len, Rng& rng) {
        for (long long rejected = 0; rejected < kMaxRejections; ++rejected) {
            auto w = d->draw(max_len, rng);
            if (w && static_cast<int>(w->size()) >= min_len) return *w;
        }
        throw SamplingExhaustedError("pcfg sampler: window [" + std::to_string(min_len) + ", " +
                                     std::to_string(max_len) + "] exhausted");
    };
}

WordSampler anbn_sampler() {
    return [](int min_len, int max_len, Rng& rng) {
        const int lo = std::max(1, (min_len + 1) / 2), hi = max_len / 2;
        if (lo > hi) throw SamplingExhaustedError("anbn sampler: window holds no a^n b^n");
        const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
        NameWord w(static_cast<std::size_t>(n), "a");
        w.insert(w.end(), static_cast<std::size_t>(n), "b");
        return w;
    };
}

WordSampler palindrome_sampler() {
    return [](int min_len, int max_len, Rng& rng) {
        const int lo = std::max(0, min_len / 2), hi = (max_len - 1) / 2;
        if (max_len < 1 || lo > hi) throw SamplingExhaustedError("palindrome sampler: window holds no palindrome");
        const int k = std::uniform_int_distribution<int>(lo, hi)(rng);
        std::bernoulli_distribution coin(0.5);
        NameWord half;
        for (int i = 0; i < k; ++i) half.push_back(coin(rng) ? "a" : "b");
        NameWord w = half;
        w.push_back("$");
        w.insert(w.end(), half.rbegin(), half.rend());
        return w;
    };
}

// ---------------------------------------------------------------------------------------------
// Annotations

const std::vector<std::string>& language_names() {
    static const std::vector<std::string> names = {"dyck1", "dyck2", "dyck3", "anbn", "palindrome", "json", "latch"};
    return names;
}

const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names = {"dyck1", "dyck2", "dyck3", "anbn", "palindrome",
                                                   "json",  "latch", "copy",  "repeat_copy"};
    return names;
}

bool is_language(const std::string& name) {
    const auto& l = language_names();
    return std::find(l.begin(), l.end(), name) != l.end();
}

Annotation annotate(const lr1::Automaton& automaton, const Word& word) {
    const auto trace = lr1::parse_with_trace(automaton, word);
    const auto& table = automaton.table;
    Annotation ann;
    ann.x = table.encode_word(word);
    ann.y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trace.steps.size()), 1);
    const Eigen::VectorXd none = Eigen::VectorXd::Zero(table.dim());
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const auto& step = trace.steps[t];
        std::vector<int> pops;
        std::vector<Eigen::VectorXd> pushes;
        for (const auto& act : step.actions) {
            pops.push_back(act.pop_count);
            pushes.push_back(act.push == lr1::kNoPush ? none : table.code(act.push));
        }
        ann.pops.push_back(std::move(pops));
        ann.pushes.push_back(std::move(pushes));
        ann.shift.push_back(step.shift ? 1 : 0);
        ann.y(static_cast<Eigen::Index>(t), 0) = step.output ? 1.0 : 0.0;
    }
    return ann;
}

Eigen::MatrixXd desired_outputs(const lr1::Automaton& automaton, const Word& word) {
    const auto trace = lr1::parse_with_trace(automaton, word);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(trace.steps.size()), 1);
    for (std::size_t t = 0; t < trace.steps.size(); ++t)
        y(static_cast<Eigen::Index>(t), 0) = trace.steps[t].output ? 1.0 : 0.0;
    return y;
}

Word corrupt(const lr1::Automaton& automaton, const Word& word, Window window, Rng& rng) {
    const auto terminals = automaton.table.terminal_ids();
    std::uniform_int_distribution<std::size_t> pick_terminal(0, terminals.size() - 1);
    std::uniform_int_distribution<int> pick_op(0, 2);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Word w = word;
        const int op = pick_op(rng);
        if (op == 0 && !w.empty()) {
            const auto pos = std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng);
            const int sym = terminals[pick_terminal(rng)];
            if (sym == w[pos]) continue;
            w[pos] = sym;
        } else if (op == 1 && !w.empty()) {
            w.erase(w.begin() + static_cast<std::ptrdiff_t>(
                                    std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng)));
        } else {
            const auto pos = std::uniform_int_distribution<std::size_t>(0, w.size())(rng);
            w.insert(w.begin() + static_cast<std::ptrdiff_t>(pos), terminals[pick_terminal(rng)]);
        }
        const auto len = static_cast<int>(w.size());
        if (len < window.min_len || len > window.max_len) continue;
        if (!lr1::parse(automaton, w)) return w;
    }
    throw SamplingExhaustedError("corrupt: no non-member within one edit of '" +
                                 lr1::render(automaton.table, word) + "'");
}

namespace {

WordSampler language_sampler(const std::string& name, const TaskOptions& opts) {
    if (name == "anbn") return anbn_sampler();
    if (name == "palindrome") return palindrome_sampler();
    if (opts.grammar) return pcfg_sampler(*opts.grammar);
    if (name == "dyck1") return pcfg_sampler(dyck_pcfg(1));
    if (name == "dyck2") return pcfg_sampler(dyck_pcfg(2));
    if (name == "dyck3") return pcfg_sampler(dyck_pcfg(3));
    if (name == "json") return pcfg_sampler(json_pcfg());
    if (name == "latch") return pcfg_sampler(latch_pcfg());
    throw ConfigurationError("unknown language task '" + name + "'");
}

std::optional<Pcfg> language_grammar(const std::string& name, const TaskOptions& opts) {
    if (name == "anbn" || name == "palindrome") return std::nullopt;
    if (opts.grammar) return opts.grammar;
    if (name == "json") return json_pcfg();
    if (name == "latch") return latch_pcfg();
    return dyck_pcfg(name.back() - '0');
}

// Negatives are spread evenly: word i is corrupted when floor((i + 1) f) > floor(i f).
bool is_negative_slot(int i, double fraction) {
    return std::floor((i + 1) * fraction) > std::floor(i * fraction);
}

std::vector<Word> language_words(const lr1::Automaton& a, const WordSampler& sampler, int count, Window window,
                                 double negative_fraction, bool spread, Rng& rng) {
    std::vector<Word> out;
    for (int i = 0; i < count; ++i) {
        // A length floor drawn uniformly over the window keeps long words from being drowned out
        // by the grammar's short ones.
        const int floor_len =
            spread ? std::uniform_int_distribution<int>(window.min_len, window.max_len)(rng) : window.min_len;
        Word w = a.table.ids(sampler(floor_len, window.max_len, rng));
        if (!lr1::parse(a, w)) throw ConfigurationError("sampler produced a word outside the language");
        if (is_negative_slot(i, negative_fraction)) w = corrupt(a, w, window, rng);
        out.push_back(std::move(w));
    }
    return out;
}

json window_json(Window w) { return {w.min_len, w.max_len}; }

Rng stream(std::uint64_t seed, std::uint64_t which) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(which)};
    return Rng(seq);
}

}  // namespace

TaskDataset make_language_task(const std::string& name, std::uint64_t seed, const TaskOptions& opts) {
    if (!is_language(name)) throw ConfigurationError("unknown language task '" + name + "'");
    if (opts.negative_fraction < 0.0 || opts.negative_fraction > 1.0)
        throw ConfigurationError("negative_fraction must lie in [0, 1]");
    TaskDataset ds;
    ds.name = name;
    ds.seed = seed;
    ds.automaton = lr1::automaton_by_name(name);
    const auto& a = *ds.automaton;
    const WordSampler sampler = language_sampler(name, opts);

    Rng train_rng = stream(seed, 1), test_rng = stream(seed, 2);
    ds.train_words = language_words(a, sampler, opts.train_count, opts.train_window, opts.negative_fraction,
                                    opts.spread_train_lengths && language_grammar(name, opts).has_value(), train_rng);
    for (const auto& w : ds.train_words) ds.train.push_back(annotate(a, w));
    for (const auto& w : language_words(a, sampler, opts.test_count, opts.test_window, opts.negative_fraction, false, test_rng))
        ds.test.push_back({a.table.encode_word(w), desired_outputs(a, w), w});

    ds.out_mode = OutputMode::classifier;
    ds.input_dim = a.table.dim();
    ds.output_dim = 1;
    ds.manifest = {{"task", name},
                   {"seed", seed},
                   {"train_count", opts.train_count},
                   {"test_count", opts.test_count},
                   {"train_window", window_json(opts.train_window)},
                   {"test_window", window_json(opts.test_window)},
                   {"negative_fraction", opts.negative_fraction},
                   {"spread_train_lengths", opts.spread_train_lengths && language_grammar(name, opts).has_value()},
                   {"input_dim", ds.input_dim},
                   {"output_dim", ds.output_dim},
                   {"out_mode", "classifier"},
                   {"table", a.table.to_json()},
                   {"automaton", a.to_json()}};
    if (auto g = language_grammar(name, opts)) ds.manifest["grammar"] = g->to_json();
    return ds;
}

// ---------------------------------------------------------------------------------------------
// Copy tasks

int copy_input_dim(const TaskOptions& opts) { return opts.copy_bits + 2; }

Eigen::VectorXd copy_placeholder(const TaskOptions& opts) {
    return Eigen::VectorXd::Unit(copy_input_dim(opts), opts.copy_bits + 1);
}

Annotation copy_annotation(const Eigen::MatrixXd& bits, int repeats, const TaskOptions& opts) {
    const int len = static_cast<int>(bits.rows());
    const int n = copy_input_dim(opts);
    const int end_channel = opts.copy_bits;
    if (bits.cols() != opts.copy_bits) throw DimensionError("copy_annotation: bit width mismatch");
    if (len < 1 || len > opts.copy_fill_height)
        throw ConfigurationError("copy_annotation: sequence length must lie in [1, fill height]");
    if (repeats < 1) throw ConfigurationError("copy_annotation: at least one end token required");

    const int total = len + repeats * (len + 1);
    Annotation ann;
    ann.x = Eigen::MatrixXd::Zero(total, n);
    ann.y = Eigen::MatrixXd::Zero(total + 1, opts.copy_bits);
    const Eigen::VectorXd none = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd placeholder = copy_placeholder(opts);
    ann.pops.assign(static_cast<std::size_t>(total + 1), {0});
    ann.pushes.assign(static_cast<std::size_t>(total + 1), {none});
    ann.shift.assign(static_cast<std::size_t>(total + 1), 1);

    for (int t = 0; t < len; ++t) {
        ann.x.row(t).head(opts.copy_bits) = bits.row(t);
        ann.x(t, end_channel) = -1.0;
    }
    for (int r = 0; r < repeats; ++r) {
        const int eos = len + r * (len + 1);
        ann.x(eos, end_channel) = 1.0;
        auto& pops = ann.pops[static_cast<std::size_t>(eos)];
        auto& pushes = ann.pushes[static_cast<std::size_t>(eos)];
        pops.clear();
        pushes.clear();
        if (r == 0) {
            // Stack holds the data; fill it up to the target height.
            for (int k = len; k < opts.copy_fill_height; ++k) {
                pops.push_back(0);
                pushes.push_back(placeholder);
            }
        } else {
            // Remove the previous output phase and its end token; the fill below them stays.
            pops.push_back(len + 1);
            pushes.push_back(none);
        }
        pops.push_back(0);
        pushes.push_back(none);
        for (int k = 0; k < len; ++k) ann.y.row(eos + 1 + k) = bits.row(k);
    }
    return ann;
}

namespace {

Eigen::MatrixXd random_bits(int len, int width, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    Eigen::MatrixXd b(len, width);
    for (int i = 0; i < len; ++i)
        for (int j = 0; j < width; ++j) b(i, j) = coin(rng) ? 1.0 : 0.0;
    return b;
}

TaskDataset copy_dataset(const std::string& name, std::uint64_t seed, const TaskOptions& opts, Window length,
                         Window train_repeats, Window test_repeats) {
    if (length.min_len < 1 || length.max_len > opts.copy_fill_height || length.min_len > length.max_len)
        throw ConfigurationError(name + ": length window must lie within [1, fill height]");
    TaskDataset ds;
    ds.name = name;
    ds.seed = seed;
    Rng train_rng = stream(seed, 1), test_rng = stream(seed, 2);
    auto draw = [&](Rng& rng, Window reps) {
        const int len = std::uniform_int_distribution<int>(length.min_len, length.max_len)(rng);
        const int r = std::uniform_int_distribution<int>(reps.min_len, reps.max_len)(rng);
        return std::make_pair(random_bits(len, opts.copy_bits, rng), r);
    };
    for (int i = 0; i < opts.train_count; ++i) {
        auto [bits, r] = draw(train_rng, train_repeats);
        ds.train.push_back(copy_annotation(bits, r, opts));
    }
    std::vector<std::pair<Eigen::MatrixXd, int>> test;
    for (int i = 0; i < opts.test_count; ++i) test.push_back(draw(test_rng, test_repeats));
    // Longer repeat counts than in training must be represented.
    if (test_repeats.max_len > train_repeats.max_len && !test.empty() &&
        std::none_of(test.begin(), test.end(), [&](const auto& p) { return p.second > train_repeats.max_len; }))
        test.back().second = test_repeats.max_len;
    for (const auto& [bits, r] : test) {
        Annotation ann = copy_annotation(bits, r, opts);
        ds.test.push_back({std::move(ann.x), std::move(ann.y), {}});
    }
    ds.out_mode = OutputMode::ridge;
    ds.input_dim = copy_input_dim(opts);
    ds.output_dim = opts.copy_bits;
    ds.manifest = {{"task", name},
                   {"seed", seed},
                   {"train_count", opts.train_count},
                   {"test_count", opts.test_count},
                   {"length_window", window_json(length)},
                   {"train_repeats", window_json(train_repeats)},
                   {"test_repeats", window_json(test_repeats)},
                   {"fill_height", opts.copy_fill_height},
                   {"input_dim", ds.input_dim},
                   {"output_dim", ds.output_dim},
                   {"out_mode", "ridge"}};
    return ds;
}

}  // namespace

TaskDataset make_copy_task(std::uint64_t seed, const TaskOptions& opts) {
    return copy_dataset("copy", seed, opts, opts.copy_length, {1, 1}, {1, 1});
}

TaskDataset make_repeat_copy_task(std::uint64_t seed, const TaskOptions& opts) {
    return copy_dataset("repeat_copy", seed, opts, opts.repeat_length, {1, opts.repeat_train_max},
                        {1, opts.repeat_test_max});
}

TaskDataset make_task(const std::string& name, std::uint64_t seed, const TaskOptions& opts) {
    if (name == "copy") return make_copy_task(seed, opts);
    if (name == "repeat_copy") return make_repeat_copy_task(seed, opts);
    return make_language_task(name, seed, opts);
}

// ---------------------------------------------------------------------------------------------
// Persistence

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

std::vector<json> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

}  // namespace

void write_jsonl(const std::filesystem::path& path, const std::vector<Annotation>& anns) {
    auto out = open_out(path);
    for (const auto& a : anns) out << a.to_json().dump() << '\n';
}

std::vector<Annotation> read_annotations_jsonl(const std::filesystem::path& path) {
    std::vector<Annotation> out;
    for (const auto& j : read_lines(path)) out.push_back(Annotation::from_json(j));
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<TestItem>& items) {
    auto out = open_out(path);
    for (const auto& item : items) {
        json j = {{"x", matrix_to_json(item.x)}, {"Y", matrix_to_json(item.y)}, {"n", item.x.cols()},
                  {"L", item.y.cols()}};
        if (!item.word.empty()) j["word"] = item.word;
        out << j.dump() << '\n';
    }
}

std::vector<TestItem> read_test_jsonl(const std::filesystem::path& path) {
    std::vector<TestItem> out;
    for (const auto& j : read_lines(path)) {
        TestItem item{matrix_from_json(j.at("x"), j.value("n", 0)), matrix_from_json(j.at("Y"), j.value("L", 0)),
                      j.value("word", std::vector<int>{})};
        if (item.y.rows() != item.x.rows() + 1) throw DimensionError("test item: Y must have T + 1 rows");
        out.push_back(std::move(item));
    }
    return out;
}

void write_dataset(const std::filesystem::path& dir, const TaskDataset& ds) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "train.jsonl", ds.train);
    write_jsonl(dir / "test.jsonl", ds.test);
    auto out = open_out(dir / "manifest.json");
    out << ds.manifest.dump(2) << '\n';
}

}  // namespace rsm::tasks
