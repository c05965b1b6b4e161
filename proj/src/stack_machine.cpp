#include "rsm/stack_machine.hpp"

#include <algorithm>

#include "rsm/errors.hpp"
#include "rsm/json_util.hpp"

namespace rsm {

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

Eigen::VectorXd concat(const Eigen::VectorXd& h, const Eigen::VectorXd& g) {
    Eigen::VectorXd v(h.size() + g.size());
    v << h, g;
    return v;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

int index_of(const std::vector<Eigen::VectorXd>& list, const Eigen::VectorXd& v) {
    for (std::size_t i = 0; i < list.size(); ++i)
        if (list[i].size() == v.size() && list[i] == v) return static_cast<int>(i);
    return -1;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Annotation

int Annotation::max_pop() const {
    int best = 0;
    for (const auto& row : pops)
        for (int j : row) best = std::max(best, j);
    return best;
}

void Annotation::validate() const {
    const auto steps = static_cast<std::size_t>(length() + 1);
    if (pops.size() != steps || pushes.size() != steps || shift.size() != steps)
        throw DimensionError("annotation: expected " + std::to_string(steps) + " rows of actions");
    if (static_cast<std::size_t>(y.rows()) != steps) throw DimensionError("annotation: Y must have T + 1 rows");
    for (std::size_t t = 0; t < steps; ++t) {
        if (pops[t].size() != pushes[t].size() || pops[t].empty())
            throw DimensionError("annotation: ragged action row " + std::to_string(t));
        for (std::size_t k = 0; k < pops[t].size(); ++k) {
            if (pops[t][k] < 0) throw ConfigurationError("annotation: negative pop count");
            if (pushes[t][k].size() != input_dim()) throw DimensionError("annotation: push code dimension mismatch");
            const bool sentinel = pops[t][k] == 0 && pushes[t][k].isZero(0.0);
            if (sentinel != (k + 1 == pops[t].size()))
                throw ConfigurationError("annotation: row " + std::to_string(t) + " must end with exactly one sentinel");
        }
    }
}

json Annotation::to_json() const {
    json a = json::array();
    for (const auto& row : pushes) {
        json r = json::array();
        for (const auto& code : row) r.push_back(vector_to_json(code));
        a.push_back(std::move(r));
    }
    return {{"x", matrix_to_json(x)}, {"J", pops}, {"A", a}, {"rho", shift}, {"Y", matrix_to_json(y)},
            {"n", input_dim()}, {"L", output_dim()}};
}

Annotation Annotation::from_json(const json& j) {
    Annotation ann;
    ann.x = matrix_from_json(j.at("x"), j.value("n", 0));
    ann.pops = j.at("J").get<std::vector<std::vector<int>>>();
    for (const auto& row : j.at("A")) {
        std::vector<Eigen::VectorXd> r;
        for (const auto& code : row) r.push_back(vector_from_json(code));
        ann.pushes.push_back(std::move(r));
    }
    ann.shift = j.at("rho").get<std::vector<int>>();
    ann.y = matrix_from_json(j.at("Y"), j.value("L", 0));
    if (ann.x.cols() == 0 && !ann.pushes.empty() && !ann.pushes[0].empty())
        ann.x.resize(0, ann.pushes[0][0].size());
    ann.validate();
    return ann;
}

// ---------------------------------------------------------------------------------------------
// StackWithStates

StackWithStates::StackWithStates(const Reservoir& reservoir)
    : reservoir_(&reservoir), zero_(reservoir.zero_state()) {}

void StackWithStates::push(const Eigen::VectorXd& symbol) {
    Eigen::VectorXd next = reservoir_->step(state(), symbol);
    symbols_.push_back(symbol);
    states_.push_back(std::move(next));
}

void StackWithStates::pop(int j) {
    if (j < 0) throw ConfigurationError("stack: negative pop count");
    if (j > size())
        throw PopUnderflowError("stack: cannot pop " + std::to_string(j) + " of " + std::to_string(size()) + " symbols");
    symbols_.resize(symbols_.size() - static_cast<std::size_t>(j));
    states_.resize(states_.size() - static_cast<std::size_t>(j));
}

bool StackWithStates::pop_clamped(int j) {
    const bool clamped = j > size();
    pop(std::min(j, size()));
    return clamped;
}

Eigen::VectorXd StackWithStates::refold() const {
    Eigen::VectorXd g = zero_;
    for (const auto& s : symbols_) g = reservoir_->step(g, s);
    return g;
}

// ---------------------------------------------------------------------------------------------
// Teacher forcing

namespace {

struct Collector {
    std::vector<Eigen::VectorXd> popush_rows, step_rows, push_y;
    std::vector<int> pop_y, shift_y;
    std::vector<Eigen::VectorXd> out_rows;
};

void collect_into(const Reservoir& r, const Annotation& ann, Collector& c, StackLog* log) {
    ann.validate();
    if (ann.input_dim() != r.inputs()) throw DimensionError("collect_training: annotation input dimension mismatch");
    StackWithStates stack(r);
    Eigen::VectorXd h = r.zero_state();
    const Eigen::VectorXd end = Eigen::VectorXd::Zero(r.inputs());
    for (int t = 0; t <= ann.length(); ++t) {
        const Eigen::VectorXd x = t < ann.length() ? Eigen::VectorXd(ann.x.row(t).transpose()) : end;
        h = r.step(h, x);
        const auto& pops = ann.pops[static_cast<std::size_t>(t)];
        const auto& pushes = ann.pushes[static_cast<std::size_t>(t)];
        for (std::size_t k = 0; k < pops.size(); ++k) {
            c.popush_rows.push_back(concat(h, stack.state()));
            c.pop_y.push_back(pops[k]);
            c.push_y.push_back(pushes[k]);
            stack.pop(pops[k]);
            if (!pushes[k].isZero(0.0)) stack.push(pushes[k]);
        }
        c.step_rows.push_back(concat(h, stack.state()));
        c.shift_y.push_back(ann.shift[static_cast<std::size_t>(t)]);
        c.out_rows.push_back(ann.y.row(t).transpose());
        if (ann.shift[static_cast<std::size_t>(t)] > 0) stack.push(x);
        if (log) log->push_back(stack.symbols());
    }
}

TrainingData finish(const Collector& c, const Reservoir& r, int output_dim) {
    const Eigen::Index width = 2 * r.neurons();
    return {stack_rows(c.popush_rows, width), c.pop_y, c.push_y, stack_rows(c.step_rows, width), c.shift_y,
            stack_rows(c.out_rows, output_dim)};
}

}  // namespace

TrainingData collect_training(const Reservoir& reservoir, const Annotation& ann, StackLog* log) {
    Collector c;
    collect_into(reservoir, ann, c, log);
    return finish(c, reservoir, ann.output_dim());
}

TrainingData collect_training(const Reservoir& reservoir, const std::vector<Annotation>& corpus) {
    if (corpus.empty()) throw ConfigurationError("collect_training: empty corpus");
    Collector c;
    for (const auto& ann : corpus) {
        if (ann.output_dim() != corpus.front().output_dim())
            throw DimensionError("collect_training: output dimensions differ across the corpus");
        collect_into(reservoir, ann, c, nullptr);
    }
    return finish(c, reservoir, corpus.front().output_dim());
}

// ---------------------------------------------------------------------------------------------
// StackMachine

StackMachine::StackMachine(Reservoir reservoir, KernelClassifier pop, KernelClassifier push, KernelClassifier shift,
                           std::vector<Eigen::VectorXd> push_codes, OutputMode out_mode,
                           KernelClassifier out_classifier, std::vector<Eigen::VectorXd> out_values,
                           LinearReadout out_ridge, int max_inner_iterations)
    : reservoir_(std::move(reservoir)),
      pop_(std::move(pop)),
      push_(std::move(push)),
      shift_(std::move(shift)),
      push_codes_(std::move(push_codes)),
      out_mode_(out_mode),
      out_classifier_(std::move(out_classifier)),
      out_values_(std::move(out_values)),
      out_ridge_(std::move(out_ridge)),
      max_inner_iterations_(max_inner_iterations) {
    if (max_inner_iterations_ < 1) throw ConfigurationError("stack machine: max_inner_iterations must be positive");
    for (int k : push_.labels())
        if (k < 0 || k > static_cast<int>(push_codes_.size()))
            throw ConfigurationError("stack machine: push class without a code");
    for (const auto& c : push_codes_)
        if (c.size() != reservoir_.inputs() || c.isZero(0.0))
            throw ConfigurationError("stack machine: push codes must be nonzero input vectors");
    if (out_mode_ == OutputMode::classifier) {
        if (out_values_.empty()) throw ConfigurationError("stack machine: classifier output needs output values");
        for (int k : out_classifier_.labels())
            if (k < 0 || k >= static_cast<int>(out_values_.size()))
                throw ConfigurationError("stack machine: output class without a value");
    } else if (out_ridge_.inputs() != 2 * reservoir_.neurons()) {
        throw DimensionError("stack machine: ridge readout must consume 2m features");
    }
}

int StackMachine::output_dim() const {
    return out_mode_ == OutputMode::classifier ? static_cast<int>(out_values_.front().size()) : out_ridge_.outputs();
}

int StackMachine::max_pop() const { return pop_.labels().empty() ? 0 : pop_.labels().back(); }

int StackMachine::push_class(const Eigen::VectorXd& code) const {
    if (code.isZero(0.0)) return 0;
    const int i = index_of(push_codes_, code);
    if (i < 0) throw UnknownSymbolError("stack machine: push code not in the machine's alphabet");
    return i + 1;
}

RunResult StackMachine::run(const Sequence& x, const RunOptions& opts) const {
    return std::move(run_batch({x}, opts).front());
}

namespace {

enum class Phase { inner, emit, done };

struct Cursor {
    const Sequence* x;
    int t = 0;
    int inner = 0;
    Phase phase = Phase::inner;
    Eigen::VectorXd h;
    StackWithStates stack;
    RunResult result;
};

Eigen::VectorXd input_at(const Sequence& x, int t) {
    if (t < x.rows()) return x.row(t).transpose();
    return Eigen::VectorXd::Zero(x.cols());
}

constexpr Eigen::Index kPredictBlock = 2048;

// Predictions of two classifiers on the same rows, sharing the kernel block when possible.
std::pair<std::vector<int>, std::vector<int>> predict_pair(const KernelClassifier& a, const KernelClassifier& b,
                                                           const Eigen::MatrixXd& f) {
    std::pair<std::vector<int>, std::vector<int>> out;
    for (Eigen::Index start = 0; start < f.rows(); start += kPredictBlock) {
        const Eigen::MatrixXd block = f.middleRows(start, std::min(kPredictBlock, f.rows() - start));
        std::vector<int> pa, pb;
        if (a.shares_kernel_with(b)) {
            const Eigen::MatrixXd k = a.kernel(block);
            pa = a.predict_from_kernel(k);
            pb = b.predict_from_kernel(k);
        } else {
            pa = a.predict(block);
            pb = b.predict(block);
        }
        out.first.insert(out.first.end(), pa.begin(), pa.end());
        out.second.insert(out.second.end(), pb.begin(), pb.end());
    }
    return out;
}

}  // namespace

std::vector<RunResult> StackMachine::run_batch(const std::vector<Sequence>& xs, const RunOptions& opts) const {
    const int m = reservoir_.neurons();
    const int out_dim = output_dim();
    std::vector<Cursor> cursors;
    cursors.reserve(xs.size());
    for (const auto& x : xs) {
        if (x.cols() != reservoir_.inputs())
            throw DimensionError("stack machine: input dimension " + std::to_string(x.cols()) + ", expected " +
                                 std::to_string(reservoir_.inputs()));
        Cursor c{&x, 0, 0, Phase::inner, reservoir_.step(reservoir_.zero_state(), input_at(x, 0)),
                 StackWithStates(reservoir_), {}};
        c.result.y = Eigen::MatrixXd::Zero(x.rows() + 1, out_dim);
        if (opts.record_steps) c.result.steps.emplace_back();
        cursors.push_back(std::move(c));
    }

    auto features = [&](const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd f(static_cast<Eigen::Index>(idx.size()), 2 * m);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            f.row(static_cast<Eigen::Index>(i)).head(m) = cursors[idx[i]].h.transpose();
            f.row(static_cast<Eigen::Index>(i)).tail(m) = cursors[idx[i]].stack.state().transpose();
        }
        return f;
    };
    auto verify_cache = [&](const Cursor& c) {
        if (opts.check_cache && c.stack.refold() != c.stack.state())
            throw NumericalError("stack machine: cached stack state differs from the re-folded state");
    };

    std::vector<std::size_t> idx;
    for (;;) {
        idx.clear();
        for (std::size_t i = 0; i < cursors.size(); ++i)
            if (cursors[i].phase == Phase::inner) idx.push_back(i);
        if (!idx.empty()) {
            const auto [pops, pushes] = predict_pair(pop_, push_, features(idx));
            for (std::size_t q = 0; q < idx.size(); ++q) {
                Cursor& c = cursors[idx[q]];
                const int j = pops[q];
                const int a = pushes[q];
                if (opts.record_steps) c.result.steps.back().actions.emplace_back(j, a);
                if (j == 0 && a == 0) {
                    c.phase = Phase::emit;
                    continue;
                }
                if (++c.inner > max_inner_iterations_) {
                    if (opts.throw_on_runaway)
                        throw RunawayLoopError("stack machine: inner loop exceeded " +
                                               std::to_string(max_inner_iterations_) + " iterations at step " +
                                               std::to_string(c.t + 1));
                    c.result.runaway = true;
                    c.phase = Phase::emit;
                    continue;
                }
                if (j > 0) c.result.clamped_pop |= c.stack.pop_clamped(j);
                if (a > 0) c.stack.push(push_codes_[static_cast<std::size_t>(a - 1)]);
                verify_cache(c);
            }
        }

        idx.clear();
        for (std::size_t i = 0; i < cursors.size(); ++i)
            if (cursors[i].phase == Phase::emit) idx.push_back(i);
        if (idx.empty()) {
            if (std::all_of(cursors.begin(), cursors.end(), [](const Cursor& c) { return c.phase == Phase::done; }))
                break;
            continue;
        }
        const Eigen::MatrixXd f = features(idx);
        std::vector<int> shifts, outs;
        Eigen::MatrixXd ridge_out;
        if (out_mode_ == OutputMode::classifier) {
            std::tie(shifts, outs) = predict_pair(shift_, out_classifier_, f);
        } else {
            shifts = shift_.predict(f);
            ridge_out = out_ridge_.predict(f);
        }
        for (std::size_t q = 0; q < idx.size(); ++q) {
            Cursor& c = cursors[idx[q]];
            if (out_mode_ == OutputMode::classifier)
                c.result.y.row(c.t) = out_values_[static_cast<std::size_t>(outs[q])].transpose();
            else
                c.result.y.row(c.t) = ridge_out.row(static_cast<Eigen::Index>(q));
            const Eigen::VectorXd x = input_at(*c.x, c.t);
            if (shifts[q] > 0) {
                c.stack.push(x);
                verify_cache(c);
            }
            if (opts.record_steps) {
                c.result.steps.back().shift = shifts[q] > 0;
                c.result.stacks.push_back(c.stack.symbols());
            }
            ++c.t;
            c.inner = 0;
            if (c.t > c.x->rows()) {
                c.phase = Phase::done;
                continue;
            }
            c.h = reservoir_.step(c.h, input_at(*c.x, c.t));
            c.phase = Phase::inner;
            if (opts.record_steps) c.result.steps.emplace_back();
        }
    }

    std::vector<RunResult> out;
    out.reserve(cursors.size());
    for (auto& c : cursors) out.push_back(std::move(c.result));
    return out;
}

namespace {

json codes_to_json(const std::vector<Eigen::VectorXd>& codes) {
    json j = json::array();
    for (const auto& c : codes) j.push_back(vector_to_json(c));
    return j;
}

std::vector<Eigen::VectorXd> codes_from_json(const json& j) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& c : j) out.push_back(vector_from_json(c));
    return out;
}

}  // namespace

json StackMachine::to_json() const {
    json j = {{"reservoir", reservoir_.to_json()},
              {"pop", pop_.to_json()},
              {"push", push_.to_json()},
              {"shift", shift_.to_json()},
              {"push_codes", codes_to_json(push_codes_)},
              {"out_mode", out_mode_ == OutputMode::classifier ? "classifier" : "ridge"},
              {"max_inner_iterations", max_inner_iterations_}};
    if (out_mode_ == OutputMode::classifier) {
        j["out"] = out_classifier_.to_json();
        j["out_values"] = codes_to_json(out_values_);
    } else {
        j["out"] = out_ridge_.to_json();
    }
    return j;
}

StackMachine StackMachine::from_json(const json& j) {
    const auto mode = j.at("out_mode").get<std::string>();
    if (mode != "classifier" && mode != "ridge") throw ConfigurationError("stack machine JSON: unknown out_mode");
    const bool cls = mode == "classifier";
    KernelClassifier pop = KernelClassifier::from_json(j.at("pop"));
    KernelClassifier push = KernelClassifier::from_json(j.at("push"));
    push.share_support_with(pop);
    KernelClassifier shift = KernelClassifier::from_json(j.at("shift"));
    KernelClassifier out_cls;
    LinearReadout ridge;
    std::vector<Eigen::VectorXd> values;
    if (cls) {
        out_cls = KernelClassifier::from_json(j.at("out"));
        out_cls.share_support_with(shift);
        values = codes_from_json(j.at("out_values"));
    } else {
        ridge = LinearReadout::from_json(j.at("out"));
    }
    return StackMachine(Reservoir::from_json(j.at("reservoir")), std::move(pop), std::move(push), std::move(shift),
                        codes_from_json(j.at("push_codes")), cls ? OutputMode::classifier : OutputMode::ridge,
                        std::move(out_cls), std::move(values), std::move(ridge),
                        j.value("max_inner_iterations", 64));
}

StackMachine fit(const Reservoir& reservoir, const std::vector<Annotation>& corpus, const FitOptions& opts) {
    const TrainingData d = collect_training(reservoir, corpus);

    std::vector<Eigen::VectorXd> push_codes;
    std::vector<int> push_labels;
    push_labels.reserve(d.push_y.size());
    for (const auto& code : d.push_y) {
        if (code.isZero(0.0)) {
            push_labels.push_back(0);
            continue;
        }
        int i = index_of(push_codes, code);
        if (i < 0) {
            push_codes.push_back(code);
            i = static_cast<int>(push_codes.size()) - 1;
        }
        push_labels.push_back(i + 1);
    }
    auto popush = fit_kernel_classifiers(d.popush_x, {d.pop_y, push_labels}, opts.classifier_regularization,
                                         opts.kernel_width_factor, opts.classifier_refits);

    KernelClassifier shift, out_cls;
    std::vector<Eigen::VectorXd> out_values;
    LinearReadout ridge;
    if (opts.out_mode == OutputMode::classifier) {
        for (Eigen::Index i = 0; i < d.out_y.rows(); ++i) {
            const Eigen::VectorXd v = d.out_y.row(i).transpose();
            if (index_of(out_values, v) < 0) out_values.push_back(v);
        }
        std::sort(out_values.begin(), out_values.end(), lex_less);
        std::vector<int> out_labels;
        out_labels.reserve(static_cast<std::size_t>(d.out_y.rows()));
        for (Eigen::Index i = 0; i < d.out_y.rows(); ++i)
            out_labels.push_back(index_of(out_values, d.out_y.row(i).transpose()));
        auto so = fit_kernel_classifiers(d.step_x, {d.shift_y, out_labels}, opts.classifier_regularization,
                                         opts.kernel_width_factor, opts.classifier_refits);
        shift = std::move(so[0]);
        out_cls = std::move(so[1]);
    } else {
        shift = fit_kernel_classifiers(d.step_x, {d.shift_y}, opts.classifier_regularization, opts.kernel_width_factor,
                                       opts.classifier_refits)
                    .front();
        ridge = fit_linear_ridge(d.step_x, d.out_y, opts.ridge_regularization);
    }
    return StackMachine(reservoir, std::move(popush[0]), std::move(popush[1]), std::move(shift), std::move(push_codes),
                        opts.out_mode, std::move(out_cls), std::move(out_values), std::move(ridge),
                        opts.max_inner_iterations);
}

Fidelity training_fidelity(const StackMachine& machine, const std::vector<Annotation>& corpus) {
    const TrainingData d = collect_training(machine.reservoir(), corpus);
    Fidelity f;
    const auto [pops, pushes] = predict_pair(machine.pop_classifier(), machine.push_classifier(), d.popush_x);
    for (std::size_t i = 0; i < pops.size(); ++i) {
        f.decisions += 2;
        f.agreeing += (pops[i] == d.pop_y[i]) + (pushes[i] == machine.push_class(d.push_y[i]));
    }
    const auto shifts = predict_pair(machine.shift_classifier(), machine.shift_classifier(), d.step_x).first;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        f.decisions += 1;
        f.agreeing += (shifts[i] > 0) == (d.shift_y[i] > 0);
    }
    return f;
}

}  // namespace rsm
