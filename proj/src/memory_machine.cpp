#include "rsm/memory_machine.hpp"

#include "rsm/errors.hpp"

namespace rsm {

Eigen::MatrixXd EchoStateNetwork::run(const Sequence& x, bool end_step) const {
    const Eigen::Index steps = x.rows() + (end_step ? 1 : 0);
    Eigen::MatrixXd states(steps, reservoir.neurons());
    Eigen::VectorXd h = reservoir.zero_state();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(reservoir.inputs());
    for (Eigen::Index t = 0; t < steps; ++t) {
        h = reservoir.step(h, t < x.rows() ? Eigen::VectorXd(x.row(t).transpose()) : zero);
        states.row(t) = h.transpose();
    }
    return readout.predict(states);
}

std::vector<Eigen::MatrixXd> EchoStateNetwork::run_batch(const std::vector<Sequence>& xs, bool end_step) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(xs.size());
    for (const auto& states : reservoir.states_batch(xs, end_step ? 1 : 0)) out.push_back(readout.predict(states));
    return out;
}

Eigen::MatrixXd esn_design_matrix(const Reservoir& reservoir, const std::vector<Sequence>& xs) {
    const auto states = reservoir.states_batch(xs, 1);
    Eigen::Index rows = 0;
    for (const auto& s : states) rows += s.rows();
    Eigen::MatrixXd out(rows, reservoir.neurons());
    Eigen::Index r = 0;
    for (const auto& s : states) {
        out.middleRows(r, s.rows()) = s;
        r += s.rows();
    }
    return out;
}

EchoStateNetwork fit_esn(const Reservoir& reservoir, const std::vector<Sequence>& xs,
                         const std::vector<Eigen::MatrixXd>& targets, double regularization) {
    if (xs.empty() || xs.size() != targets.size()) throw DimensionError("fit_esn: need one target per sequence");
    const Eigen::MatrixXd design = esn_design_matrix(reservoir, xs);
    Eigen::MatrixXd y(design.rows(), targets.front().cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (targets[i].rows() != xs[i].rows() + 1 || targets[i].cols() != y.cols())
            throw DimensionError("fit_esn: targets need T + 1 rows and a common width");
        y.middleRows(r, targets[i].rows()) = targets[i];
        r += targets[i].rows();
    }
    return {reservoir, fit_linear_ridge(design, y, regularization)};
}

MemoryMachine::MemoryMachine(Reservoir reservoir, int memory_rows, AddressFn address, OutputFn output)
    : reservoir_(std::move(reservoir)), memory_rows_(memory_rows), address_(std::move(address)),
      output_(std::move(output)) {
    if (memory_rows_ < 0) throw ConfigurationError("memory machine: negative memory size");
    if (!address_ || !output_) throw ConfigurationError("memory machine: address and output functions required");
}

MemoryMachine::Result MemoryMachine::run(const Sequence& x) const {
    Eigen::MatrixXd memory = Eigen::MatrixXd::Zero(memory_rows_, reservoir_.neurons());
    std::vector<bool> written(static_cast<std::size_t>(memory_rows_), false);
    Result res;
    res.states.resize(x.rows(), reservoir_.neurons());
    Eigen::VectorXd h = reservoir_.zero_state();
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        h = reservoir_.step(h, x.row(t).transpose());
        const int a = address_(h, static_cast<int>(t));
        if (a < 0 || a > memory_rows_)
            throw ConfigurationError("memory machine: address " + std::to_string(a) + " outside [0, K]");
        if (a > 0) {
            const auto row = static_cast<Eigen::Index>(a - 1);
            if (written[static_cast<std::size_t>(row)]) {
                h = memory.row(row).transpose();
            } else {
                memory.row(row) = h.transpose();
                written[static_cast<std::size_t>(row)] = true;
            }
        }
        const Eigen::VectorXd y = output_(h);
        if (t == 0) res.y.resize(x.rows(), y.size());
        res.y.row(t) = y.transpose();
        res.states.row(t) = h.transpose();
    }
    if (x.rows() == 0) res.y.resize(0, 0);
    return res;
}

MemoryMachine::AddressFn address_from_classifier(KernelClassifier c) {
    return [c = std::move(c)](const Eigen::VectorXd& h, int) { return c.predict_one(h); };
}

MemoryMachine::AddressFn constant_address(int a) {
    return [a](const Eigen::VectorXd&, int) { return a; };
}

MemoryMachine::OutputFn output_from_readout(LinearReadout r) {
    return [r = std::move(r)](const Eigen::VectorXd& h) { return r.predict_one(h); };
}

MemoryMachine::OutputFn output_from_classifier(KernelClassifier c, std::vector<Eigen::VectorXd> values) {
    return [c = std::move(c), values = std::move(values)](const Eigen::VectorXd& h) {
        return values.at(static_cast<std::size_t>(c.predict_one(h)));
    };
}

double suffix_convergence_probe(const Reservoir& reservoir, int T, const SymbolTable& table) {
    if (T < 0) throw ConfigurationError("suffix_convergence_probe: T must be non-negative");
    const int a = table.id("a"), b = table.id("b"), dollar = table.id("$");
    Word base(static_cast<std::size_t>(T), a);
    base.push_back(dollar);
    base.insert(base.end(), static_cast<std::size_t>(T), a);
    Word variant = base;
    variant.insert(variant.begin(), b);
    const Eigen::VectorXd h = reservoir.encode_sequence(table.encode_word(base));
    const Eigen::VectorXd h2 = reservoir.encode_sequence(table.encode_word(variant));
    return (h - h2).norm();
}

}  // namespace rsm
