#pragma once

// Echo state networks with an affine readout, reservoir memory machines, and the
// suffix-convergence probe that shows why neither can recognize palindromes.

#include <Eigen/Dense>

#include <functional>

#include "rsm/classifiers.hpp"
#include "rsm/reservoir.hpp"

namespace rsm {

/// Reservoir plus affine readout from h_t alone.
struct EchoStateNetwork {
    Reservoir reservoir;
    LinearReadout readout;

    /// Readout of h_1..h_T, followed by h_{T+1} on a zero input when `end_step` is set.
    Eigen::MatrixXd run(const Sequence& x, bool end_step = true) const;
    /// run() over many sequences with batched reservoir updates.
    std::vector<Eigen::MatrixXd> run_batch(const std::vector<Sequence>& xs, bool end_step = true) const;
};

/// States h_1..h_{T+1} (zero input last) of every sequence stacked as rows.
Eigen::MatrixXd esn_design_matrix(const Reservoir& reservoir, const std::vector<Sequence>& xs);

/// Fits the readout on targets with T + 1 rows per sequence.
EchoStateNetwork fit_esn(const Reservoir& reservoir, const std::vector<Sequence>& xs,
                         const std::vector<Eigen::MatrixXd>& targets, double regularization);

class MemoryMachine {
public:
    /// Address in {0, ..., K} from the current state and the 0-based step index.
    using AddressFn = std::function<int(const Eigen::VectorXd& h, int t)>;
    using OutputFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& h)>;

    MemoryMachine(Reservoir reservoir, int memory_rows, AddressFn address, OutputFn output);

    const Reservoir& reservoir() const { return reservoir_; }
    int memory_rows() const { return memory_rows_; }

    struct Result {
        Eigen::MatrixXd y;       ///< T x L
        Eigen::MatrixXd states;  ///< T x m, after any recall
    };

    /// Memory starts zeroed and unwritten on every call.
    Result run(const Sequence& x) const;

private:
    Reservoir reservoir_;
    int memory_rows_;
    AddressFn address_;
    OutputFn output_;
};

MemoryMachine::AddressFn address_from_classifier(KernelClassifier c);
MemoryMachine::AddressFn constant_address(int a);
MemoryMachine::OutputFn output_from_readout(LinearReadout r);
/// Label k emits values[k].
MemoryMachine::OutputFn output_from_classifier(KernelClassifier c, std::vector<Eigen::VectorXd> values);

/// |h(a^T $ a^T) - h(b a^T $ a^T)| with one-hot codes from `table`, which must register a, b
/// and $.
double suffix_convergence_probe(const Reservoir& reservoir, int T, const SymbolTable& table);

}  // namespace rsm
