#pragma once

// Symbol identity and vector encoding shared by the parser and the reservoir models.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rsm {

using json = nlohmann::json;

/// A sequence of input vectors, one row per time step (T x n). An empty sequence has zero rows.
using Sequence = Eigen::MatrixXd;

/// A word as symbol ids of a SymbolTable.
using Word = std::vector<int>;

inline constexpr double kDefaultDecodeTolerance = 1e-6;

enum class SymbolKind { terminal, nonterminal };

struct Symbol {
    std::string name;
    SymbolKind kind;
    Eigen::VectorXd code;
};

/// Bijection between symbol names and their codes in R^n.
///
/// Terminal and nonterminal names are disjoint, codes are pairwise distinct and no
/// nonterminal is encoded by the zero vector (the zero vector means "no push" and marks the
/// end of the input). Symbol ids are assigned in registration order.
class SymbolTable {
public:
    SymbolTable() = default;
    explicit SymbolTable(int dim);

    /// Terminals first, then nonterminals; symbol i is the i-th unit vector.
    static SymbolTable one_hot(const std::vector<std::string>& terminals,
                               const std::vector<std::string>& nonterminals);

    int add_terminal(std::string name, Eigen::VectorXd code);
    int add_nonterminal(std::string name, Eigen::VectorXd code);

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(symbols_.size()); }

    int id(std::string_view name) const;
    std::optional<int> find(std::string_view name) const;
    const Symbol& symbol(int id) const;
    const std::string& name(int id) const { return symbol(id).name; }
    const Eigen::VectorXd& code(int id) const { return symbol(id).code; }
    const Eigen::VectorXd& encode(std::string_view name) const { return code(id(name)); }
    bool is_terminal(int id) const { return symbol(id).kind == SymbolKind::terminal; }

    /// The registered symbol whose code lies within `tol` of `v`, if any.
    /// Throws AmbiguousSymbolError when more than one code is that close.
    std::optional<std::string> decode(const Eigen::VectorXd& v,
                                      double tol = kDefaultDecodeTolerance) const;
    std::optional<int> decode_id(const Eigen::VectorXd& v,
                                 double tol = kDefaultDecodeTolerance) const;

    std::vector<int> terminal_ids() const;
    std::vector<int> nonterminal_ids() const;
    double min_pairwise_distance() const;

    /// Stacks the codes of `word` into a T x n sequence.
    Sequence encode_word(const Word& word) const;
    Word ids(const std::vector<std::string>& names) const;

    json to_json() const;
    static SymbolTable from_json(const json& j);

private:
    int add(std::string name, Eigen::VectorXd code, SymbolKind kind);

    int dim_ = 0;
    std::vector<Symbol> symbols_;
};

}  // namespace rsm
