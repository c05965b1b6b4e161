#include "rsm/alphabet.hpp"

#include <algorithm>
#include <limits>

#include "rsm/errors.hpp"
#include "rsm/json_util.hpp"

namespace rsm {

SymbolTable::SymbolTable(int dim) : dim_(dim) {
    if (dim < 1) throw DimensionError("symbol table dimension must be positive");
}

SymbolTable SymbolTable::one_hot(const std::vector<std::string>& terminals,
                                 const std::vector<std::string>& nonterminals) {
    const int n = static_cast<int>(terminals.size() + nonterminals.size());
    SymbolTable table(n);
    int k = 0;
    for (const auto& name : terminals) table.add_terminal(name, Eigen::VectorXd::Unit(n, k++));
    for (const auto& name : nonterminals) table.add_nonterminal(name, Eigen::VectorXd::Unit(n, k++));
    return table;
}

int SymbolTable::add_terminal(std::string name, Eigen::VectorXd code) {
    return add(std::move(name), std::move(code), SymbolKind::terminal);
}

int SymbolTable::add_nonterminal(std::string name, Eigen::VectorXd code) {
    if (code.size() == dim_ && code.isZero(0.0))
        throw Error("nonterminal '" + name + "' may not be encoded by the zero vector");
    return add(std::move(name), std::move(code), SymbolKind::nonterminal);
}

int SymbolTable::add(std::string name, Eigen::VectorXd code, SymbolKind kind) {
    if (code.size() != dim_)
        throw DimensionError("code of '" + name + "' has dimension " + std::to_string(code.size()) +
                             ", table expects " + std::to_string(dim_));
    if (find(name)) throw Error("symbol '" + name + "' registered twice");
    for (const auto& s : symbols_)
        if (s.code == code) throw Error("symbols '" + s.name + "' and '" + name + "' share a code");
    symbols_.push_back({std::move(name), kind, std::move(code)});
    return size() - 1;
}

std::optional<int> SymbolTable::find(std::string_view name) const {
    for (int i = 0; i < size(); ++i)
        if (symbols_[i].name == name) return i;
    return std::nullopt;
}

int SymbolTable::id(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw UnknownSymbolError("unknown symbol '" + std::string(name) + "'");
}

const Symbol& SymbolTable::symbol(int id) const {
    if (id < 0 || id >= size()) throw UnknownSymbolError("symbol id " + std::to_string(id) + " out of range");
    return symbols_[id];
}

std::optional<int> SymbolTable::decode_id(const Eigen::VectorXd& v, double tol) const {
    if (tol < 0) throw Error("decode tolerance must be non-negative");
    if (v.size() != dim_) throw DimensionError("decode: vector dimension mismatch");
    std::optional<int> hit;
    for (int i = 0; i < size(); ++i) {
        if ((symbols_[i].code - v).norm() <= tol) {
            if (hit)
                throw AmbiguousSymbolError("decode: '" + symbols_[*hit].name + "' and '" +
                                           symbols_[i].name + "' are both within tolerance");
            hit = i;
        }
    }
    return hit;
}

std::optional<std::string> SymbolTable::decode(const Eigen::VectorXd& v, double tol) const {
    if (auto i = decode_id(v, tol)) return symbols_[*i].name;
    return std::nullopt;
}

std::vector<int> SymbolTable::terminal_ids() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (symbols_[i].kind == SymbolKind::terminal) out.push_back(i);
    return out;
}

std::vector<int> SymbolTable::nonterminal_ids() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (symbols_[i].kind == SymbolKind::nonterminal) out.push_back(i);
    return out;
}

double SymbolTable::min_pairwise_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i)
        for (int j = i + 1; j < size(); ++j)
            best = std::min(best, (symbols_[i].code - symbols_[j].code).norm());
    return best;
}

Sequence SymbolTable::encode_word(const Word& word) const {
    Sequence seq(static_cast<Eigen::Index>(word.size()), dim_);
    for (std::size_t t = 0; t < word.size(); ++t) seq.row(static_cast<Eigen::Index>(t)) = code(word[t]).transpose();
    return seq;
}

Word SymbolTable::ids(const std::vector<std::string>& names) const {
    Word w;
    w.reserve(names.size());
    for (const auto& n : names) w.push_back(id(n));
    return w;
}

namespace {

json entries(const std::vector<Symbol>& symbols, SymbolKind kind) {
    json arr = json::array();
    for (const auto& s : symbols) {
        if (s.kind != kind) continue;
        arr.push_back({{"name", s.name}, {"code", vector_to_json(s.code)}});
    }
    return arr;
}

}  // namespace

json SymbolTable::to_json() const {
    // Registration order is preserved through the "order" list so ids survive a round trip.
    json order = json::array();
    for (const auto& s : symbols_) order.push_back(s.name);
    return {{"terminals", entries(symbols_, SymbolKind::terminal)},
            {"nonterminals", entries(symbols_, SymbolKind::nonterminal)},
            {"n", dim_},
            {"order", order}};
}

SymbolTable SymbolTable::from_json(const json& j) {
    SymbolTable table(j.at("n").get<int>());
    std::vector<std::pair<std::string, std::pair<SymbolKind, Eigen::VectorXd>>> all;
    for (const auto& e : j.at("terminals"))
        all.push_back({e.at("name"), {SymbolKind::terminal, vector_from_json(e.at("code"))}});
    for (const auto& e : j.at("nonterminals"))
        all.push_back({e.at("name"), {SymbolKind::nonterminal, vector_from_json(e.at("code"))}});
    auto add_entry = [&](const std::string& name, SymbolKind kind, const Eigen::VectorXd& code) {
        if (kind == SymbolKind::terminal)
            table.add_terminal(name, code);
        else
            table.add_nonterminal(name, code);
    };
    if (j.contains("order")) {
        for (const auto& name : j.at("order")) {
            auto it = std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.first == name; });
            if (it == all.end()) throw Error("symbol table order lists unknown symbol");
            add_entry(it->first, it->second.first, it->second.second);
        }
    } else {
        for (const auto& [name, entry] : all) add_entry(name, entry.first, entry.second);
    }
    return table;
}

}  // namespace rsm
