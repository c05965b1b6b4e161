#pragma once

// Brute-force membership for small context-free grammars: the set of derivable words up to a
// length bound, computed as a least fixpoint over length buckets. Independent of the LR(1)
// machinery it checks.

#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Word = std::vector<std::string>;

struct Cfg {
    std::string start;
    /// Symbols with an entry are nonterminals.
    std::map<std::string, std::vector<Word>> rules;
};

class Language {
public:
    Language(const Cfg& g, int max_len) : max_len_(max_len) {
        for (const auto& [nt, _] : g.rules) lang_[nt].assign(static_cast<std::size_t>(max_len + 1), {});
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [nt, rhss] : g.rules)
                for (const auto& rhs : rhss)
                    for (auto& w : expand(g, rhs))
                        changed |= lang_[nt][w.size()].insert(std::move(w)).second;
        }
        for (const auto& bucket : lang_[g.start])
            for (const auto& w : bucket) words_.insert(w);
    }

    bool contains(const Word& w) const { return words_.count(w) > 0; }
    const std::set<Word>& words() const { return words_; }
    int max_len() const { return max_len_; }

private:
    // All words derivable from `rhs` using the current approximation, within the bound.
    std::vector<Word> expand(const Cfg& g, const Word& rhs) const {
        std::vector<Word> partial{Word{}};
        for (const auto& sym : rhs) {
            std::vector<Word> next;
            auto it = g.rules.find(sym);
            for (const auto& p : partial) {
                if (it == g.rules.end()) {
                    if (static_cast<int>(p.size()) + 1 > max_len_) continue;
                    Word w = p;
                    w.push_back(sym);
                    next.push_back(std::move(w));
                    continue;
                }
                const auto& buckets = lang_.at(sym);
                for (std::size_t len = 0; len + p.size() <= static_cast<std::size_t>(max_len_); ++len)
                    for (const auto& s : buckets[len]) {
                        Word w = p;
                        w.insert(w.end(), s.begin(), s.end());
                        next.push_back(std::move(w));
                    }
            }
            partial = std::move(next);
        }
        return partial;
    }

    int max_len_;
    std::map<std::string, std::vector<std::set<Word>>> lang_;
    std::set<Word> words_;
};

inline Cfg anbn_cfg() { return {"S", {{"S", {{"a", "b"}, {"a", "S", "b"}}}}}; }

inline Cfg palindrome_cfg() { return {"S", {{"S", {{"$"}, {"a", "S", "a"}, {"b", "S", "b"}}}}}; }

/// Nonempty balanced words: P is a nonempty sequence of bracketed blocks.
inline Cfg dyck_cfg(int kinds) {
    static const std::vector<std::pair<std::string, std::string>> pairs = {{"(", ")"}, {"[", "]"}, {"{", "}"}};
    Cfg g{"P", {}};
    auto& b = g.rules["B"];
    for (int k = 0; k < kinds; ++k) {
        b.push_back({pairs[k].first, pairs[k].second});
        b.push_back({pairs[k].first, "P", pairs[k].second});
    }
    g.rules["P"] = {{"B"}, {"B", "P"}};
    return g;
}

inline Cfg json_cfg() {
    Cfg g{"V", {}};
    g.rules["V"] = {{"{", "O", "}"}, {"[", "A", "]"}, {"{", "}"}, {"[", "]"}, {"n"}, {"s"}};
    g.rules["O"] = {{"k", ":", "V"}, {"k", ":", "V", ",", "O"}};
    g.rules["A"] = {{"V"}, {"V", ",", "A"}};
    return g;
}

/// Words over {0, 1} with an odd number of ones.
inline Cfg latch_cfg() {
    Cfg g{"Odd", {}};
    g.rules["Odd"] = {{"0", "Odd"}, {"1", "Even"}};
    g.rules["Even"] = {{"0", "Even"}, {"1", "Odd"}, {}};
    return g;
}

}  // namespace oracle
