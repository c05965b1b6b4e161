#pragma once

// LR(1) automata with ordered rule lists, the shift-reduce parsing loop and trace recording
// used to annotate training data.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsm/alphabet.hpp"

namespace rsm::lr1 {

/// Stack symbol pushed after the last input letter. Never part of a SymbolTable.
inline constexpr int kEndMarker = -1;
/// Push value of a step's terminating action.
inline constexpr int kNoPush = -1;

/// (suffix, lookahead, pop count, pushed nonterminal). An empty lookahead matches any letter.
struct Rule {
    std::vector<int> suffix;
    std::optional<int> lookahead;
    int pop_count = 0;
    int push = 0;
};

using Stack = std::vector<int>;

struct Automaton {
    SymbolTable table;
    std::vector<Rule> rules;
    std::vector<int> accepting;

    /// Checks that rules only mention registered symbols, pushes and accepting symbols are
    /// nonterminals and lookaheads are terminals.
    void validate() const;

    bool is_accepting(int symbol) const;

    /// {"terminals": [...], "nonterminals": [...], "rules": [["aSb", "", 3, "S"], ...],
    ///  "accepting": ["S"]}. A suffix is either a string split greedily into registered
    /// names or an array of names. Rule order is matching order.
    static Automaton from_json(const json& j);
    json to_json() const;
};

/// Renders a stack or word with symbol names; the end marker prints as '#'.
std::string render(const SymbolTable& table, std::span<const int> symbols, std::string_view sep = "");

/// Splits a string into registered symbol names, longest match first. Whitespace is skipped.
Word tokenize(const SymbolTable& table, std::string_view text);

/// The first rule whose suffix ends `stack` and whose lookahead is empty or equal to `y`.
const Rule* match_rule(std::span<const int> stack, int y, std::span<const Rule> rules);

struct StackAction {
    int pop_count = 0;
    int push = kNoPush;

    bool is_sentinel() const { return pop_count == 0 && push == kNoPush; }
    friend bool operator==(const StackAction&, const StackAction&) = default;
};

struct ParseStep {
    int letter = kEndMarker;          ///< input symbol of this step (end marker on the last)
    std::vector<StackAction> actions; ///< applied rules followed by exactly one sentinel
    bool shift = true;
    Stack stack_at_output;            ///< after the reductions, before the shift
    Stack stack_after;                ///< after the shift
    bool output = false;              ///< stack_at_output is a single accepting nonterminal
};

struct ParseTrace {
    std::vector<ParseStep> steps;     ///< T + 1 entries
    bool accept = false;
};

inline constexpr int kMaxReductionsPerStep = 100000;

/// Runs the shift-reduce loop; 1 iff the final stack is A# with A accepting.
bool parse(const Automaton& automaton, std::span<const int> word);

ParseTrace parse_with_trace(const Automaton& automaton, std::span<const int> word);

/// Re-applies the actions of a trace to an empty stack, returning the stack after every step.
std::vector<Stack> replay(const ParseTrace& trace);

// Automata of the benchmark languages. Terminals come first in each table, so with one-hot
// codes terminal and nonterminal coordinates are disjoint.
Automaton anbn_automaton();
Automaton palindrome_automaton();
Automaton dyck_automaton(int kinds);
Automaton json_automaton();
/// Odd-parity latch. Includes (1, e, 1, S) on top of the published five rules, which would
/// otherwise reject every word starting with 1.
Automaton latch_automaton();

/// The automaton of a language task by name (anbn, palindrome, dyck1..3, json, latch).
Automaton automaton_by_name(const std::string& name);

}  // namespace rsm::lr1
