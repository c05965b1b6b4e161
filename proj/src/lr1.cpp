#include "rsm/lr1.hpp"

#include <algorithm>
#include <cctype>

#include "rsm/errors.hpp"

namespace rsm::lr1 {

void Automaton::validate() const {
    auto check_id = [&](int id, const char* what) {
        if (id < 0 || id >= table.size())
            throw ConfigurationError(std::string("automaton: ") + what + " refers to an unregistered symbol");
    };
    for (const auto& r : rules) {
        for (int s : r.suffix) check_id(s, "rule suffix");
        if (r.lookahead) {
            check_id(*r.lookahead, "rule lookahead");
            if (!table.is_terminal(*r.lookahead))
                throw ConfigurationError("automaton: lookahead '" + table.name(*r.lookahead) + "' is not a terminal");
        }
        check_id(r.push, "rule push");
        if (table.is_terminal(r.push))
            throw ConfigurationError("automaton: rule pushes terminal '" + table.name(r.push) + "'");
        if (r.pop_count < 0) throw ConfigurationError("automaton: negative pop count");
    }
    for (int a : accepting) {
        check_id(a, "accepting set");
        if (table.is_terminal(a))
            throw ConfigurationError("automaton: accepting symbol '" + table.name(a) + "' is not a nonterminal");
    }
}

bool Automaton::is_accepting(int symbol) const {
    return std::find(accepting.begin(), accepting.end(), symbol) != accepting.end();
}

Word tokenize(const SymbolTable& table, std::string_view text) {
    Word out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[pos]))) {
            ++pos;
            continue;
        }
        int best = -1;
        std::size_t best_len = 0;
        for (int i = 0; i < table.size(); ++i) {
            const auto& name = table.name(i);
            if (name.size() > best_len && text.substr(pos, name.size()) == name) {
                best = i;
                best_len = name.size();
            }
        }
        if (best < 0) throw UnknownSymbolError("cannot tokenize '" + std::string(text.substr(pos)) + "'");
        out.push_back(best);
        pos += best_len;
    }
    return out;
}

namespace {

Word suffix_from_json(const SymbolTable& table, const json& j) {
    if (j.is_string()) return tokenize(table, j.get<std::string>());
    Word w;
    for (const auto& e : j) w.push_back(table.id(e.get<std::string>()));
    return w;
}

}  // namespace

Automaton Automaton::from_json(const json& j) {
    const auto terminals = j.at("terminals").get<std::vector<std::string>>();
    const auto nonterminals = j.at("nonterminals").get<std::vector<std::string>>();
    Automaton a{SymbolTable::one_hot(terminals, nonterminals), {}, {}};
    for (const auto& r : j.at("rules")) {
        if (!r.is_array() || r.size() != 4) throw ConfigurationError("automaton: each rule needs 4 entries");
        Rule rule;
        rule.suffix = suffix_from_json(a.table, r[0]);
        const auto look = r[1].get<std::string>();
        if (!look.empty()) rule.lookahead = a.table.id(look);
        rule.pop_count = r[2].get<int>();
        rule.push = a.table.id(r[3].get<std::string>());
        a.rules.push_back(std::move(rule));
    }
    for (const auto& name : j.at("accepting")) a.accepting.push_back(a.table.id(name.get<std::string>()));
    a.validate();
    return a;
}

json Automaton::to_json() const {
    std::vector<std::string> terminals, nonterminals;
    for (int i : table.terminal_ids()) terminals.push_back(table.name(i));
    for (int i : table.nonterminal_ids()) nonterminals.push_back(table.name(i));
    json rules_json = json::array();
    for (const auto& r : rules) {
        json suffix = json::array();
        for (int s : r.suffix) suffix.push_back(table.name(s));
        rules_json.push_back({suffix, r.lookahead ? table.name(*r.lookahead) : "", r.pop_count, table.name(r.push)});
    }
    json acc = json::array();
    for (int a : accepting) acc.push_back(table.name(a));
    return {{"terminals", terminals}, {"nonterminals", nonterminals}, {"rules", rules_json}, {"accepting", acc}};
}

std::string render(const SymbolTable& table, std::span<const int> symbols, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i > 0) out += sep;
        out += symbols[i] == kEndMarker ? std::string("#") : table.name(symbols[i]);
    }
    return out;
}

const Rule* match_rule(std::span<const int> stack, int y, std::span<const Rule> rules) {
    for (const auto& r : rules) {
        if (r.lookahead && *r.lookahead != y) continue;
        if (r.suffix.size() > stack.size()) continue;
        if (std::equal(r.suffix.rbegin(), r.suffix.rend(), stack.rbegin())) return &r;
    }
    return nullptr;
}

namespace {

// Shared loop. `trace` may be null.
bool run_parse(const Automaton& a, std::span<const int> word, ParseTrace* trace) {
    Stack stack;
    for (std::size_t t = 0; t <= word.size(); ++t) {
        const int y = t < word.size() ? word[t] : kEndMarker;
        if (y != kEndMarker && !a.table.is_terminal(y))
            throw ConfigurationError("parse: input symbol '" + a.table.name(y) + "' is not a terminal");
        ParseStep step;
        step.letter = y;
        int reductions = 0;
        while (const Rule* r = match_rule(stack, y, a.rules)) {
            if (r->pop_count > static_cast<int>(stack.size()))
                throw ConfigurationError("parse: rule pops " + std::to_string(r->pop_count) +
                                         " symbols from a stack of height " + std::to_string(stack.size()));
            if (++reductions > kMaxReductionsPerStep) throw RunawayLoopError("parse: reduction loop does not terminate");
            stack.resize(stack.size() - static_cast<std::size_t>(r->pop_count));
            stack.push_back(r->push);
            if (trace) step.actions.push_back({r->pop_count, r->push});
        }
        if (trace) {
            step.actions.push_back({0, kNoPush});
            step.stack_at_output = stack;
            step.output = stack.size() == 1 && a.is_accepting(stack[0]);
        }
        stack.push_back(y);
        if (trace) {
            step.stack_after = stack;
            trace->steps.push_back(std::move(step));
        }
    }
    const bool accept = stack.size() == 2 && a.is_accepting(stack[0]);
    if (trace) trace->accept = accept;
    return accept;
}

}  // namespace

bool parse(const Automaton& automaton, std::span<const int> word) { return run_parse(automaton, word, nullptr); }

ParseTrace parse_with_trace(const Automaton& automaton, std::span<const int> word) {
    ParseTrace trace;
    trace.steps.reserve(word.size() + 1);
    run_parse(automaton, word, &trace);
    return trace;
}

std::vector<Stack> replay(const ParseTrace& trace) {
    std::vector<Stack> out;
    Stack stack;
    for (const auto& step : trace.steps) {
        for (const auto& act : step.actions) {
            if (act.pop_count > static_cast<int>(stack.size())) throw PopUnderflowError("replay: pop underflow");
            stack.resize(stack.size() - static_cast<std::size_t>(act.pop_count));
            if (act.push != kNoPush) stack.push_back(act.push);
        }
        if (step.shift) stack.push_back(step.letter);
        out.push_back(stack);
    }
    return out;
}

namespace {

Automaton build(const std::vector<std::string>& terminals, const std::vector<std::string>& nonterminals,
                const std::vector<std::tuple<std::vector<std::string>, std::string, int, std::string>>& rules,
                const std::vector<std::string>& accepting) {
    Automaton a{SymbolTable::one_hot(terminals, nonterminals), {}, {}};
    for (const auto& [suffix, look, pops, push] : rules) {
        Rule r;
        r.suffix = a.table.ids(suffix);
        if (!look.empty()) r.lookahead = a.table.id(look);
        r.pop_count = pops;
        r.push = a.table.id(push);
        a.rules.push_back(std::move(r));
    }
    a.accepting = a.table.ids(accepting);
    a.validate();
    return a;
}

}  // namespace

Automaton anbn_automaton() {
    return build({"a", "b"}, {"S"}, {{{"a", "S", "b"}, "", 3, "S"}, {{"a"}, "b", 0, "S"}}, {"S"});
}

Automaton palindrome_automaton() {
    return build({"a", "b", "$"}, {"S"},
                 {{{"$"}, "", 1, "S"}, {{"a", "S", "a"}, "", 3, "S"}, {{"b", "S", "b"}, "", 3, "S"}}, {"S"});
}

Automaton dyck_automaton(int kinds) {
    static const std::vector<std::pair<std::string, std::string>> brackets = {{"(", ")"}, {"[", "]"}, {"{", "}"}};
    if (kinds < 1 || kinds > 3) throw ConfigurationError("dyck_automaton: kinds must be 1, 2 or 3");
    std::vector<std::string> terminals;
    for (int k = 0; k < kinds; ++k) {
        terminals.push_back(brackets[k].first);
        terminals.push_back(brackets[k].second);
    }
    std::vector<std::tuple<std::vector<std::string>, std::string, int, std::string>> rules;
    rules.push_back({{"S", "S"}, "", 2, "S"});
    for (int k = 0; k < kinds; ++k) rules.push_back({{brackets[k].first, "S", brackets[k].second}, "", 3, "S"});
    for (int k = 0; k < kinds; ++k) rules.push_back({{brackets[k].first}, brackets[k].second, 0, "S"});
    return build(terminals, {"S"}, rules, {"S"});
}

Automaton json_automaton() {
    return build({"{", "}", "[", "]", "n", "s", "k", ":", ","}, {"V", "O", "A"},
                 {{{"{", "}"}, "", 2, "V"},
                  {{"[", "]"}, "", 2, "V"},
                  {{"{", "O", "}"}, "", 3, "V"},
                  {{"[", "A", "]"}, "", 3, "V"},
                  {{"n"}, "", 1, "V"},
                  {{"s"}, "", 1, "V"},
                  {{"k", ":", "V", ",", "O"}, "", 5, "O"},
                  {{"k", ":", "V"}, "}", 3, "O"},
                  {{"V", ",", "A"}, "", 3, "A"},
                  {{"V"}, "]", 1, "A"}},
                 {"V"});
}

Automaton latch_automaton() {
    return build({"0", "1"}, {"S", "A"},
                 {{{"S", "0"}, "", 2, "S"},
                  {{"S", "1"}, "", 2, "A"},
                  {{"A", "0"}, "", 2, "A"},
                  {{"A", "1"}, "", 2, "S"},
                  {{"0"}, "", 1, "A"},
                  {{"1"}, "", 1, "S"}},
                 {"S"});
}

Automaton automaton_by_name(const std::string& name) {
    if (name == "anbn") return anbn_automaton();
    if (name == "palindrome") return palindrome_automaton();
    if (name == "dyck1") return dyck_automaton(1);
    if (name == "dyck2") return dyck_automaton(2);
    if (name == "dyck3") return dyck_automaton(3);
    if (name == "json") return json_automaton();
    if (name == "latch") return latch_automaton();
    throw ConfigurationError("unknown language '" + name + "'");
}

}  // namespace rsm::lr1
