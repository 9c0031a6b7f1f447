#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fractop {

// Symbols are 1-based map indices, matching the on-disk JSON format.
using Symbol = int;
using FiniteWord = std::vector<Symbol>;

std::string word_str(const FiniteWord& w);

// Eventually periodic infinite word pre . per^inf in normal form:
// the period is primitive and the preperiod is minimal (its last symbol
// differs from the last symbol of the period). Normal form makes equality
// of infinite words plain field equality.
struct EvPeriodicWord {
    FiniteWord pre;
    FiniteWord per; // never empty

    // "no divergence position": returned by common_prefix_length for equal words.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    static EvPeriodicWord make(FiniteWord pre, FiniteWord per);
    static EvPeriodicWord constant(Symbol s) { return make({}, {s}); }

    Symbol at(std::size_t k) const {
        return k < pre.size() ? pre[k] : per[(k - pre.size()) % per.size()];
    }

    // Number of distinct suffix phases: positions 0..phase_count()-1 reach
    // every suffix of the word.
    std::size_t phase_count() const { return pre.size() + per.size(); }

    // Canonical phase index of position k (suffixes at equal phase are equal).
    std::size_t phase(std::size_t k) const {
        return k < pre.size() ? k : pre.size() + (k - pre.size()) % per.size();
    }

    FiniteWord prefix(std::size_t n) const;
    EvPeriodicWord suffix(std::size_t n) const; // sigma^n
    EvPeriodicWord with_prefix(const FiniteWord& head) const;

    bool operator==(const EvPeriodicWord& o) const { return pre == o.pre && per == o.per; }
    bool operator!=(const EvPeriodicWord& o) const { return !(*this == o); }

    std::string str() const; // e.g. "1(3)" for 1 3 3 3 ...
};

// Strict lexicographic order on the infinite expansions.
bool lex_less(const EvPeriodicWord& a, const EvPeriodicWord& b);

// Length of the longest common prefix of the infinite expansions;
// returns npos when the words are equal.
std::size_t common_prefix_length(const EvPeriodicWord& a, const EvPeriodicWord& b);

// Longest k such that b's expansion starts with a's first k symbols and ... :
// common prefix of a finite word with an infinite one (at most a.size()).
std::size_t common_prefix_length(const FiniteWord& a, const EvPeriodicWord& b);

struct EvPeriodicWordHash {
    std::size_t operator()(const EvPeriodicWord& w) const;
};

} // namespace fractop
