#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fractop/ifs.hpp"

namespace fractop {

// State of the pairwise refinement automaton. Besides the identity and exit
// sinks, a state names an ordered pair (u, v) of post-critical points: after
// reading (x|n, y|n) the cylinders meet in the single point
// f_{x|n}(v) = f_{y|n}(u).
struct AutomatonState {
    enum class Kind { Id, Exit, Pair };
    Kind kind = Kind::Pair;
    int u_cls = -1;
    int v_cls = -1;
    std::string label;
};

struct TopologyAutomaton {
    int alphabet = 0; // number of maps N; letters are ordered pairs (i, j)
    std::vector<AutomatonState> states;          // index 0 = Id, 1 = Exit
    std::vector<std::vector<int>> delta;         // delta[state][(i-1)*N + (j-1)]

    static constexpr int kId = 0;
    static constexpr int kExit = 1;

    int step(int state, Symbol i, Symbol j) const {
        return delta[static_cast<std::size_t>(state)]
                    [static_cast<std::size_t>((i - 1) * alphabet + (j - 1))];
    }

    // Runs the pair word (I, J); both words must have equal length.
    int run(const FiniteWord& I, const FiniteWord& J) const;

    std::string dot() const; // Graphviz rendering with Id/Exit highlighted
};

// Builds the reachable part of the automaton. Throws SicViolation when one
// ordered letter carries two distinct identifications, MissingIdentification
// when a depth-net scan finds touching cylinders with no declared coincidence.
TopologyAutomaton build_automaton(const IfsSpec& spec, const PostCriticalData& pcd);

struct SurvivingTime {
    bool finite = true;
    std::size_t value = 0; // meaningful only when finite
};

// Steps the automaton along (x, y); infinity is detected exactly through
// (state, x phase, y phase) configuration recurrence.
SurvivingTime surviving_time(const TopologyAutomaton& aut, const EvPeriodicWord& x,
                             const EvPeriodicWord& y);

struct LemmaCheck {
    bool ok = false;
    SurvivingTime automaton_time;
    int geometric_time = -1; // -1 encodes "no separation up to the depth"
    std::string detail;
};

// Cross-checks the automaton surviving time against depth-net cylinder
// distances: T(x,y) = n must be the first level with disjoint cylinders.
LemmaCheck check_surviving_time_lemma(const IfsSpec& spec, const PostCriticalData& pcd,
                                      const TopologyAutomaton& aut, const EvPeriodicWord& x,
                                      const EvPeriodicWord& y, int depth);

// Isomorphism over the same letter alphabet, fixing Id and Exit. Returns the
// state bijection A -> B discovered by the joint reachability sweep.
std::optional<std::vector<int>> automata_isomorphic(const TopologyAutomaton& a,
                                                    const TopologyAutomaton& b);

enum class EquivalenceVerdict {
    NotComparable,
    Homeomorphic,
    Hoelder,
    Quasisymmetric,
    Lipschitz,
};

const char* verdict_name(EquivalenceVerdict v);

struct Classification {
    EquivalenceVerdict verdict = EquivalenceVerdict::NotComparable;
    bool isomorphic = false;
    bool asc_first = false;
    bool asc_second = false;
    double qs_exponent = 0.0; // set for Quasisymmetric
    std::vector<int> state_map;
    std::string detail;
};

// Ladder of Thm-style verdicts: automaton isomorphism gates everything, equal
// ratio lists give Lipschitz, a consistent power law on the boundary symbols
// (with angle separation on both sides) gives Quasisymmetric(s), angle
// separation alone gives Hoelder, otherwise plain Homeomorphic.
Classification classify_equivalence(const IfsSpec& f, const IfsSpec& g);

} // namespace fractop
