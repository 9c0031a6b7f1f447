#include "fractop/automaton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace fractop {

namespace {

// Net of level-`extra` cylinder anchors used by the geometric guards below.
std::vector<Vec2> anchor_net(const IfsSpec& spec, int extra) {
    std::vector<Vec2> pts{spec.anchor()};
    for (int d = 0; d < extra; ++d) {
        std::vector<Vec2> next;
        next.reserve(pts.size() * static_cast<std::size_t>(spec.size()));
        for (Symbol i = 1; i <= spec.size(); ++i)
            for (const Vec2& p : pts) next.push_back(spec.map(i).apply(p));
        pts.swap(next);
    }
    return pts;
}

int net_depth_for(const IfsSpec& spec, int budget) {
    int extra = 1;
    double count = spec.size();
    while (extra < 16 && count * spec.size() <= budget) { // cap guards N = 1
        count *= spec.size();
        ++extra;
    }
    return extra;
}

// Squared distance between two clouds, with an early exit once the distance
// is provably below `threshold` (only the comparison against it matters).
double cloud_gap_sq(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double threshold_sq) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& p : a) {
        for (const Vec2& q : b) {
            double dx = p.x - q.x, dy = p.y - q.y;
            double d2 = dx * dx + dy * dy;
            if (d2 < best) {
                best = d2;
                if (best <= threshold_sq) return best;
            }
        }
    }
    return best;
}

} // namespace

int TopologyAutomaton::run(const FiniteWord& I, const FiniteWord& J) const {
    if (I.size() != J.size())
        throw Error(Errc::DomainError, "automaton run requires equal-length words");
    int s = kId;
    for (std::size_t k = 0; k < I.size() && s != kExit; ++k) s = step(s, I[k], J[k]);
    return s;
}

TopologyAutomaton build_automaton(const IfsSpec& spec, const PostCriticalData& pcd) {
    const int n = spec.size();

    // Ordered letter -> declared coincidence (u class, v class). A letter that
    // receives two distinct coincidences would make the cylinders meet in two
    // post-critical points at once, which the single-intersection requirement
    // forbids.
    std::vector<std::pair<int, int>> table(static_cast<std::size_t>(n) * n, {-1, -1});
    auto put = [&](Symbol a, Symbol b, std::pair<int, int> val) {
        auto& slot = table[static_cast<std::size_t>((a - 1) * n + (b - 1))];
        if (slot.first >= 0 && slot != val)
            throw Error(Errc::SicViolation,
                        "maps (" + std::to_string(a) + "," + std::to_string(b) +
                            ") carry two distinct coincidence points");
        slot = val;
    };
    for (const auto& id : spec.identifications) {
        int uc = pcd.class_of(id.u);
        int vc = pcd.class_of(id.v);
        if (uc < 0 || vc < 0)
            throw Error(Errc::Internal, "identification tail missing from the closure");
        put(id.i, id.j, {uc, vc});
        put(id.j, id.i, {vc, uc});
    }

    // Geometric guard: any pair of first-level cylinders that comes closer than
    // the net resolution must be covered by a declared identification.
    {
        const int extra = net_depth_for(spec, 300);
        std::vector<Vec2> net = anchor_net(spec, extra);
        const double mesh_unit = std::pow(spec.max_ratio(), extra) * spec.diam_bound();
        for (Symbol i = 1; i <= n; ++i) {
            std::vector<Vec2> ci;
            ci.reserve(net.size());
            for (const Vec2& p : net) ci.push_back(spec.map(i).apply(p));
            for (Symbol j = static_cast<Symbol>(i + 1); j <= n; ++j) {
                if (table[static_cast<std::size_t>((i - 1) * n + (j - 1))].first >= 0) continue;
                std::vector<Vec2> cj;
                cj.reserve(net.size());
                for (const Vec2& p : net) cj.push_back(spec.map(j).apply(p));
                const double corr = (spec.ratio(i) + spec.ratio(j)) * mesh_unit;
                double gap2 = cloud_gap_sq(ci, cj, corr * corr);
                if (gap2 <= corr * corr)
                    throw Error(Errc::MissingIdentification,
                                "cylinders " + std::to_string(i) + " and " + std::to_string(j) +
                                    " touch but declare no common point");
            }
        }
    }

    TopologyAutomaton aut;
    aut.alphabet = n;
    aut.states.push_back({AutomatonState::Kind::Id, -1, -1, "Id"});
    aut.states.push_back({AutomatonState::Kind::Exit, -1, -1, "Exit"});

    std::map<std::pair<int, int>, int> index;
    auto pair_state = [&](int uc, int vc) {
        auto it = index.find({uc, vc});
        if (it != index.end()) return it->second;
        int idx = static_cast<int>(aut.states.size());
        index.emplace(std::make_pair(uc, vc), idx);
        AutomatonState st;
        st.kind = AutomatonState::Kind::Pair;
        st.u_cls = uc;
        st.v_cls = vc;
        st.label = "S(" + pcd.points[static_cast<std::size_t>(uc)].codings.front().str() + "," +
                   pcd.points[static_cast<std::size_t>(vc)].codings.front().str() + ")";
        aut.states.push_back(st);
        return idx;
    };

    // Expand states in discovery order; the delta rows grow in lockstep.
    for (std::size_t s = 0; s < aut.states.size(); ++s) {
        aut.delta.resize(aut.states.size());
        auto& row = aut.delta[s];
        row.assign(static_cast<std::size_t>(n) * n, TopologyAutomaton::kExit);
        const AutomatonState st = aut.states[s]; // copy: states may reallocate below
        for (Symbol i = 1; i <= n; ++i) {
            for (Symbol j = 1; j <= n; ++j) {
                int& cell = row[static_cast<std::size_t>((i - 1) * n + (j - 1))];
                switch (st.kind) {
                case AutomatonState::Kind::Id: {
                    if (i == j) {
                        cell = TopologyAutomaton::kId;
                    } else {
                        auto e = table[static_cast<std::size_t>((i - 1) * n + (j - 1))];
                        cell = e.first >= 0 ? pair_state(e.first, e.second)
                                            : TopologyAutomaton::kExit;
                    }
                    break;
                }
                case AutomatonState::Kind::Exit:
                    cell = TopologyAutomaton::kExit;
                    break;
                case AutomatonState::Kind::Pair: {
                    // The common point persists only if the x side refines with
                    // i toward v and the y side refines with j toward u.
                    if (pcd.has_coding_starting_with(st.v_cls, i) &&
                        pcd.has_coding_starting_with(st.u_cls, j)) {
                        int v2 = pcd.shift_class(st.v_cls, i);
                        int u2 = pcd.shift_class(st.u_cls, j);
                        if (v2 < 0 || u2 < 0)
                            throw Error(Errc::Internal, "shift escaped the point classes");
                        cell = pair_state(u2, v2);
                    }
                    break;
                }
                }
            }
        }
        aut.delta.resize(aut.states.size()); // cover states added while filling this row
    }
    // Rows for states discovered by the very last expansion.
    for (std::size_t s = 0; s < aut.states.size(); ++s) {
        if (!aut.delta[s].empty()) continue;
        throw Error(Errc::Internal, "automaton expansion left an unfilled row");
    }
    return aut;
}

SurvivingTime surviving_time(const TopologyAutomaton& aut, const EvPeriodicWord& x,
                             const EvPeriodicWord& y) {
    std::set<std::tuple<int, std::size_t, std::size_t>> seen;
    int s = TopologyAutomaton::kId;
    std::size_t k = 0;
    while (true) {
        if (s == TopologyAutomaton::kExit) return {true, k};
        if (!seen.emplace(s, x.phase(k), y.phase(k)).second) return {false, 0};
        s = aut.step(s, x.at(k), y.at(k));
        ++k;
    }
}

LemmaCheck check_surviving_time_lemma(const IfsSpec& spec, const PostCriticalData& pcd,
                                      const TopologyAutomaton& aut, const EvPeriodicWord& x,
                                      const EvPeriodicWord& y, int depth) {
    (void)pcd;
    LemmaCheck out;
    out.automaton_time = surviving_time(aut, x, y);

    const int extra = net_depth_for(spec, 300);
    const std::vector<Vec2> net = anchor_net(spec, extra);
    const double mesh_unit = std::pow(spec.max_ratio(), extra) * spec.diam_bound();

    out.geometric_time = -1;
    for (int nlev = 1; nlev <= depth; ++nlev) {
        Similitude fx = spec.word_map(x.prefix(static_cast<std::size_t>(nlev)));
        Similitude fy = spec.word_map(y.prefix(static_cast<std::size_t>(nlev)));
        std::vector<Vec2> cx, cy;
        cx.reserve(net.size());
        cy.reserve(net.size());
        for (const Vec2& p : net) cx.push_back(fx.apply(p));
        for (const Vec2& p : net) cy.push_back(fy.apply(p));
        const double corr = (fx.ratio + fy.ratio) * mesh_unit;
        double gap2 = cloud_gap_sq(cx, cy, corr * corr);
        if (gap2 > corr * corr) {
            out.geometric_time = nlev;
            break;
        }
    }

    const bool automaton_within =
        out.automaton_time.finite && out.automaton_time.value <= static_cast<std::size_t>(depth);
    out.ok = automaton_within ? out.geometric_time == static_cast<int>(out.automaton_time.value)
                              : out.geometric_time == -1;

    std::ostringstream os;
    os << "T(" << x.str() << "," << y.str() << ") = ";
    if (out.automaton_time.finite)
        os << out.automaton_time.value;
    else
        os << "inf";
    os << ", first separated level up to depth " << depth << ": ";
    if (out.geometric_time > 0)
        os << out.geometric_time;
    else
        os << "none";
    out.detail = os.str();
    return out;
}

std::string TopologyAutomaton::dot() const {
    std::ostringstream os;
    os << "digraph topology_automaton {\n";
    os << "  rankdir=LR;\n";
    os << "  node [fontname=\"Helvetica\"];\n";
    os << "  0 [label=\"Id\", shape=doublecircle];\n";
    os << "  1 [label=\"Exit\", shape=box];\n";
    for (std::size_t s = 2; s < states.size(); ++s)
        os << "  " << s << " [label=\"" << states[s].label << "\", shape=ellipse];\n";
    for (std::size_t s = 0; s < states.size(); ++s) {
        if (states[s].kind == AutomatonState::Kind::Exit) continue; // absorbing
        std::map<int, std::vector<std::string>> grouped;
        for (Symbol i = 1; i <= alphabet; ++i)
            for (Symbol j = 1; j <= alphabet; ++j)
                grouped[step(static_cast<int>(s), i, j)].push_back(
                    std::to_string(i) + "," + std::to_string(j));
        for (const auto& [target, letters] : grouped) {
            std::string label;
            if (target == kExit && letters.size() > 4) {
                label = "else";
            } else {
                for (std::size_t k = 0; k < letters.size(); ++k) {
                    if (k) label += "  ";
                    label += "(" + letters[k] + ")";
                }
            }
            os << "  " << s << " -> " << target << " [label=\"" << label << "\"];\n";
        }
    }
    os << "}\n";
    return os.str();
}

std::optional<std::vector<int>> automata_isomorphic(const TopologyAutomaton& a,
                                                    const TopologyAutomaton& b) {
    if (a.alphabet != b.alphabet) return std::nullopt;
    if (a.states.size() != b.states.size()) return std::nullopt;
    const int n = a.alphabet;

    std::vector<int> a2b(a.states.size(), -1), b2a(b.states.size(), -1);
    std::deque<std::pair<int, int>> queue;
    auto bind = [&](int sa, int sb) -> int { // 0 clash, 1 known, 2 fresh
        if (a.states[static_cast<std::size_t>(sa)].kind !=
            b.states[static_cast<std::size_t>(sb)].kind)
            return 0;
        int& fwd = a2b[static_cast<std::size_t>(sa)];
        int& rev = b2a[static_cast<std::size_t>(sb)];
        if (fwd == -1 && rev == -1) {
            fwd = sb;
            rev = sa;
            return 2;
        }
        return fwd == sb && rev == sa ? 1 : 0;
    };
    if (bind(TopologyAutomaton::kId, TopologyAutomaton::kId) != 2) return std::nullopt;
    if (bind(TopologyAutomaton::kExit, TopologyAutomaton::kExit) != 2) return std::nullopt;
    queue.push_back({TopologyAutomaton::kId, TopologyAutomaton::kId});
    queue.push_back({TopologyAutomaton::kExit, TopologyAutomaton::kExit});

    while (!queue.empty()) {
        auto [sa, sb] = queue.front();
        queue.pop_front();
        for (Symbol i = 1; i <= n; ++i) {
            for (Symbol j = 1; j <= n; ++j) {
                int ta = a.step(sa, i, j);
                int tb = b.step(sb, i, j);
                int r = bind(ta, tb);
                if (r == 0) return std::nullopt;
                if (r == 2) queue.push_back({ta, tb});
            }
        }
    }
    // Every stored state is reachable, so the sweep must have paired them all.
    for (int m : a2b)
        if (m < 0) return std::nullopt;
    for (int m : b2a)
        if (m < 0) return std::nullopt;
    return a2b;
}

const char* verdict_name(EquivalenceVerdict v) {
    switch (v) {
    case EquivalenceVerdict::NotComparable: return "not-comparable";
    case EquivalenceVerdict::Homeomorphic: return "homeomorphic";
    case EquivalenceVerdict::Hoelder: return "hoelder";
    case EquivalenceVerdict::Quasisymmetric: return "quasisymmetric";
    case EquivalenceVerdict::Lipschitz: return "lipschitz";
    }
    return "unknown";
}

Classification classify_equivalence(const IfsSpec& f, const IfsSpec& g) {
    Classification out;
    if (f.size() != g.size()) {
        out.detail = "different numbers of maps";
        return out;
    }

    PostCriticalData pf = compute_post_critical(f);
    PostCriticalData pg = compute_post_critical(g);
    TopologyAutomaton af = build_automaton(f, pf);
    TopologyAutomaton ag = build_automaton(g, pg);

    auto iso = automata_isomorphic(af, ag);
    if (!iso) {
        out.detail = "pair automata are not isomorphic";
        return out;
    }
    out.isomorphic = true;
    out.state_map = *iso;
    out.verdict = EquivalenceVerdict::Homeomorphic;

    SeparationReport rf = verify_sic_asc(f, pf);
    SeparationReport rg = verify_sic_asc(g, pg);
    out.asc_first = rf.asc_ok;
    out.asc_second = rg.asc_ok;

    const double tol = 1e-9;
    bool same_ratios = true;
    for (Symbol i = 1; i <= f.size(); ++i)
        same_ratios = same_ratios && std::abs(f.ratio(i) - g.ratio(i)) <= tol;
    if (same_ratios) {
        out.verdict = EquivalenceVerdict::Lipschitz;
        out.qs_exponent = 1.0;
        out.detail = "identical contraction ratios under the matched labels";
        return out;
    }

    const bool asc_both = rf.asc_ok && rg.asc_ok;
    if (asc_both && pf.boundary_symbols == pg.boundary_symbols && !pf.boundary_symbols.empty()) {
        // Power law r'_i = r_i^s across the boundary symbols.
        double s = 0.0;
        bool consistent = true;
        bool first = true;
        for (Symbol i : pf.boundary_symbols) {
            double si = std::log(g.ratio(i)) / std::log(f.ratio(i));
            if (first) {
                s = si;
                first = false;
            } else if (std::abs(si - s) > tol) {
                consistent = false;
                break;
            }
        }
        if (consistent) {
            out.verdict = EquivalenceVerdict::Quasisymmetric;
            out.qs_exponent = s;
            std::ostringstream os;
            os << "boundary ratios follow the power law with exponent " << s;
            out.detail = os.str();
            return out;
        }
    }

    if (asc_both) {
        out.verdict = EquivalenceVerdict::Hoelder;
        out.detail = "angle separation holds on both sides; ratios do not follow one power law";
    } else {
        out.detail = "angle separation could not be confirmed on both sides";
    }
    return out;
}

} // namespace fractop
