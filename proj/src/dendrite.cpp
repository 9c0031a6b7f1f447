#include "fractop/dendrite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "fractop/graph.hpp"

namespace fractop {
namespace {

void for_each_word_of(int nsym, int length, const std::function<void(const FiniteWord&)>& fn) {
    FiniteWord w(static_cast<std::size_t>(length), 1);
    if (length == 0) {
        fn(w);
        return;
    }
    while (true) {
        fn(w);
        int pos = length - 1;
        while (pos >= 0 && w[static_cast<std::size_t>(pos)] == nsym) {
            w[static_cast<std::size_t>(pos)] = 1;
            --pos;
        }
        if (pos < 0) break;
        ++w[static_cast<std::size_t>(pos)];
    }
}

bool starts_with(const EvPeriodicWord& w, const FiniteWord& head) {
    return common_prefix_length(head, w) == head.size();
}

// Point moved into the coordinates of the cylinder `w` that contains it.
EvPeriodicWord shift_point(const IfsSpec& spec, const PostCriticalData& pcd,
                           const EvPeriodicWord& p, const FiniteWord& w) {
    for (const auto& c : coding_class(spec, pcd, p))
        if (starts_with(c, w))
            return lowest_coding(spec, pcd, c.suffix(w.size()));
    throw Error(Errc::Internal,
                "point " + p.str() + " has no coding inside cylinder " + word_str(w));
}

std::vector<int> bfs_path(const std::vector<std::vector<int>>& adj, int s, int t, int skip_u = -1,
                          int skip_v = -1) {
    std::vector<int> parent(adj.size(), -2);
    std::queue<int> q;
    parent[static_cast<std::size_t>(s)] = -1;
    q.push(s);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (u == t) break;
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if ((u == skip_u && v == skip_v) || (u == skip_v && v == skip_u)) continue;
            if (parent[static_cast<std::size_t>(v)] != -2) continue;
            parent[static_cast<std::size_t>(v)] = u;
            q.push(v);
        }
    }
    std::vector<int> path;
    if (parent[static_cast<std::size_t>(t)] == -2) return path;
    for (int v = t; v != -1; v = parent[static_cast<std::size_t>(v)]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

struct Terminal {
    int vertex = -1;
    bool is_point = false;
};

// The incidence-tree vertex a point occupies at the graph's level: the shared
// point itself when its codings split over several cylinders, otherwise the
// one cylinder containing it.
Terminal terminal_of(const IfsSpec& spec, const PostCriticalData& pcd, const IncidenceGraph& g,
                     const EvPeriodicWord& canon) {
    auto cls = coding_class(spec, pcd, canon);
    std::set<FiniteWord> prefixes;
    for (const auto& c : cls) prefixes.insert(c.prefix(static_cast<std::size_t>(g.level)));
    if (prefixes.size() >= 2) {
        int t = g.point_index(canon);
        if (t < 0)
            throw Error(Errc::Internal, "shared point " + canon.str() + " missing at level " +
                                            std::to_string(g.level));
        return {g.cylinder_count() + t, true};
    }
    int c = g.cylinder_index(*prefixes.begin());
    if (c < 0) throw Error(Errc::Internal, "cylinder lookup failed for " + canon.str());
    return {c, false};
}

ArcChain chain_impl(const IfsSpec& spec, const PostCriticalData& pcd, const IncidenceGraph& g,
                    const EvPeriodicWord& a, const EvPeriodicWord& b) {
    ArcChain chain;
    chain.endpoints = {a, b};
    Terminal ta = terminal_of(spec, pcd, g, a);
    Terminal tb = terminal_of(spec, pcd, g, b);
    if (ta.vertex == tb.vertex) {
        if (ta.is_point) throw Error(Errc::Internal, "distinct points share a point vertex");
        chain.cylinders.push_back(g.cylinders[static_cast<std::size_t>(ta.vertex)]);
        return chain;
    }
    std::vector<int> path = bfs_path(g.adj, ta.vertex, tb.vertex);
    if (path.empty())
        throw Error(Errc::NotConnected,
                    "no cylinder path joins " + a.str() + " and " + b.str());
    int ncyl = g.cylinder_count();
    for (std::size_t i = 0; i < path.size(); ++i) {
        int v = path[i];
        if (v < ncyl) {
            chain.cylinders.push_back(g.cylinders[static_cast<std::size_t>(v)]);
        } else if (i > 0 && i + 1 < path.size()) {
            chain.joints.push_back(g.points[static_cast<std::size_t>(v - ncyl)].coding);
        }
    }
    if (chain.cylinders.size() != chain.joints.size() + 1)
        throw Error(Errc::Internal, "block/joint mismatch on the arc " + a.str() + " .. " + b.str());
    return chain;
}

unsigned effective_seed(unsigned seed) { return seed == 0 ? 0x5eedu : seed; }

struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra == rb) return false;
        parent[static_cast<std::size_t>(ra)] = rb;
        return true;
    }
};

std::string vertex_label(const IncidenceGraph& g, int v) {
    if (v < g.cylinder_count()) return word_str(g.cylinders[static_cast<std::size_t>(v)]);
    return g.points[static_cast<std::size_t>(v - g.cylinder_count())].coding.str();
}

} // namespace

int IncidenceGraph::edge_count() const {
    std::size_t e = 0;
    for (const auto& p : points) e += p.cylinders.size();
    return static_cast<int>(e);
}

int IncidenceGraph::cylinder_index(const FiniteWord& w) const {
    auto it = std::lower_bound(cylinders.begin(), cylinders.end(), w);
    if (it == cylinders.end() || *it != w) return -1;
    return static_cast<int>(it - cylinders.begin());
}

int IncidenceGraph::point_index(const EvPeriodicWord& canon) const {
    for (std::size_t t = 0; t < points.size(); ++t)
        if (points[t].coding == canon) return static_cast<int>(t);
    return -1;
}

IncidenceGraph build_incidence(const IfsSpec& spec, const PostCriticalData& pcd, int level) {
    if (level < 1) throw Error(Errc::DomainError, "incidence level must be at least 1");
    double count = std::pow(spec.size(), level);
    if (count > 200000.0)
        throw Error(Errc::DomainError, "incidence level " + std::to_string(level) +
                                           " would enumerate too many cylinders");

    IncidenceGraph g;
    g.level = level;
    for_each_word_of(spec.size(), level, [&](const FiniteWord& w) { g.cylinders.push_back(w); });

    std::map<std::string, IncidenceGraph::TouchPoint> found;
    for (int plen = 0; plen < level; ++plen) {
        for_each_word_of(spec.size(), plen, [&](const FiniteWord& p) {
            for (const auto& crit : pcd.critical) {
                EvPeriodicWord canon =
                    lowest_coding(spec, pcd, crit.codings.front().with_prefix(p));
                std::string key = canon.str();
                if (found.count(key)) continue;
                IncidenceGraph::TouchPoint tp;
                tp.coding = canon;
                std::set<int> cyl;
                for (const auto& c : coding_class(spec, pcd, canon))
                    cyl.insert(g.cylinder_index(c.prefix(static_cast<std::size_t>(level))));
                tp.cylinders.assign(cyl.begin(), cyl.end());
                found.emplace(std::move(key), std::move(tp));
            }
        });
    }
    for (auto& [key, tp] : found) g.points.push_back(std::move(tp));
    std::sort(g.points.begin(), g.points.end(),
              [](const auto& a, const auto& b) { return lex_less(a.coding, b.coding); });

    g.adj.assign(static_cast<std::size_t>(g.cylinder_count()) + g.points.size(), {});
    for (std::size_t t = 0; t < g.points.size(); ++t) {
        int pv = g.cylinder_count() + static_cast<int>(t);
        for (int c : g.points[t].cylinders) {
            g.adj[static_cast<std::size_t>(c)].push_back(pv);
            g.adj[static_cast<std::size_t>(pv)].push_back(c);
        }
    }
    return g;
}

DendriteCertificate certify_dendrite(const IfsSpec& spec, const PostCriticalData& pcd,
                                     int depth) {
    DendriteCertificate cert;
    if (depth < 1) throw Error(Errc::DomainError, "certificate depth must be at least 1");
    for (int k = 1; k <= depth; ++k) {
        IncidenceGraph g = build_incidence(spec, pcd, k);
        Dsu dsu(g.vertex_count());
        for (std::size_t t = 0; t < g.points.size(); ++t) {
            int pv = g.cylinder_count() + static_cast<int>(t);
            for (int c : g.points[t].cylinders) {
                if (dsu.unite(c, pv)) continue;
                // The closing edge of a cycle: report the loop it closes.
                std::vector<int> path = bfs_path(g.adj, c, pv, c, pv);
                std::ostringstream os;
                os << "level " << k << " cycle:";
                for (int v : path) os << ' ' << vertex_label(g, v);
                os << ' ' << vertex_label(g, c);
                cert.ok = false;
                cert.depth_checked = k;
                cert.witness = os.str();
                return cert;
            }
        }
        for (int v = 1; v < g.vertex_count(); ++v) {
            if (dsu.find(v) != dsu.find(0)) {
                cert.ok = false;
                cert.depth_checked = k;
                cert.witness = "level " + std::to_string(k) + ": " + vertex_label(g, v) +
                               " is disconnected from " + vertex_label(g, 0);
                return cert;
            }
        }
    }
    cert.ok = true;
    cert.depth_checked = depth;
    return cert;
}

DendriteCertificate certify_dendrite(const IfsSpec& spec, int depth) {
    PostCriticalData pcd = compute_post_critical(spec);
    return certify_dendrite(spec, pcd, depth);
}

ArcChain arc_chain(const IfsSpec& spec, const PostCriticalData& pcd, const EvPeriodicWord& a,
                   const EvPeriodicWord& b, int level) {
    EvPeriodicWord ca = lowest_coding(spec, pcd, a);
    EvPeriodicWord cb = lowest_coding(spec, pcd, b);
    if (ca == cb) throw Error(Errc::DomainError, "arc endpoints coincide at " + ca.str());
    IncidenceGraph g = build_incidence(spec, pcd, level);
    return chain_impl(spec, pcd, g, ca, cb);
}

namespace {

// Median vertex of three vertices in a tree: walk from c toward a and stop at
// the first vertex lying on the a-b path.
int tree_median_vertex(const std::vector<std::vector<int>>& adj, int a, int b, int c) {
    std::vector<int> ab = bfs_path(adj, a, b);
    std::set<int> on_ab(ab.begin(), ab.end());
    std::vector<int> ca = bfs_path(adj, c, a);
    for (int v : ca)
        if (on_ab.count(v)) return v;
    throw Error(Errc::Internal, "tree median not found");
}

} // namespace

EvPeriodicWord dendrite_median(const IfsSpec& spec, const PostCriticalData& pcd,
                               const EvPeriodicWord& x0, const EvPeriodicWord& y0,
                               const EvPeriodicWord& z0) {
    IncidenceGraph g1 = build_incidence(spec, pcd, 1);
    EvPeriodicWord x = lowest_coding(spec, pcd, x0);
    EvPeriodicWord y = lowest_coding(spec, pcd, y0);
    EvPeriodicWord z = lowest_coding(spec, pcd, z0);

    FiniteWord acc;
    std::map<std::string, std::size_t> seen;
    for (int iter = 0; iter < 4096; ++iter) {
        if (x == y || x == z) return lowest_coding(spec, pcd, x.with_prefix(acc));
        if (y == z) return lowest_coding(spec, pcd, y.with_prefix(acc));

        std::vector<std::string> parts = {x.str(), y.str(), z.str()};
        std::sort(parts.begin(), parts.end());
        std::string key = parts[0] + "|" + parts[1] + "|" + parts[2];
        auto it = seen.find(key);
        if (it != seen.end()) {
            // The descent revisits a configuration: the branch point's coding
            // closes into the period written since the first visit.
            FiniteWord pre(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(it->second));
            FiniteWord per(acc.begin() + static_cast<std::ptrdiff_t>(it->second), acc.end());
            return lowest_coding(spec, pcd, EvPeriodicWord::make(pre, per));
        }
        seen.emplace(std::move(key), acc.size());

        Terminal tx = terminal_of(spec, pcd, g1, x);
        Terminal ty = terminal_of(spec, pcd, g1, y);
        Terminal tz = terminal_of(spec, pcd, g1, z);
        int med = tree_median_vertex(g1.adj, tx.vertex, ty.vertex, tz.vertex);
        if (med >= g1.cylinder_count()) {
            const auto& p = g1.points[static_cast<std::size_t>(med - g1.cylinder_count())];
            return lowest_coding(spec, pcd, p.coding.with_prefix(acc));
        }

        FiniteWord mword = g1.cylinders[static_cast<std::size_t>(med)];
        auto descend = [&](EvPeriodicWord& p, const Terminal& t) {
            for (const auto& c : coding_class(spec, pcd, p)) {
                if (starts_with(c, mword)) {
                    p = lowest_coding(spec, pcd, c.suffix(mword.size()));
                    return;
                }
            }
            // The point sits outside the median cylinder: enter through the
            // gate where its arc reaches the cylinder.
            std::vector<int> path = bfs_path(g1.adj, t.vertex, med);
            if (path.size() < 2) throw Error(Errc::Internal, "gate lookup failed");
            int gate = path[path.size() - 2];
            const auto& gp = g1.points[static_cast<std::size_t>(gate - g1.cylinder_count())];
            p = shift_point(spec, pcd, gp.coding, mword);
        };
        descend(x, tx);
        descend(y, ty);
        descend(z, tz);
        acc.push_back(mword.front());
    }
    throw Error(Errc::Internal, "median descent did not close");
}

namespace {

struct MedianCache {
    const IfsSpec& spec;
    const PostCriticalData& pcd;
    std::map<std::string, EvPeriodicWord> cache;

    const EvPeriodicWord& get(const EvPeriodicWord& a, const EvPeriodicWord& b,
                              const EvPeriodicWord& c) {
        std::vector<std::string> parts = {a.str(), b.str(), c.str()};
        std::sort(parts.begin(), parts.end());
        std::string key = parts[0] + "|" + parts[1] + "|" + parts[2];
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, dendrite_median(spec, pcd, a, b, c)).first;
        return it->second;
    }
};

} // namespace

int PrimaryArcSystem::point_index(const EvPeriodicWord& canon) const {
    for (std::size_t i = 0; i < pstar.size(); ++i)
        if (pstar[i] == canon) return static_cast<int>(i);
    return -1;
}

PrimaryArcSystem build_primary_arc_system(const IfsSpec& spec, const PostCriticalData& pcd) {
    DendriteCertificate cert = certify_dendrite(spec, pcd, 2);
    if (!cert) throw Error(Errc::NotDendrite, cert.witness);
    if (pcd.points.size() < 2)
        throw Error(Errc::DomainError, "the main tree needs at least two boundary points");

    std::vector<EvPeriodicWord> X;
    std::set<std::string> in_x;
    auto add_point = [&](const EvPeriodicWord& w) {
        if (in_x.insert(w.str()).second) {
            X.push_back(w);
            return true;
        }
        return false;
    };
    for (const auto& pc : pcd.points) add_point(pc.codings.front());

    MedianCache medians{spec, pcd, {}};
    IncidenceGraph g1 = build_incidence(spec, pcd, 1);

    auto edge_list = [&]() {
        std::vector<std::pair<int, int>> edges;
        for (std::size_t i = 0; i < X.size(); ++i) {
            for (std::size_t j = i + 1; j < X.size(); ++j) {
                bool between = false;
                for (std::size_t k = 0; k < X.size() && !between; ++k) {
                    if (k == i || k == j) continue;
                    if (medians.get(X[i], X[j], X[k]) == X[k]) between = true;
                }
                if (!between) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
            }
        }
        return edges;
    };

    int rounds = 0;
    bool stable = false;
    while (rounds < 50 && !stable) {
        ++rounds;
        bool changed = false;
        // Close the point set under medians so every branch point is present.
        bool added = true;
        while (added) {
            added = false;
            std::size_t n = X.size();
            for (std::size_t i = 0; i < n && !added; ++i)
                for (std::size_t j = i + 1; j < n && !added; ++j)
                    for (std::size_t k = j + 1; k < n && !added; ++k) {
                        const EvPeriodicWord& med = medians.get(X[i], X[j], X[k]);
                        if (add_point(med)) added = changed = true;
                    }
        }
        // Pull every block of every skeleton arc back through its cylinder.
        for (auto [i, j] : edge_list()) {
            ArcChain chain = chain_impl(spec, pcd, g1, X[static_cast<std::size_t>(i)],
                                        X[static_cast<std::size_t>(j)]);
            EvPeriodicWord entry = chain.endpoints.first;
            for (std::size_t b = 0; b < chain.cylinders.size(); ++b) {
                EvPeriodicWord exit =
                    b + 1 < chain.cylinders.size() ? chain.joints[b] : chain.endpoints.second;
                if (add_point(shift_point(spec, pcd, entry, chain.cylinders[b]))) changed = true;
                if (add_point(shift_point(spec, pcd, exit, chain.cylinders[b]))) changed = true;
                entry = exit;
            }
        }
        stable = !changed;
    }
    if (!stable)
        throw Error(Errc::SystemExtractionFailure,
                    "point set still growing after " + std::to_string(rounds) + " rounds");

    PrimaryArcSystem sys;
    sys.rounds = rounds;
    std::sort(X.begin(), X.end(), [](const auto& a, const auto& b) { return lex_less(a, b); });
    sys.pstar = X;
    for (const auto& w : X)
        if (pcd.class_of(w) < 0) sys.ramification.push_back(w);

    std::vector<std::pair<int, int>> edges = edge_list();
    if (edges.size() + 1 != X.size())
        throw Error(Errc::Internal, "skeleton is not a tree: " + std::to_string(edges.size()) +
                                        " arcs over " + std::to_string(X.size()) + " points");
    sys.adjacency.assign(X.size(), {});
    for (auto [i, j] : edges) {
        PrimaryArc arc;
        arc.a = X[static_cast<std::size_t>(i)];
        arc.b = X[static_cast<std::size_t>(j)];
        int id = static_cast<int>(sys.arcs.size());
        sys.arcs.push_back(std::move(arc));
        sys.adjacency[static_cast<std::size_t>(i)].emplace_back(id, j);
        sys.adjacency[static_cast<std::size_t>(j)].emplace_back(id, i);
    }
    Dsu dsu(static_cast<int>(X.size()));
    for (auto [i, j] : edges) dsu.unite(i, j);
    for (std::size_t v = 1; v < X.size(); ++v)
        if (dsu.find(static_cast<int>(v)) != dsu.find(0))
            throw Error(Errc::Internal, "skeleton is disconnected");

    // Record each arc's level-1 decomposition as (cylinder, pulled-back arc).
    for (auto& arc : sys.arcs) {
        ArcChain chain = chain_impl(spec, pcd, g1, arc.a, arc.b);
        EvPeriodicWord entry = chain.endpoints.first;
        for (std::size_t b = 0; b < chain.cylinders.size(); ++b) {
            EvPeriodicWord exit =
                b + 1 < chain.cylinders.size() ? chain.joints[b] : chain.endpoints.second;
            int p = sys.point_index(shift_point(spec, pcd, entry, chain.cylinders[b]));
            int q = sys.point_index(shift_point(spec, pcd, exit, chain.cylinders[b]));
            if (p < 0 || q < 0)
                throw Error(Errc::Internal, "block endpoint escaped the stable point set");
            for (int arc_id : skeleton_path_arcs(sys, p, q))
                arc.expansion.emplace_back(chain.cylinders[b].front(), arc_id);
            entry = exit;
        }
        if (arc.expansion.empty())
            throw Error(Errc::Internal, "empty expansion for arc " + arc.a.str() + " .. " +
                                            arc.b.str());
    }
    return sys;
}

std::vector<int> skeleton_path_arcs(const PrimaryArcSystem& sys, int p, int q) {
    if (p == q) return {};
    std::vector<int> parent(sys.pstar.size(), -2);
    std::vector<int> via(sys.pstar.size(), -1);
    std::queue<int> bq;
    parent[static_cast<std::size_t>(p)] = -1;
    bq.push(p);
    while (!bq.empty()) {
        int u = bq.front();
        bq.pop();
        if (u == q) break;
        for (auto [arc, v] : sys.adjacency[static_cast<std::size_t>(u)]) {
            if (parent[static_cast<std::size_t>(v)] != -2) continue;
            parent[static_cast<std::size_t>(v)] = u;
            via[static_cast<std::size_t>(v)] = arc;
            bq.push(v);
        }
    }
    if (parent[static_cast<std::size_t>(q)] == -2)
        throw Error(Errc::Internal, "skeleton path lookup failed");
    std::vector<int> arcs;
    for (int v = q; parent[static_cast<std::size_t>(v)] != -1;
         v = parent[static_cast<std::size_t>(v)])
        arcs.push_back(via[static_cast<std::size_t>(v)]);
    std::reverse(arcs.begin(), arcs.end());
    return arcs;
}

int skeleton_distance(const PrimaryArcSystem& sys, int p, int q) {
    return static_cast<int>(skeleton_path_arcs(sys, p, q).size());
}

double DendriteAssignment::R_of(const FiniteWord& w) const {
    auto it = std::lower_bound(words.begin(), words.end(), w);
    if (it == words.end() || *it != w)
        throw Error(Errc::DomainError, "no weight for word " + word_str(w));
    return R[static_cast<std::size_t>(it - words.begin())];
}

std::map<FiniteWord, double> DendriteAssignment::weight_map() const {
    std::map<FiniteWord, double> out;
    for (std::size_t i = 0; i < words.size(); ++i) out.emplace(words[i], R[i]);
    return out;
}

DendriteAssignment assign_weights(const PrimaryArcSystem& sys, const IfsSpec& spec,
                                  const PostCriticalData& pcd, int m, double delta, double c,
                                  bool auto_halve) {
    if (m < 1) throw Error(Errc::DomainError, "block level must be at least 1");
    if (!(delta > 0.0)) throw Error(Errc::DomainError, "delta must be positive");
    if (!(c > 0.0)) throw Error(Errc::DomainError, "exponent c must be positive");

    IncidenceGraph g = build_incidence(spec, pcd, m);

    // The boundary set must be stable under iteration: shifting every level-m
    // touch point by m symbols, and closing, recovers exactly the boundary
    // points of the one-step system.
    {
        std::set<std::string> pf;
        for (const auto& pc : pcd.points) pf.insert(pc.codings.front().str());
        std::set<std::string> pm;
        std::vector<EvPeriodicWord> work;
        auto push = [&](const EvPeriodicWord& w) {
            if (pm.insert(w.str()).second) work.push_back(w);
        };
        for (const auto& tp : g.points)
            for (const auto& cdg : coding_class(spec, pcd, tp.coding))
                push(lowest_coding(spec, pcd, cdg.suffix(static_cast<std::size_t>(m))));
        while (!work.empty()) {
            EvPeriodicWord w = work.back();
            work.pop_back();
            for (const auto& cdg : coding_class(spec, pcd, w))
                push(lowest_coding(spec, pcd, cdg.suffix(static_cast<std::size_t>(m))));
        }
        if (pm != pf)
            throw Error(Errc::Internal,
                        "boundary set is not stable under level-" + std::to_string(m) +
                            " iteration");
    }

    DendriteAssignment out;
    out.m = m;
    out.c = c;
    out.words = g.cylinders;
    std::size_t nwords = out.words.size();
    if (nwords < 2)
        throw Error(Errc::DomainError, "weighted count equation is degenerate for one cylinder");

    std::set<FiniteWord> boundary;
    for (const auto& pc : pcd.points)
        for (const auto& cdg : pc.codings) boundary.insert(cdg.prefix(static_cast<std::size_t>(m)));

    // Decompose every arc at level m; a cylinder is private when exactly one
    // arc crosses it in a full block.
    struct Block {
        FiniteWord word;
        int mu = 0; // primary arcs in the pulled-back joining
    };
    std::vector<std::vector<Block>> arc_blocks(sys.arcs.size());
    std::vector<std::map<int, int>> word_arcs(nwords); // word -> arc -> block count
    for (std::size_t v = 0; v < sys.arcs.size(); ++v) {
        ArcChain chain = chain_impl(spec, pcd, g, sys.arcs[v].a, sys.arcs[v].b);
        EvPeriodicWord entry = chain.endpoints.first;
        for (std::size_t b = 0; b < chain.cylinders.size(); ++b) {
            EvPeriodicWord exit =
                b + 1 < chain.cylinders.size() ? chain.joints[b] : chain.endpoints.second;
            int p = sys.point_index(shift_point(spec, pcd, entry, chain.cylinders[b]));
            int q = sys.point_index(shift_point(spec, pcd, exit, chain.cylinders[b]));
            if (p < 0 || q < 0)
                throw Error(Errc::Internal, "level-" + std::to_string(m) +
                                                " block endpoint is not a skeleton point");
            Block blk;
            blk.word = chain.cylinders[b];
            blk.mu = skeleton_distance(sys, p, q);
            int widx = g.cylinder_index(blk.word);
            word_arcs[static_cast<std::size_t>(widx)][static_cast<int>(v)] += 1;
            arc_blocks[v].push_back(std::move(blk));
            entry = exit;
        }
    }

    out.kind.assign(nwords, CylinderKind::NonPrivate);
    out.owner.assign(nwords, -1);
    for (std::size_t w = 0; w < nwords; ++w) {
        if (boundary.count(out.words[w])) {
            out.kind[w] = CylinderKind::Boundary;
        } else if (word_arcs[w].size() == 1) {
            out.kind[w] = CylinderKind::Private;
            out.owner[w] = word_arcs[w].begin()->first;
        }
    }
    out.boundary_count = static_cast<int>(boundary.size());

    out.stats.assign(sys.arcs.size(), {});
    for (std::size_t v = 0; v < sys.arcs.size(); ++v) {
        for (const Block& blk : arc_blocks[v]) {
            std::size_t w = static_cast<std::size_t>(g.cylinder_index(blk.word));
            out.stats[v].entries += blk.mu;
            switch (out.kind[w]) {
            case CylinderKind::Boundary:
                out.stats[v].boundary_sum +=
                    blk.mu * std::pow(spec.word_map(blk.word).ratio, c);
                break;
            case CylinderKind::Private:
                out.stats[v].n_private += blk.mu;
                out.stats[v].private_blocks += 1;
                break;
            case CylinderKind::NonPrivate:
                out.stats[v].n_nonprivate += blk.mu;
                break;
            }
        }
    }

    int max_halvings = auto_halve ? 60 : 0;
    std::string failure;
    for (int h = 0; h <= max_halvings; ++h) {
        double d = delta * std::pow(0.5, h);
        failure.clear();
        std::vector<double> weights(nwords, 0.0);
        std::vector<double> arc_private(sys.arcs.size(), 0.0);
        if (!(d < 1.0)) failure = "delta must lie below 1";
        for (std::size_t v = 0; v < sys.arcs.size() && failure.empty(); ++v) {
            const auto& st = out.stats[v];
            double leftover = 1.0 - st.boundary_sum - st.n_nonprivate * d;
            if (st.n_private > 0) {
                arc_private[v] = leftover / st.n_private;
                if (!(arc_private[v] > 0.0 && arc_private[v] < 1.0)) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf,
                                  "arc %zu private weight %.6g is outside (0,1)", v,
                                  arc_private[v]);
                    failure = buf;
                }
            } else if (std::fabs(leftover) > 1e-12) {
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "arc %zu has no private cylinder to absorb leftover %.6g", v,
                              leftover);
                failure = buf;
            }
        }
        for (std::size_t w = 0; w < nwords && failure.empty(); ++w) {
            switch (out.kind[w]) {
            case CylinderKind::Boundary:
                weights[w] = std::pow(spec.word_map(out.words[w]).ratio, c);
                break;
            case CylinderKind::Private:
                weights[w] = arc_private[static_cast<std::size_t>(out.owner[w])];
                break;
            case CylinderKind::NonPrivate:
                weights[w] = d;
                break;
            }
            if (!(weights[w] > 0.0 && weights[w] < 1.0))
                failure = "weight for " + word_str(out.words[w]) + " is outside (0,1)";
        }
        if (failure.empty()) {
            out.R = std::move(weights);
            out.delta = d;
            out.halvings = h;
            break;
        }
    }
    if (out.R.empty()) throw Error(Errc::AssignmentInfeasible, failure);

    for (std::size_t v = 0; v < sys.arcs.size(); ++v) {
        const auto& st = out.stats[v];
        double priv = st.n_private > 0 ? (1.0 - st.boundary_sum - st.n_nonprivate * out.delta) : 0.0;
        double lv = st.boundary_sum + priv + st.n_nonprivate * out.delta;
        if (std::fabs(lv - 1.0) > 1e-9)
            throw Error(Errc::Internal, "arc weight sum drifted from one");
    }
    return out;
}

DendriteMetric::DendriteMetric(const IfsSpec& spec, const PostCriticalData& pcd,
                               const PrimaryArcSystem& system,
                               std::map<FiniteWord, double> weights, int m)
    : spec_(spec), pcd_(pcd), system_(system), weights_(std::move(weights)), m_(m),
      block_graph_(build_incidence(spec, pcd, m)) {
    for (const auto& [w, r] : weights_) {
        if (static_cast<int>(w.size()) != m_)
            throw Error(Errc::DomainError, "weight word " + word_str(w) + " has the wrong length");
        if (!(r > 0.0 && r < 1.0))
            throw Error(Errc::DomainError, "weight for " + word_str(w) + " is outside (0,1)");
    }
}

double DendriteMetric::distance(int n, const EvPeriodicWord& x, const EvPeriodicWord& y) const {
    EvPeriodicWord cx = lowest_coding(spec_, pcd_, x);
    EvPeriodicWord cy = lowest_coding(spec_, pcd_, y);
    if (cx == cy) return 0.0;
    if (n <= 0) {
        int p = system_.point_index(cx);
        int q = system_.point_index(cy);
        if (p < 0 || q < 0)
            throw Error(Errc::Internal, "level-0 point " + (p < 0 ? cx : cy).str() +
                                            " is outside the skeleton");
        return static_cast<double>(skeleton_distance(system_, p, q));
    }
    std::string key = std::to_string(n) + "|" + cx.str() + "|" + cy.str();
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    ArcChain chain = chain_impl(spec_, pcd_, block_graph_, cx, cy);
    double total = 0.0;
    EvPeriodicWord entry = chain.endpoints.first;
    for (std::size_t b = 0; b < chain.cylinders.size(); ++b) {
        EvPeriodicWord exit =
            b + 1 < chain.cylinders.size() ? chain.joints[b] : chain.endpoints.second;
        auto wit = weights_.find(chain.cylinders[b]);
        if (wit == weights_.end())
            throw Error(Errc::DomainError,
                        "no weight for cylinder " + word_str(chain.cylinders[b]));
        total += wit->second * distance(n - 1, shift_point(spec_, pcd_, entry, chain.cylinders[b]),
                                        shift_point(spec_, pcd_, exit, chain.cylinders[b]));
        entry = exit;
    }
    memo_.emplace(std::move(key), total);
    return total;
}

std::vector<EvPeriodicWord> DendriteMetric::level_points(int n) const {
    if (n < 0) throw Error(Errc::DomainError, "level must be nonnegative");
    double count = std::pow(spec_.size(), m_ * n) * static_cast<double>(system_.pstar.size());
    if (count > 500000.0)
        throw Error(Errc::DomainError, "level " + std::to_string(n) + " has too many points");
    std::set<std::string> seen;
    std::vector<EvPeriodicWord> pts;
    auto add = [&](const EvPeriodicWord& w) {
        EvPeriodicWord canon = lowest_coding(spec_, pcd_, w);
        if (seen.insert(canon.str()).second) pts.push_back(canon);
    };
    for (const auto& p : system_.pstar) add(p);
    if (n > 0) {
        for_each_word_of(spec_.size(), m_ * n, [&](const FiniteWord& w) {
            for (const auto& p : system_.pstar) add(p.with_prefix(w));
        });
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return lex_less(a, b); });
    return pts;
}

MetricCheckReport dendrite_metric_check(const IfsSpec& spec, const PostCriticalData& pcd,
                                        const PrimaryArcSystem& system,
                                        const std::map<FiniteWord, double>& weights, int m, int n,
                                        int samples, unsigned seed) {
    if (n < 1) throw Error(Errc::DomainError, "metric check needs level at least 1");
    DendriteMetric metric(spec, pcd, system, weights, m);
    MetricCheckReport rep;
    std::vector<EvPeriodicWord> xn = metric.level_points(n);
    std::vector<EvPeriodicWord> xprev = metric.level_points(n - 1);
    std::mt19937 rng(effective_seed(seed));
    std::uniform_int_distribution<std::size_t> pick(0, xn.size() - 1);

    auto complain = [&](const std::string& msg) {
        rep.ok = false;
        if (rep.witnesses.size() < 12) rep.witnesses.push_back(msg);
    };

    for (int t = 0; t < samples; ++t) {
        std::size_t ia = pick(rng), ib = pick(rng), ic = pick(rng);
        if (ia == ib || ib == ic || ia == ic) continue;
        ++rep.triples_checked;
        const auto &a = xn[ia], &b = xn[ib], &c = xn[ic];
        double ab = metric.distance(n, a, b);
        double ba = metric.distance(n, b, a);
        double bc = metric.distance(n, b, c);
        double ac = metric.distance(n, a, c);
        double scale = std::max({1.0, ab, bc, ac});
        if (std::fabs(ab - ba) > 1e-12 * scale)
            complain("asymmetry between " + a.str() + " and " + b.str());
        if (!(ab > 0.0)) complain("zero distance between distinct " + a.str() + " " + b.str());
        if (ab + bc < ac - 1e-12 * scale || ab + ac < bc - 1e-12 * scale ||
            ac + bc < ab - 1e-12 * scale)
            complain("triangle violation on " + a.str() + " " + b.str() + " " + c.str());
    }

    std::uniform_int_distribution<std::size_t> pick_prev(0, xprev.size() - 1);
    std::size_t all_pairs = xprev.size() * (xprev.size() - 1) / 2;
    if (all_pairs <= static_cast<std::size_t>(samples)) {
        for (std::size_t i = 0; i < xprev.size(); ++i)
            for (std::size_t j = i + 1; j < xprev.size(); ++j) {
                ++rep.restriction_pairs;
                double dn = metric.distance(n, xprev[i], xprev[j]);
                double dp = metric.distance(n - 1, xprev[i], xprev[j]);
                if (std::fabs(dn - dp) > 1e-12 * std::max(1.0, dp))
                    complain("levels disagree at " + xprev[i].str() + " " + xprev[j].str());
            }
    } else {
        for (int t = 0; t < samples; ++t) {
            std::size_t i = pick_prev(rng), j = pick_prev(rng);
            if (i == j) continue;
            ++rep.restriction_pairs;
            double dn = metric.distance(n, xprev[i], xprev[j]);
            double dp = metric.distance(n - 1, xprev[i], xprev[j]);
            if (std::fabs(dn - dp) > 1e-12 * std::max(1.0, dp))
                complain("levels disagree at " + xprev[i].str() + " " + xprev[j].str());
        }
    }
    return rep;
}

DendriteSimilitudeCheck dendrite_similitude_check(const IfsSpec& spec,
                                                  const PostCriticalData& pcd,
                                                  const PrimaryArcSystem& system,
                                                  const std::map<FiniteWord, double>& weights,
                                                  int m, const FiniteWord& w, int n, int samples,
                                                  unsigned seed) {
    if (static_cast<int>(w.size()) != m)
        throw Error(Errc::DomainError, "map word has the wrong length");
    auto wit = weights.find(w);
    if (wit == weights.end())
        throw Error(Errc::DomainError, "no weight for word " + word_str(w));
    DendriteMetric metric(spec, pcd, system, weights, m);
    std::vector<EvPeriodicWord> xn = metric.level_points(n);
    std::mt19937 rng(effective_seed(seed));
    std::uniform_int_distribution<std::size_t> pick(0, xn.size() - 1);
    DendriteSimilitudeCheck chk;
    for (int t = 0; t < samples; ++t) {
        std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        ++chk.pairs_checked;
        double base = metric.distance(n, xn[i], xn[j]);
        double image = metric.distance(n + 1, xn[i].with_prefix(w), xn[j].with_prefix(w));
        double err = std::fabs(image - wit->second * base) / std::max(1e-15, base);
        if (err > chk.max_rel_err) {
            chk.max_rel_err = err;
            char buf[220];
            std::snprintf(buf, sizeof buf, "pair %s, %s: image %.17g vs scaled %.17g",
                          xn[i].str().c_str(), xn[j].str().c_str(), image, wit->second * base);
            chk.witness = buf;
        }
    }
    return chk;
}

SmSolution solve_s_m(const PrimaryArcSystem& system, const IfsSpec& spec,
                     const PostCriticalData& pcd, int m, double delta, double c,
                     bool auto_halve) {
    SmSolution sol;
    sol.assignment = assign_weights(system, spec, pcd, m, delta, c, auto_halve);
    sol.m = m;
    sol.c = c;
    sol.delta_used = sol.assignment.delta;
    sol.halvings = sol.assignment.halvings;
    if (sol.assignment.R.size() < 2)
        throw Error(Errc::DomainError, "weighted count equation is degenerate");
    sol.s = similarity_dimension(sol.assignment.R);
    return sol;
}

std::vector<SmSolution> dendrite_dimension_trend(const PrimaryArcSystem& system,
                                                 const IfsSpec& spec,
                                                 const PostCriticalData& pcd, int m_lo, int m_hi,
                                                 double delta, double c) {
    if (m_lo < 1 || m_hi < m_lo) throw Error(Errc::DomainError, "bad level range");
    std::vector<SmSolution> rows;
    for (int m = m_lo; m <= m_hi; ++m)
        rows.push_back(solve_s_m(system, spec, pcd, m, std::pow(delta, m), c));
    return rows;
}

std::string dendrite_svg(const IfsSpec& spec, const PostCriticalData& pcd,
                         const PrimaryArcSystem& system, int level) {
    std::vector<Vec2> cyl_pts;
    std::vector<double> cyl_r;
    for_each_word_of(spec.size(), level, [&](const FiniteWord& w) {
        Similitude s = spec.word_map(w);
        cyl_pts.push_back(s.apply(spec.anchor()));
        cyl_r.push_back(s.ratio * spec.diam_bound() * 0.5);
    });

    std::vector<std::vector<Vec2>> polylines;
    IncidenceGraph g = build_incidence(spec, pcd, std::min(level + 1, 6));
    for (const auto& arc : system.arcs) {
        ArcChain chain = chain_impl(spec, pcd, g, arc.a, arc.b);
        std::vector<Vec2> line;
        line.push_back(spec.eval(arc.a));
        for (const auto& j : chain.joints) line.push_back(spec.eval(j));
        line.push_back(spec.eval(arc.b));
        polylines.push_back(std::move(line));
    }

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto stretch = [&](const Vec2& p, double r) {
        xmin = std::min(xmin, p.x - r);
        xmax = std::max(xmax, p.x + r);
        ymin = std::min(ymin, p.y - r);
        ymax = std::max(ymax, p.y + r);
    };
    for (std::size_t i = 0; i < cyl_pts.size(); ++i) stretch(cyl_pts[i], cyl_r[i]);
    for (const auto& line : polylines)
        for (const auto& p : line) stretch(p, 0.0);
    double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
    double scale = 720.0 / span;
    auto X = [&](double x) { return 20.0 + (x - xmin) * scale; };
    auto Y = [&](double y) { return 20.0 + (ymax - y) * scale; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\""
       << (40.0 + (ymax - ymin) * scale) << "\" viewBox=\"0 0 760 "
       << (40.0 + (ymax - ymin) * scale) << "\">\n";
    char buf[160];
    for (std::size_t i = 0; i < cyl_pts.size(); ++i) {
        std::snprintf(buf, sizeof buf,
                      "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"#d7e3f4\" "
                      "stroke=\"none\"/>\n",
                      X(cyl_pts[i].x), Y(cyl_pts[i].y), cyl_r[i] * scale);
        os << buf;
    }
    for (const auto& line : polylines) {
        os << "  <polyline fill=\"none\" stroke=\"#1f3552\" stroke-width=\"2\" points=\"";
        for (const auto& p : line) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(p.x), Y(p.y));
            os << buf;
        }
        os << "\"/>\n";
    }
    for (const auto& p : system.pstar) {
        Vec2 v = spec.eval(p);
        std::snprintf(buf, sizeof buf,
                      "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#b3402a\"/>\n", X(v.x),
                      Y(v.y));
        os << buf;
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace fractop
