#include "fractop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fractop {

namespace {

// Comparison and formatting that differ between the float lane and the
// exact lane. close() is the equality used by all coincidence checks.
template <typename W>
struct WeightOps;

template <>
struct WeightOps<double> {
    static bool close(double a, double b) {
        return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    }
    static double dev(double a, double b) { return std::abs(a - b); }
    static double dbl(double a) { return a; }
    static std::string str(double a) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", a);
        return buf;
    }
};

template <>
struct WeightOps<Rational> {
    static bool close(const Rational& a, const Rational& b) { return a == b; }
    static double dev(const Rational& a, const Rational& b) {
        return std::abs(to_double(Rational(a - b)));
    }
    static double dbl(const Rational& a) { return to_double(a); }
    static std::string str(const Rational& a) { return a.str(); }
};

struct KeyLess {
    bool operator()(const EvPeriodicWord& a, const EvPeriodicWord& b) const {
        return lex_less(a, b);
    }
};

// All length-n words over 1..N in lexicographic order, via an odometer.
template <typename Fn>
void for_each_word(int N, int n, Fn&& fn) {
    FiniteWord I(static_cast<std::size_t>(n), 1);
    for (;;) {
        fn(I);
        int k = n - 1;
        while (k >= 0 && I[static_cast<std::size_t>(k)] == N) --k;
        if (k < 0) return;
        ++I[static_cast<std::size_t>(k)];
        std::fill(I.begin() + k + 1, I.end(), 1);
    }
}

std::uint64_t effective_seed(std::uint64_t seed) { return seed == 0 ? 0x5eed : seed; }

// Single-source distances; optionally records the shortest-path tree with the
// deterministic tie-break (smaller predecessor vertex, then smaller edge id).
template <typename W>
std::vector<std::optional<W>> dijkstra_all(const RefinedGraph<W>& g, int src,
                                           std::vector<int>* par_v = nullptr,
                                           std::vector<std::size_t>* par_e = nullptr) {
    const std::size_t V = g.size();
    std::vector<std::optional<W>> dist(V);
    std::vector<char> done(V, 0);
    if (par_v) par_v->assign(V, -1);
    if (par_e) par_e->assign(V, static_cast<std::size_t>(-1));
    using Item = std::pair<W, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[static_cast<std::size_t>(src)] = W(0);
    pq.push({W(0), src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        auto ui = static_cast<std::size_t>(u);
        if (done[ui]) continue;
        done[ui] = 1;
        for (auto [v, e] : g.adjacency[ui]) {
            auto vi = static_cast<std::size_t>(v);
            if (done[vi]) continue;
            W nd = d + g.edges[e].weight;
            if (!dist[vi] || nd < *dist[vi]) {
                dist[vi] = nd;
                if (par_v) (*par_v)[vi] = u;
                if (par_e) (*par_e)[vi] = e;
                pq.push({nd, v});
            } else if (par_v && nd == *dist[vi]) {
                // Positive weights guarantee every predecessor is settled
                // before v pops, so this tie-break is complete.
                if (u < (*par_v)[vi] || (u == (*par_v)[vi] && e < (*par_e)[vi])) {
                    (*par_v)[vi] = u;
                    (*par_e)[vi] = e;
                }
            }
        }
    }
    return dist;
}

template <typename W>
std::string weight_str(const W& w) {
    return WeightOps<W>::str(w);
}

} // namespace

template <typename W>
bool BasicAssignment<W>::has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return tau0.find({a, b}) != tau0.end();
}

template <typename W>
const W& BasicAssignment<W>::tau(int a, int b) const {
    if (a > b) std::swap(a, b);
    auto it = tau0.find({a, b});
    if (it == tau0.end())
        throw Error(Errc::DomainError, "no declared level-0 edge " + std::to_string(a) + "-" +
                                           std::to_string(b));
    return it->second;
}

template <typename W>
W BasicAssignment<W>::word_factor(const FiniteWord& I) const {
    W f(1);
    for (Symbol s : I) f = f * R.at(static_cast<std::size_t>(s - 1));
    return f;
}

template <typename W>
void validate_assignment(const IfsSpec& spec, const PostCriticalData& pcd,
                         const BasicAssignment<W>& assign) {
    const int m = static_cast<int>(pcd.points.size());
    if (static_cast<int>(assign.R.size()) != spec.size())
        throw Error(Errc::DomainError, "contraction table must list one factor per map");
    for (const W& r : assign.R)
        if (!(W(0) < r && r < W(1)))
            throw Error(Errc::DomainError, "contraction factors must lie strictly in (0,1)");
    std::vector<char> covered(static_cast<std::size_t>(m), 0);
    for (const auto& [key, w] : assign.tau0) {
        auto [a, b] = key;
        if (a < 1 || b < 1 || a > m || b > m)
            throw Error(Errc::DomainError,
                        "edge " + std::to_string(a) + "-" + std::to_string(b) +
                            " references a class outside 1.." + std::to_string(m));
        if (a == b)
            throw Error(Errc::DomainError,
                        "self-loop weights are fixed at zero and cannot be declared");
        if (!(W(0) < w))
            throw Error(Errc::DomainError, "declared edge " + std::to_string(a) + "-" +
                                               std::to_string(b) +
                                               " must carry a positive weight");
        covered[static_cast<std::size_t>(a - 1)] = 1;
        covered[static_cast<std::size_t>(b - 1)] = 1;
    }
    if (m >= 2)
        for (int c = 0; c < m; ++c)
            if (!covered[static_cast<std::size_t>(c)])
                throw Error(Errc::DomainError, "post-critical class " + std::to_string(c + 1) +
                                                   " appears in no declared edge");
}

template <typename W>
int RefinedGraph<W>::vertex_of(const EvPeriodicWord& key) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), key, KeyLess{});
    if (it == keys.end() || !(*it == key)) return -1;
    return static_cast<int>(it - keys.begin());
}

template <typename W>
void rebuild_adjacency(RefinedGraph<W>& g) {
    g.adjacency.assign(g.size(), {});
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        g.adjacency[static_cast<std::size_t>(g.edges[e].u)].push_back({g.edges[e].v, e});
        g.adjacency[static_cast<std::size_t>(g.edges[e].v)].push_back({g.edges[e].u, e});
    }
}

template <typename W>
RefinedGraph<W> refine(const IfsSpec& spec, const PostCriticalData& pcd,
                       const BasicAssignment<W>& assign, int n) {
    if (n < 0) throw Error(Errc::DomainError, "refinement level must be nonnegative");
    validate_assignment(spec, pcd, assign);
    const double words_at_level = std::pow(static_cast<double>(spec.size()), n);
    if (words_at_level * static_cast<double>(std::max<std::size_t>(assign.tau0.size(), 1)) > 2e6)
        throw Error(Errc::DomainError, "refinement level too large to materialize");

    const double merge_tol = 1e-7 * std::max(1.0, spec.diam_bound());

    struct Pending {
        Vec2 pos;
        std::vector<VertexAddress> addrs;
    };
    std::map<EvPeriodicWord, Pending, KeyLess> verts;
    struct PendingEdge {
        EvPeriodicWord ku, kv;
        W w;
        FiniteWord word;
        int a, b;
    };
    std::vector<PendingEdge> pend;

    auto touch_vertex = [&](const FiniteWord& I, const Similitude& fI, int cls) {
        const PointClass& pc = pcd.points.at(static_cast<std::size_t>(cls));
        EvPeriodicWord key = lowest_coding(spec, pcd, pc.codings.front().with_prefix(I));
        Vec2 pos = fI.apply(pc.point);
        auto [it, fresh] = verts.try_emplace(key);
        if (fresh) {
            it->second.pos = pos;
        } else if (dist(it->second.pos, pos) > merge_tol) {
            char gap[32];
            std::snprintf(gap, sizeof gap, "%.3g", dist(it->second.pos, pos));
            throw Error(Errc::GeometryMismatch,
                        "addresses with the coding " + key.str() + " resolve to points " + gap +
                            " apart; identifications disagree with the geometry");
        }
        auto& addrs = it->second.addrs;
        bool seen = false;
        for (const auto& a : addrs)
            if (a.anchor == cls && a.word == I) {
                seen = true;
                break;
            }
        if (!seen) addrs.push_back(VertexAddress{I, cls});
        return key;
    };

    for_each_word(spec.size(), n, [&](const FiniteWord& I) {
        Similitude fI = spec.word_map(I);
        W rI = assign.word_factor(I);
        for (const auto& [key, w] : assign.tau0) {
            int ca = key.first - 1, cb = key.second - 1;
            EvPeriodicWord ku = touch_vertex(I, fI, ca);
            EvPeriodicWord kv = touch_vertex(I, fI, cb);
            pend.push_back(PendingEdge{std::move(ku), std::move(kv), rI * w, I, ca, cb});
        }
    });

    RefinedGraph<W> g;
    g.level = n;
    g.keys.reserve(verts.size());
    g.positions.reserve(verts.size());
    g.addresses.reserve(verts.size());
    for (auto& [key, pv] : verts) {
        g.keys.push_back(key);
        g.positions.push_back(pv.pos);
        g.addresses.push_back(std::move(pv.addrs));
    }
    g.edges.reserve(pend.size());
    for (auto& pe : pend) {
        RefinedEdge<W> e;
        e.u = g.vertex_of(pe.ku);
        e.v = g.vertex_of(pe.kv);
        e.weight = std::move(pe.w);
        e.word = std::move(pe.word);
        e.a = pe.a;
        e.b = pe.b;
        g.edges.push_back(std::move(e));
    }
    rebuild_adjacency(g);
    return g;
}

template <typename W>
RefinedGraph<W> refine(const IfsSpec& spec, const BasicAssignment<W>& assign, int n) {
    PostCriticalData pcd = compute_post_critical(spec);
    return refine(spec, pcd, assign, n);
}

template <typename W>
GeodesicResult<W> geodesic(const RefinedGraph<W>& g, int x, int y) {
    if (x < 0 || y < 0 || static_cast<std::size_t>(x) >= g.size() ||
        static_cast<std::size_t>(y) >= g.size())
        throw Error(Errc::DomainError, "geodesic endpoint is not a vertex of the graph");
    GeodesicResult<W> res;
    if (x == y) {
        res.reachable = true;
        res.distance = W(0);
        res.vertices = {x};
        return res;
    }
    std::vector<int> par_v;
    std::vector<std::size_t> par_e;
    auto dist = dijkstra_all(g, x, &par_v, &par_e);
    const auto yi = static_cast<std::size_t>(y);
    if (!dist[yi]) {
        if constexpr (std::is_same_v<W, double>)
            res.distance = std::numeric_limits<double>::infinity();
        return res;
    }
    res.reachable = true;
    res.distance = *dist[yi];
    for (int v = y; v != -1; v = par_v[static_cast<std::size_t>(v)]) {
        res.vertices.push_back(v);
        if (par_v[static_cast<std::size_t>(v)] != -1)
            res.edges.push_back(par_e[static_cast<std::size_t>(v)]);
    }
    std::reverse(res.vertices.begin(), res.vertices.end());
    std::reverse(res.edges.begin(), res.edges.end());
    return res;
}

template <typename W>
GoodAssignmentReport check_good_assignment(const IfsSpec& spec, const PostCriticalData& pcd,
                                           const BasicAssignment<W>& assign) {
    RefinedGraph<W> g0 = refine(spec, pcd, assign, 0);
    RefinedGraph<W> g1 = refine(spec, pcd, assign, 1);
    GoodAssignmentReport rep;
    rep.compatible = true;
    rep.edges_geodesic = true;

    const int m = static_cast<int>(pcd.points.size());
    std::vector<int> v0(static_cast<std::size_t>(m), -1), v1(static_cast<std::size_t>(m), -1);
    for (int c = 0; c < m; ++c) {
        const EvPeriodicWord& key = pcd.points[static_cast<std::size_t>(c)].codings.front();
        v0[static_cast<std::size_t>(c)] = g0.vertex_of(key);
        v1[static_cast<std::size_t>(c)] = g1.vertex_of(key);
        if (v0[static_cast<std::size_t>(c)] >= 0 && v1[static_cast<std::size_t>(c)] < 0) {
            rep.compatible = false;
            rep.witnesses.push_back("post-critical point " + key.str() +
                                    " is not a level-1 vertex");
        }
    }

    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            int a0 = v0[static_cast<std::size_t>(a)], b0 = v0[static_cast<std::size_t>(b)];
            int a1 = v1[static_cast<std::size_t>(a)], b1 = v1[static_cast<std::size_t>(b)];
            if (a0 < 0 || b0 < 0 || a1 < 0 || b1 < 0) continue;
            auto d0 = geodesic(g0, a0, b0);
            auto d1 = geodesic(g1, a1, b1);
            if (d0.reachable != d1.reachable) {
                rep.compatible = false;
                rep.witnesses.push_back("reachability of the pair " +
                                        g0.keys[static_cast<std::size_t>(a0)].str() + ", " +
                                        g0.keys[static_cast<std::size_t>(b0)].str() +
                                        " changes between level 0 and level 1");
                continue;
            }
            if (d0.reachable && !WeightOps<W>::close(d0.distance, d1.distance)) {
                rep.compatible = false;
                rep.witnesses.push_back(
                    "distance of " + g0.keys[static_cast<std::size_t>(a0)].str() + ", " +
                    g0.keys[static_cast<std::size_t>(b0)].str() + " is " +
                    weight_str(d1.distance) + " at level 1 but " + weight_str(d0.distance) +
                    " at level 0");
            }
        }
    }

    for (std::size_t e = 0; e < g1.edges.size(); ++e) {
        const auto& edge = g1.edges[e];
        auto ge = geodesic(g1, edge.u, edge.v);
        if (!ge.reachable || !WeightOps<W>::close(ge.distance, edge.weight)) {
            rep.edges_geodesic = false;
            rep.witnesses.push_back(
                "edge " + g1.keys[static_cast<std::size_t>(edge.u)].str() + "-" +
                g1.keys[static_cast<std::size_t>(edge.v)].str() + " of weight " +
                weight_str(edge.weight) + " is undercut by a path of weight " +
                weight_str(ge.distance));
        }
    }
    return rep;
}

template <typename W>
CompatibilityResult verify_compatibility(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const BasicAssignment<W>& assign, int n,
                                         std::size_t max_pairs, std::uint64_t seed) {
    if (n < 1) throw Error(Errc::DomainError, "compatibility needs a level n >= 1");
    RefinedGraph<W> gp = refine(spec, pcd, assign, n - 1);
    RefinedGraph<W> gn = refine(spec, pcd, assign, n);

    CompatibilityResult res;
    res.ok = true;
    const std::size_t V = gp.size();
    if (V < 2) return res;

    std::vector<int> up(V, -1);
    for (std::size_t v = 0; v < V; ++v) {
        up[v] = gn.vertex_of(gp.keys[v]);
        if (up[v] < 0)
            throw Error(Errc::Internal, "level-" + std::to_string(n - 1) + " vertex " +
                                            gp.keys[v].str() + " missing at level " +
                                            std::to_string(n));
    }

    const std::size_t total_pairs = V * (V - 1) / 2;
    std::vector<std::size_t> sources;
    bool full = total_pairs <= max_pairs;
    if (full) {
        sources.resize(V);
        for (std::size_t v = 0; v < V; ++v) sources[v] = v;
    } else {
        std::mt19937 rng(static_cast<std::uint32_t>(effective_seed(seed)));
        std::size_t want = std::max<std::size_t>(1, max_pairs / (V - 1));
        std::set<std::size_t> chosen;
        while (chosen.size() < std::min(want, V)) chosen.insert(rng() % V);
        sources.assign(chosen.begin(), chosen.end());
    }

    for (std::size_t s : sources) {
        auto dp = dijkstra_all(gp, static_cast<int>(s));
        auto dn = dijkstra_all(gn, up[s]);
        for (std::size_t t = full ? s + 1 : 0; t < V; ++t) {
            if (t == s) continue;
            ++res.pairs_checked;
            const auto& a = dp[t];
            const auto& b = dn[static_cast<std::size_t>(up[t])];
            if (a.has_value() != b.has_value()) {
                res.ok = false;
                if (res.witness.empty())
                    res.witness = "reachability of " + gp.keys[s].str() + ", " + gp.keys[t].str() +
                                  " differs between levels";
                continue;
            }
            if (!a) continue;
            double dev = WeightOps<W>::dev(*a, *b);
            if (dev > res.max_abs_dev) {
                res.max_abs_dev = dev;
                res.witness = "distance of " + gp.keys[s].str() + ", " + gp.keys[t].str() +
                              " moves from " + weight_str(*a) + " to " + weight_str(*b);
            }
            if (!WeightOps<W>::close(*a, *b)) res.ok = false;
        }
    }
    if (res.ok) res.witness.clear();
    return res;
}

template <typename W>
MetricDValue<W> metric_D(const IfsSpec& spec, const PostCriticalData& pcd,
                         const BasicAssignment<W>& assign, const EvPeriodicWord& x,
                         const EvPeriodicWord& y, int n) {
    if (n < 0) throw Error(Errc::DomainError, "approximation level must be nonnegative");
    MetricDValue<W> out;
    out.level = n;
    EvPeriodicWord xc = lowest_coding(spec, pcd, x);
    EvPeriodicWord yc = lowest_coding(spec, pcd, y);
    if (xc == yc) {
        out.value = W(0);
        out.envelope = W(0);
        return out;
    }

    RefinedGraph<W> g0 = refine(spec, pcd, assign, 0);
    RefinedGraph<W> gn = refine(spec, pcd, assign, n);

    // Level-0 diameter of the reachable part, for the projection envelope.
    W diam0(0);
    for (std::size_t a = 0; a < g0.size(); ++a) {
        auto row = dijkstra_all(g0, static_cast<int>(a));
        for (std::size_t b = a + 1; b < g0.size(); ++b)
            if (row[b] && diam0 < *row[b]) diam0 = *row[b];
    }
    W rmax(0);
    for (const W& r : assign.R)
        if (rmax < r) rmax = r;
    W shrink(1);
    for (int k = 0; k < n; ++k) shrink = shrink * rmax;
    out.envelope = W(2) * shrink * diam0;

    auto project = [&](const EvPeriodicWord& w) {
        FiniteWord I = w.prefix(static_cast<std::size_t>(n));
        Vec2 target = spec.eval(w);
        int best = -1;
        double best_d = 0.0;
        for (std::size_t c = 0; c < pcd.points.size(); ++c) {
            EvPeriodicWord key =
                lowest_coding(spec, pcd, pcd.points[c].codings.front().with_prefix(I));
            int v = gn.vertex_of(key);
            if (v < 0) continue;
            double d = dist(gn.positions[static_cast<std::size_t>(v)], target);
            if (best < 0 || d < best_d) {
                best = v;
                best_d = d;
            }
        }
        if (best < 0)
            throw Error(Errc::DomainError, "no vertex available in the level-" +
                                               std::to_string(n) + " cylinder of " + w.str());
        return best;
    };

    out.vx = project(xc);
    out.vy = project(yc);
    auto geo = geodesic(gn, out.vx, out.vy);
    out.finite = geo.reachable;
    out.value = geo.distance;
    return out;
}

template <typename W>
SimilitudeCheck check_similitude_under_D(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const BasicAssignment<W>& assign, Symbol j, int n,
                                         std::size_t max_pairs, std::uint64_t seed) {
    if (j < 1 || j > spec.size())
        throw Error(Errc::DomainError, "map index out of range");
    if (n < 0) throw Error(Errc::DomainError, "level must be nonnegative");
    RefinedGraph<W> gn = refine(spec, pcd, assign, n);
    RefinedGraph<W> g1 = refine(spec, pcd, assign, n + 1);

    SimilitudeCheck res;
    const std::size_t V = gn.size();
    if (V < 2) return res;

    std::vector<int> img(V, -1);
    for (std::size_t v = 0; v < V; ++v) {
        EvPeriodicWord key = lowest_coding(spec, pcd, gn.keys[v].with_prefix({j}));
        img[v] = g1.vertex_of(key);
        if (img[v] < 0)
            throw Error(Errc::Internal,
                        "image of vertex " + gn.keys[v].str() + " missing at level " +
                            std::to_string(n + 1));
    }

    const W& rj = assign.R.at(static_cast<std::size_t>(j - 1));
    const std::size_t total_pairs = V * (V - 1) / 2;
    std::vector<std::size_t> sources;
    bool full = total_pairs <= max_pairs;
    if (full) {
        sources.resize(V);
        for (std::size_t v = 0; v < V; ++v) sources[v] = v;
    } else {
        std::mt19937 rng(static_cast<std::uint32_t>(effective_seed(seed)));
        std::size_t want = std::max<std::size_t>(1, max_pairs / (V - 1));
        std::set<std::size_t> chosen;
        while (chosen.size() < std::min(want, V)) chosen.insert(rng() % V);
        sources.assign(chosen.begin(), chosen.end());
    }

    for (std::size_t s : sources) {
        auto base = dijkstra_all(gn, static_cast<int>(s));
        auto mapped = dijkstra_all(g1, img[s]);
        for (std::size_t t = full ? s + 1 : 0; t < V; ++t) {
            if (t == s) continue;
            const auto& d = base[t];
            const auto& di = mapped[static_cast<std::size_t>(img[t])];
            if (!d || !di) continue;
            ++res.pairs_checked;
            double err = WeightOps<W>::dev(*di, rj * (*d));
            double rel = err / WeightOps<W>::dbl(*d);
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.witness = "pair " + gn.keys[s].str() + ", " + gn.keys[t].str() +
                              ": image distance " + weight_str(*di) + " vs scaled " +
                              weight_str(static_cast<W>(rj * (*d)));
            }
        }
    }
    return res;
}

double similarity_dimension(const std::vector<double>& ratios) {
    if (ratios.empty()) throw Error(Errc::DomainError, "ratio list is empty");
    for (double r : ratios)
        if (!(r > 0.0 && r < 1.0))
            throw Error(Errc::DomainError, "ratios must lie strictly in (0,1)");
    auto excess = [&](double s) {
        double acc = -1.0;
        for (double r : ratios) acc += std::pow(r, s);
        return acc;
    };
    if (ratios.size() == 1) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (excess(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e4) throw Error(Errc::Internal, "dimension bisection failed to bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

template <typename W>
Subgraph subgraph_by_prefix(const RefinedGraph<W>& g, const FiniteWord& prefix) {
    Subgraph sg;
    sg.edge_in.assign(g.edges.size(), 0);
    sg.vertex_in.assign(g.size(), 0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const FiniteWord& w = g.edges[e].word;
        if (w.size() < prefix.size()) continue;
        if (!std::equal(prefix.begin(), prefix.end(), w.begin())) continue;
        sg.edge_in[e] = 1;
        sg.vertex_in[static_cast<std::size_t>(g.edges[e].u)] = 1;
        sg.vertex_in[static_cast<std::size_t>(g.edges[e].v)] = 1;
    }
    return sg;
}

Subgraph subgraph_union(const Subgraph& a, const Subgraph& b) {
    if (a.edge_in.size() != b.edge_in.size() || a.vertex_in.size() != b.vertex_in.size())
        throw Error(Errc::DomainError, "subgraphs belong to different host graphs");
    Subgraph u = a;
    for (std::size_t e = 0; e < u.edge_in.size(); ++e) u.edge_in[e] |= b.edge_in[e];
    for (std::size_t v = 0; v < u.vertex_in.size(); ++v) u.vertex_in[v] |= b.vertex_in[v];
    return u;
}

template <typename W>
std::pair<GeodesicResult<W>, GeodesicResult<W>> decompose_path_by_subgraphs(
    const RefinedGraph<W>& g, const GeodesicResult<W>& path, const Subgraph& g1,
    const Subgraph& g2, std::pair<int, int> cut) {
    if (!path.reachable || path.vertices.empty())
        throw Error(Errc::DecompositionError, "the path to decompose is empty");
    if (g1.edge_in.size() != g.edges.size() || g2.edge_in.size() != g.edges.size())
        throw Error(Errc::DomainError, "subgraphs do not match the host graph");

    std::set<int> shared;
    for (std::size_t v = 0; v < g.size(); ++v)
        if (g1.vertex_in[v] && g2.vertex_in[v]) shared.insert(static_cast<int>(v));
    std::set<int> cut_set{cut.first, cut.second};
    if (shared != cut_set)
        throw Error(Errc::DecompositionError,
                    "the subgraphs share " + std::to_string(shared.size()) +
                        " vertices, not exactly the declared cut");

    int x = path.vertices.front(), y = path.vertices.back();
    if (!g1.has_vertex(x) || g2.has_vertex(x))
        throw Error(Errc::DecompositionError,
                    "the start vertex does not lie strictly inside the first subgraph");
    if (!g2.has_vertex(y) || g1.has_vertex(y))
        throw Error(Errc::DecompositionError,
                    "the end vertex does not lie strictly inside the second subgraph");
    for (std::size_t e : path.edges)
        if (!g1.has_edge(e) && !g2.has_edge(e))
            throw Error(Errc::DecompositionError, "the subgraphs do not cover the path");

    std::size_t t = 0;
    while (t < path.edges.size() && g1.has_edge(path.edges[t])) ++t;
    if (t == path.edges.size())
        throw Error(Errc::DecompositionError, "the path never enters the second subgraph");
    int junction = path.vertices[t];
    if (!cut_set.count(junction))
        throw Error(Errc::DecompositionError, "the path switches subgraphs away from the cut");
    for (std::size_t k = t; k < path.edges.size(); ++k)
        if (!g2.has_edge(path.edges[k]))
            throw Error(Errc::DecompositionError, "the path re-enters the first subgraph");

    auto cut_piece = [&](std::size_t from_v, std::size_t to_v, std::size_t from_e,
                         std::size_t to_e) {
        GeodesicResult<W> part;
        part.reachable = true;
        part.distance = W(0);
        part.vertices.assign(path.vertices.begin() + static_cast<std::ptrdiff_t>(from_v),
                             path.vertices.begin() + static_cast<std::ptrdiff_t>(to_v));
        part.edges.assign(path.edges.begin() + static_cast<std::ptrdiff_t>(from_e),
                          path.edges.begin() + static_cast<std::ptrdiff_t>(to_e));
        for (std::size_t e : part.edges) part.distance = part.distance + g.edges[e].weight;
        return part;
    };
    return {cut_piece(0, t + 1, 0, t),
            cut_piece(t, path.vertices.size(), t, path.edges.size())};
}

template <typename W>
std::string graph_svg(const RefinedGraph<W>& g) {
    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    if (!g.positions.empty()) {
        min_x = max_x = g.positions[0].x;
        min_y = max_y = g.positions[0].y;
        for (const Vec2& p : g.positions) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
    double pad = 0.06 * span;
    double scale = 760.0 / (span + 2 * pad);
    auto px = [&](double x) { return (x - min_x + pad) * scale + 20.0; };
    auto py = [&](double y) { return (max_y - y + pad) * scale + 20.0; };
    double wmax = 0.0;
    for (const auto& e : g.edges) wmax = std::max(wmax, WeightOps<W>::dbl(e.weight));
    if (wmax <= 0.0) wmax = 1.0;

    std::ostringstream svg;
    double W_px = (max_x - min_x + 2 * pad) * scale + 40.0;
    double H_px = (max_y - min_y + 2 * pad) * scale + 40.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.1f %.1f\">\n", W_px,
                  H_px);
    svg << buf;
    for (const auto& e : g.edges) {
        const Vec2& a = g.positions[static_cast<std::size_t>(e.u)];
        const Vec2& b = g.positions[static_cast<std::size_t>(e.v)];
        double sw = 0.4 + 2.6 * WeightOps<W>::dbl(e.weight) / wmax;
        std::snprintf(buf, sizeof buf,
                      "  <line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                      "stroke=\"#35507a\" stroke-width=\"%.2f\"/>\n",
                      px(a.x), py(a.y), px(b.x), py(b.y), sw);
        svg << buf;
    }
    for (std::size_t v = 0; v < g.size(); ++v) {
        const Vec2& p = g.positions[v];
        std::snprintf(buf, sizeof buf,
                      "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#b8432f\"/>\n", px(p.x),
                      py(p.y));
        svg << buf;
    }
    svg << "</svg>\n";
    return svg.str();
}

namespace {

template <typename W>
BasicAssignment<W> parse_assignment(const nlohmann::json& j, bool* exact_ok) {
    BasicAssignment<W> a;
    if (!j.is_object() || !j.contains("tau0") || !j.contains("R"))
        throw Error(Errc::Parse, "assignment needs \"tau0\" and \"R\"");
    auto parse_fraction = [](const std::string& s) -> Rational {
        try {
            return Rational(s);
        } catch (const std::exception&) {
            throw Error(Errc::Parse, "\"" + s + "\" is not a fraction like \"29/416\"");
        }
    };
    auto parse_value = [&](const nlohmann::json& v) -> W {
        if constexpr (std::is_same_v<W, double>) {
            if (v.is_number()) return v.get<double>();
            if (v.is_string()) return to_double(parse_fraction(v.get<std::string>()));
        } else {
            if (v.is_string()) return parse_fraction(v.get<std::string>());
            if (v.is_number_integer()) return Rational(v.get<long long>());
            if (v.is_number()) {
                Rational q;
                if (rational_from_double(v.get<double>(), q)) return q;
                if (exact_ok) *exact_ok = false;
                return Rational(0);
            }
        }
        throw Error(Errc::Parse, "weights must be numbers or fraction strings");
    };
    for (const auto& [key, val] : j.at("tau0").items()) {
        auto dash = key.find('-');
        if (dash == std::string::npos)
            throw Error(Errc::Parse, "edge keys look like \"1-2\", got \"" + key + "\"");
        int a_idx = 0, b_idx = 0;
        try {
            a_idx = std::stoi(key.substr(0, dash));
            b_idx = std::stoi(key.substr(dash + 1));
        } catch (const std::exception&) {
            throw Error(Errc::Parse, "edge keys look like \"1-2\", got \"" + key + "\"");
        }
        if (a_idx > b_idx) std::swap(a_idx, b_idx);
        a.tau0[{a_idx, b_idx}] = parse_value(val);
    }
    for (const auto& v : j.at("R")) a.R.push_back(parse_value(v));
    return a;
}

} // namespace

WeightAssignment assignment_from_json(const nlohmann::json& j) {
    return parse_assignment<double>(j, nullptr);
}

std::optional<ExactAssignment> exact_assignment_from_json(const nlohmann::json& j) {
    bool ok = true;
    ExactAssignment a = parse_assignment<Rational>(j, &ok);
    if (!ok) return std::nullopt;
    return a;
}

WeightAssignment to_double(const ExactAssignment& a) {
    WeightAssignment d;
    for (const auto& [key, w] : a.tau0) d.tau0[key] = to_double(w);
    for (const Rational& r : a.R) d.R.push_back(to_double(r));
    return d;
}

// Explicit instantiations: the float lane and the exact lane.
template struct BasicAssignment<double>;
template struct BasicAssignment<Rational>;
template struct RefinedGraph<double>;
template struct RefinedGraph<Rational>;

template void validate_assignment<double>(const IfsSpec&, const PostCriticalData&,
                                          const BasicAssignment<double>&);
template void validate_assignment<Rational>(const IfsSpec&, const PostCriticalData&,
                                            const BasicAssignment<Rational>&);
template void rebuild_adjacency<double>(RefinedGraph<double>&);
template void rebuild_adjacency<Rational>(RefinedGraph<Rational>&);
template RefinedGraph<double> refine<double>(const IfsSpec&, const PostCriticalData&,
                                             const BasicAssignment<double>&, int);
template RefinedGraph<Rational> refine<Rational>(const IfsSpec&, const PostCriticalData&,
                                                 const BasicAssignment<Rational>&, int);
template RefinedGraph<double> refine<double>(const IfsSpec&, const BasicAssignment<double>&, int);
template RefinedGraph<Rational> refine<Rational>(const IfsSpec&, const BasicAssignment<Rational>&,
                                                 int);
template GeodesicResult<double> geodesic<double>(const RefinedGraph<double>&, int, int);
template GeodesicResult<Rational> geodesic<Rational>(const RefinedGraph<Rational>&, int, int);
template GoodAssignmentReport check_good_assignment<double>(const IfsSpec&,
                                                            const PostCriticalData&,
                                                            const BasicAssignment<double>&);
template GoodAssignmentReport check_good_assignment<Rational>(const IfsSpec&,
                                                              const PostCriticalData&,
                                                              const BasicAssignment<Rational>&);
template CompatibilityResult verify_compatibility<double>(const IfsSpec&, const PostCriticalData&,
                                                          const BasicAssignment<double>&, int,
                                                          std::size_t, std::uint64_t);
template CompatibilityResult verify_compatibility<Rational>(const IfsSpec&,
                                                            const PostCriticalData&,
                                                            const BasicAssignment<Rational>&, int,
                                                            std::size_t, std::uint64_t);
template MetricDValue<double> metric_D<double>(const IfsSpec&, const PostCriticalData&,
                                               const BasicAssignment<double>&,
                                               const EvPeriodicWord&, const EvPeriodicWord&, int);
template MetricDValue<Rational> metric_D<Rational>(const IfsSpec&, const PostCriticalData&,
                                                   const BasicAssignment<Rational>&,
                                                   const EvPeriodicWord&, const EvPeriodicWord&,
                                                   int);
template SimilitudeCheck check_similitude_under_D<double>(const IfsSpec&, const PostCriticalData&,
                                                          const BasicAssignment<double>&, Symbol,
                                                          int, std::size_t, std::uint64_t);
template SimilitudeCheck check_similitude_under_D<Rational>(const IfsSpec&,
                                                            const PostCriticalData&,
                                                            const BasicAssignment<Rational>&,
                                                            Symbol, int, std::size_t,
                                                            std::uint64_t);
template Subgraph subgraph_by_prefix<double>(const RefinedGraph<double>&, const FiniteWord&);
template Subgraph subgraph_by_prefix<Rational>(const RefinedGraph<Rational>&, const FiniteWord&);
template std::pair<GeodesicResult<double>, GeodesicResult<double>>
decompose_path_by_subgraphs<double>(const RefinedGraph<double>&, const GeodesicResult<double>&,
                                    const Subgraph&, const Subgraph&, std::pair<int, int>);
template std::pair<GeodesicResult<Rational>, GeodesicResult<Rational>>
decompose_path_by_subgraphs<Rational>(const RefinedGraph<Rational>&,
                                      const GeodesicResult<Rational>&, const Subgraph&,
                                      const Subgraph&, std::pair<int, int>);
template std::string graph_svg<double>(const RefinedGraph<double>&);
template std::string graph_svg<Rational>(const RefinedGraph<Rational>&);

} // namespace fractop
