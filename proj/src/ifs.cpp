#include "fractop/ifs.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <array>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace fractop {

using nlohmann::json;

Similitude IfsSpec::word_map(const FiniteWord& w) const {
    Similitude acc; // identity up to ratio: build by composing from the left
    bool first = true;
    for (Symbol s : w) {
        if (first) {
            acc = map(s);
            first = false;
        } else {
            acc = acc.compose(map(s));
        }
    }
    if (first) {
        acc.ratio = 1.0;
        acc.rotation = 0.0;
        acc.reflect = false;
        acc.translation = {0.0, 0.0};
    }
    return acc;
}

double IfsSpec::min_ratio() const {
    double r = 1.0;
    for (const auto& m : maps) r = std::min(r, m.ratio);
    return r;
}

double IfsSpec::max_ratio() const {
    double r = 0.0;
    for (const auto& m : maps) r = std::max(r, m.ratio);
    return r;
}

double IfsSpec::min_lower_bound() const {
    double r = 1.0;
    for (const auto& b : lipschitz_bounds) r = std::min(r, b.first);
    return r;
}

double IfsSpec::max_upper_bound() const {
    double r = 0.0;
    for (const auto& b : lipschitz_bounds) r = std::max(r, b.second);
    return r;
}

Vec2 IfsSpec::eval(const EvPeriodicWord& w) const {
    // Fixed point of the period composition, then the preperiod applied on top.
    Similitude period = word_map(w.per);
    Vec2 z = period.fixed_point();
    Similitude head = word_map(w.pre);
    return head.apply(z);
}

double IfsSpec::diam_bound() const {
    Vec2 z0 = anchor();
    double m = 0.0;
    for (const auto& f : maps) m = std::max(m, dist(z0, f.apply(z0)));
    return 2.0 * m / (1.0 - max_ratio());
}

namespace {

FiniteWord word_from_json(const json& j, const char* what) {
    if (!j.is_array()) throw Error(Errc::Parse, std::string(what) + " must be an array");
    FiniteWord w;
    for (const auto& e : j) {
        if (!e.is_number_integer()) throw Error(Errc::Parse, std::string(what) + " must hold integers");
        w.push_back(e.get<int>());
    }
    return w;
}

EvPeriodicWord ev_word_from_json(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("per"))
        throw Error(Errc::Parse, std::string(what) + " must be {\"pre\":[...],\"per\":[...]}");
    FiniteWord pre = j.contains("pre") ? word_from_json(j.at("pre"), what) : FiniteWord{};
    FiniteWord per = word_from_json(j.at("per"), what);
    if (per.empty()) throw Error(Errc::Parse, std::string(what) + " has an empty period");
    return EvPeriodicWord::make(std::move(pre), std::move(per));
}

json ev_word_to_json(const EvPeriodicWord& w) {
    return json{{"pre", w.pre}, {"per", w.per}};
}

} // namespace

IfsSpec IfsSpec::from_json(const json& j) {
    IfsSpec spec;
    if (!j.is_object() || !j.contains("maps") || !j.at("maps").is_array() || j.at("maps").empty())
        throw Error(Errc::Parse, "spec needs a non-empty \"maps\" array");
    for (const auto& m : j.at("maps")) {
        Similitude f;
        f.ratio = m.at("ratio").get<double>();
        if (!(f.ratio > 0.0 && f.ratio < 1.0))
            throw Error(Errc::InvalidSpec, "map ratio must lie in (0,1)");
        f.rotation = m.value("rotation_deg", 0.0) * 3.14159265358979323846 / 180.0;
        f.reflect = m.value("reflect", false);
        auto t = m.at("translation");
        if (!t.is_array() || t.size() != 2)
            throw Error(Errc::Parse, "translation must be [x, y]");
        f.translation = {t.at(0).get<double>(), t.at(1).get<double>()};
        spec.maps.push_back(f);
    }
    int n = spec.size();
    if (j.contains("identifications")) {
        for (const auto& idj : j.at("identifications")) {
            Identification id;
            id.i = idj.at("i").get<int>();
            id.j = idj.at("j").get<int>();
            if (id.i < 1 || id.i > n || id.j < 1 || id.j > n || id.i == id.j)
                throw Error(Errc::InvalidSpec, "identification symbols must be distinct and in 1..N");
            id.u = ev_word_from_json(idj.at("u"), "identification u");
            id.v = ev_word_from_json(idj.at("v"), "identification v");
            for (Symbol s : id.u.pre)
                if (s < 1 || s > n) throw Error(Errc::InvalidSpec, "identification u out of alphabet");
            for (Symbol s : id.u.per)
                if (s < 1 || s > n) throw Error(Errc::InvalidSpec, "identification u out of alphabet");
            for (Symbol s : id.v.pre)
                if (s < 1 || s > n) throw Error(Errc::InvalidSpec, "identification v out of alphabet");
            for (Symbol s : id.v.per)
                if (s < 1 || s > n) throw Error(Errc::InvalidSpec, "identification v out of alphabet");
            spec.identifications.push_back(std::move(id));
        }
    }
    spec.tolerance = j.value("tolerance", 1e-9);
    if (!(spec.tolerance > 0.0)) throw Error(Errc::InvalidSpec, "tolerance must be positive");
    for (const auto& m : spec.maps) spec.lipschitz_bounds.emplace_back(m.ratio, m.ratio);
    if (j.contains("lipschitz_bounds")) {
        const auto& lb = j.at("lipschitz_bounds");
        if (!lb.is_array() || lb.size() != static_cast<std::size_t>(n))
            throw Error(Errc::Parse, "lipschitz_bounds must list one [lower, upper] per map");
        for (int k = 0; k < n; ++k) {
            const auto& pairj = lb.at(static_cast<std::size_t>(k));
            double lo = pairj.at(0).get<double>();
            double hi = pairj.at(1).get<double>();
            if (!(lo > 0.0 && lo <= hi && hi < 1.0))
                throw Error(Errc::InvalidSpec, "lipschitz_bounds must satisfy 0 < lower <= upper < 1");
            spec.lipschitz_bounds[static_cast<std::size_t>(k)] = {lo, hi};
        }
    }
    // Verify each identification numerically; a mismatch is a spec error, not
    // a tolerance issue, so the check uses a hard multiple of the tolerance.
    for (const auto& id : spec.identifications) {
        Vec2 lhs = spec.map(id.i).apply(spec.eval(id.v));
        Vec2 rhs = spec.map(id.j).apply(spec.eval(id.u));
        if (dist(lhs, rhs) > 100.0 * spec.tolerance)
            throw Error(Errc::InvalidSpec,
                        "identification (" + std::to_string(id.i) + "," + std::to_string(id.j) +
                            ") does not close numerically");
    }
    return spec;
}

IfsSpec IfsSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::Parse, std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return from_json(j);
}

json IfsSpec::to_json() const {
    json maps_j = json::array();
    for (const auto& m : maps) {
        maps_j.push_back({{"ratio", m.ratio},
                          {"rotation_deg", m.rotation * 180.0 / 3.14159265358979323846},
                          {"reflect", m.reflect},
                          {"translation", {m.translation.x, m.translation.y}}});
    }
    json ids_j = json::array();
    for (const auto& id : identifications) {
        ids_j.push_back({{"i", id.i}, {"j", id.j}, {"u", ev_word_to_json(id.u)}, {"v", ev_word_to_json(id.v)}});
    }
    return json{{"maps", maps_j}, {"identifications", ids_j}, {"tolerance", tolerance}};
}

int PostCriticalData::class_of(const EvPeriodicWord& w) const {
    for (std::size_t c = 0; c < points.size(); ++c)
        for (const auto& cw : points[c].codings)
            if (cw == w) return static_cast<int>(c);
    return -1;
}

int PostCriticalData::class_of_point(const Vec2& p, double tol) const {
    for (std::size_t c = 0; c < points.size(); ++c)
        if (dist(points[c].point, p) <= tol) return static_cast<int>(c);
    return -1;
}

bool PostCriticalData::has_coding_starting_with(int cls, Symbol i) const {
    for (const auto& w : points.at(static_cast<std::size_t>(cls)).codings)
        if (w.at(0) == i) return true;
    return false;
}

int PostCriticalData::shift_class(int cls, Symbol i) const {
    for (const auto& w : points.at(static_cast<std::size_t>(cls)).codings)
        if (w.at(0) == i) return class_of(w.suffix(1));
    return -1;
}

PostCriticalData compute_post_critical(const IfsSpec& spec) {
    constexpr std::size_t kWordCap = 10000;
    const double tol = 100.0 * spec.tolerance;

    std::set<std::pair<FiniteWord, FiniteWord>> seen;
    std::vector<EvPeriodicWord> words;
    auto insert_word = [&](const EvPeriodicWord& w) {
        if (seen.emplace(w.pre, w.per).second) {
            words.push_back(w);
            if (words.size() > kWordCap)
                throw Error(Errc::NotPcf, "post-critical closure exceeded 10000 codings");
            return true;
        }
        return false;
    };

    // Critical codings: both sides of every identification.
    std::vector<EvPeriodicWord> critical_seeds;
    for (const auto& id : spec.identifications) {
        critical_seeds.push_back(id.v.with_prefix({id.i}));
        critical_seeds.push_back(id.u.with_prefix({id.j}));
    }

    // sigma^n closure for n >= 1: seed with the first shift, then close.
    std::deque<EvPeriodicWord> queue;
    for (const auto& w : critical_seeds)
        if (insert_word(w.suffix(1))) queue.push_back(w.suffix(1));
    while (!queue.empty()) {
        EvPeriodicWord w = queue.front();
        queue.pop_front();
        EvPeriodicWord s = w.suffix(1);
        if (insert_word(s)) queue.push_back(s);
    }

    PostCriticalData pcd;
    auto regroup = [&]() {
        pcd.points.clear();
        for (const auto& w : words) {
            Vec2 p = spec.eval(w);
            int cls = pcd.class_of_point(p, tol);
            if (cls < 0) {
                pcd.points.push_back(PointClass{p, {w}});
            } else {
                pcd.points[static_cast<std::size_t>(cls)].codings.push_back(w);
            }
        }
        for (auto& pc : pcd.points) std::sort(pc.codings.begin(), pc.codings.end(), lex_less);
    };
    regroup();

    // Critical classes, grouped geometrically. A critical point that is itself
    // post-critical must hand its complete coding set to its point class, and
    // the closure has to absorb the shifts of any coding added this way.
    for (int round = 0; round < 64; ++round) {
        pcd.critical.clear();
        for (const auto& id : spec.identifications) {
            std::array<std::pair<Symbol, const EvPeriodicWord*>, 2> sides = {
                std::make_pair(id.i, &id.v), std::make_pair(id.j, &id.u)};
            Vec2 z = spec.map(id.i).apply(spec.eval(id.v));
            int ci = -1;
            for (std::size_t c = 0; c < pcd.critical.size(); ++c)
                if (dist(pcd.critical[c].point, z) <= tol) ci = static_cast<int>(c);
            if (ci < 0) {
                pcd.critical.push_back(CriticalClass{z, {}, {}});
                ci = static_cast<int>(pcd.critical.size()) - 1;
            }
            auto& cc = pcd.critical[static_cast<std::size_t>(ci)];
            for (const auto& [sym, tail] : sides) {
                int cls = pcd.class_of(*tail);
                if (cls < 0) throw Error(Errc::Internal, "identification tail escaped the closure");
                for (const auto& w : pcd.points[static_cast<std::size_t>(cls)].codings) {
                    EvPeriodicWord full = w.with_prefix({sym});
                    if (std::find(cc.codings.begin(), cc.codings.end(), full) == cc.codings.end())
                        cc.codings.push_back(full);
                }
            }
        }
        for (auto& cc : pcd.critical) {
            std::sort(cc.codings.begin(), cc.codings.end(), lex_less);
            for (const auto& w : cc.codings)
                if (std::find(cc.symbols.begin(), cc.symbols.end(), w.at(0)) == cc.symbols.end())
                    cc.symbols.push_back(w.at(0));
            std::sort(cc.symbols.begin(), cc.symbols.end());
        }

        // Recurrent case: a critical point coinciding with a post-critical
        // point contributes its codings to pi^{-1}(P).
        bool grew = false;
        for (const auto& cc : pcd.critical) {
            if (pcd.class_of_point(cc.point, tol) < 0) continue;
            for (const auto& w : cc.codings) {
                if (insert_word(w)) {
                    grew = true;
                    EvPeriodicWord s = w.suffix(1);
                    if (insert_word(s)) {
                        // close under sigma again
                        std::deque<EvPeriodicWord> q2{s};
                        while (!q2.empty()) {
                            EvPeriodicWord x = q2.front();
                            q2.pop_front();
                            EvPeriodicWord xs = x.suffix(1);
                            if (insert_word(xs)) q2.push_back(xs);
                        }
                    }
                }
            }
        }
        if (!grew) break;
        regroup();
        if (round == 63) throw Error(Errc::NotPcf, "critical/post-critical closure did not stabilize");
    }

    // Canonical class order: ascending lowest coding. Keeps class indices
    // independent of the order identifications appear in the input.
    std::sort(pcd.points.begin(), pcd.points.end(), [](const PointClass& a, const PointClass& b) {
        return lex_less(a.codings.front(), b.codings.front());
    });

    pcd.codings = words;
    std::sort(pcd.codings.begin(), pcd.codings.end(), lex_less);
    std::set<Symbol> fs;
    for (const auto& w : pcd.codings) fs.insert(w.at(0));
    pcd.boundary_symbols.assign(fs.begin(), fs.end());
    return pcd;
}

std::vector<EvPeriodicWord> coding_class(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const EvPeriodicWord& w0) {
    (void)spec;
    constexpr std::size_t kClassCap = 512;
    EvPeriodicWord start = EvPeriodicWord::make(w0.pre, w0.per);
    std::vector<EvPeriodicWord> out{start};
    std::deque<EvPeriodicWord> queue{start};
    auto known = [&](const EvPeriodicWord& w) {
        return std::find(out.begin(), out.end(), w) != out.end();
    };
    while (!queue.empty()) {
        EvPeriodicWord w = queue.front();
        queue.pop_front();
        for (std::size_t k = 0; k < w.phase_count(); ++k) {
            EvPeriodicWord s = w.suffix(k);
            for (const auto& cc : pcd.critical) {
                bool member = std::find(cc.codings.begin(), cc.codings.end(), s) != cc.codings.end();
                if (!member) continue;
                for (const auto& alt : cc.codings) {
                    if (alt == s) continue;
                    EvPeriodicWord cand = alt.with_prefix(w.prefix(k));
                    if (!known(cand)) {
                        out.push_back(cand);
                        queue.push_back(cand);
                        if (out.size() > kClassCap)
                            throw Error(Errc::RewriteOverflow, "coding class exceeded cap for " + w0.str());
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), lex_less);
    return out;
}

EvPeriodicWord lowest_coding(const IfsSpec& spec, const PostCriticalData& pcd,
                             const EvPeriodicWord& w) {
    return coding_class(spec, pcd, w).front();
}

namespace {

struct Cloud {
    std::vector<Vec2> pts;
};

double cloud_min_dist(const Cloud& a, const Cloud& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : a.pts)
        for (const auto& q : b.pts) best = std::min(best, dist(p, q));
    return best;
}

} // namespace

SeparationReport verify_sic_asc(const IfsSpec& spec, const PostCriticalData& pcd, int depth) {
    SeparationReport rep;
    const int n = spec.size();
    if (depth < 1) depth = 1;

    // Adaptive nets per first-level cylinder: every word is refined until its
    // ratio drops below 2^-depth, so each net point covers its cylinder within
    // the same mesh no matter how unequal the contraction ratios are.
    Vec2 z0 = spec.anchor();
    double diam0 = spec.diam_bound();
    const double target_r = std::pow(0.5, depth);
    constexpr std::size_t kNetCap = 60000;

    std::vector<Cloud> clouds(static_cast<std::size_t>(n));
    double emitted_r = 0.0; // largest ratio that actually made it into a net
    for (int i = 1; i <= n; ++i) {
        auto& c = clouds[static_cast<std::size_t>(i - 1)];
        std::vector<Similitude> stack{spec.map(i)};
        while (!stack.empty()) {
            Similitude f = stack.back();
            stack.pop_back();
            if (f.ratio > target_r && c.pts.size() + stack.size() < kNetCap) {
                for (const auto& g : spec.maps) stack.push_back(f.compose(g));
            } else {
                emitted_r = std::max(emitted_r, f.ratio);
                c.pts.push_back(f.apply(z0));
            }
        }
    }
    rep.mesh = emitted_r * diam0;

    // Diameter estimates: net points lie in K, every point of K lies within
    // mesh of some net point.
    double dl = 0.0;
    {
        std::vector<Vec2> all;
        for (const auto& c : clouds) all.insert(all.end(), c.pts.begin(), c.pts.end());
        for (std::size_t a = 0; a < all.size(); ++a)
            for (std::size_t b = a + 1; b < all.size(); ++b) dl = std::max(dl, dist(all[a], all[b]));
    }
    rep.diam_lower = dl;
    rep.diam_upper = dl + 2.0 * rep.mesh;

    // Pair table from the declared identifications.
    std::vector<int> touch(static_cast<std::size_t>(n * n), -1); // critical class per ordered pair
    for (const auto& id : spec.identifications) {
        Vec2 z = spec.map(id.i).apply(spec.eval(id.v));
        int ci = -1;
        for (std::size_t c = 0; c < pcd.critical.size(); ++c)
            if (dist(pcd.critical[c].point, z) <= 100.0 * spec.tolerance) ci = static_cast<int>(c);
        touch[static_cast<std::size_t>((id.i - 1) * n + (id.j - 1))] = ci;
        touch[static_cast<std::size_t>((id.j - 1) * n + (id.i - 1))] = ci;
    }

    rep.asc_constant = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            const Cloud& ci = clouds[static_cast<std::size_t>(i - 1)];
            const Cloud& cj = clouds[static_cast<std::size_t>(j - 1)];
            int cc = touch[static_cast<std::size_t>((i - 1) * n + (j - 1))];
            if (cc < 0) {
                double gap = cloud_min_dist(ci, cj) - 2.0 * rep.mesh;
                if (gap <= 0.0) {
                    rep.sic_ok = false;
                    rep.violations.push_back("cylinders " + std::to_string(i) + " and " +
                                             std::to_string(j) +
                                             " meet but carry no identification");
                } else {
                    rep.xi1 = std::min(rep.xi1, gap);
                }
                continue;
            }
            // Declared touching pair: every near-contact must happen near the
            // declared point, otherwise a second intersection exists.
            Vec2 z = pcd.critical[static_cast<std::size_t>(cc)].point;
            double contact_band = 2.0 * rep.mesh + spec.tolerance;
            double far = 4.0 * rep.mesh + spec.tolerance;
            bool second = false;
            double asc_here = std::numeric_limits<double>::infinity();
            for (const auto& p : ci.pts) {
                for (const auto& q : cj.pts) {
                    double d = dist(p, q);
                    double dpz = dist(p, z), dqz = dist(q, z);
                    if (d <= contact_band && (dpz > far || dqz > far)) second = true;
                    double m = std::max(dpz, dqz);
                    if (m > 4.0 * rep.mesh) asc_here = std::min(asc_here, d / m);
                }
            }
            if (second) {
                rep.sic_ok = false;
                rep.violations.push_back("cylinders " + std::to_string(i) + " and " +
                                         std::to_string(j) +
                                         " appear to intersect away from the declared point");
            }
            rep.asc_constant = std::min(rep.asc_constant, asc_here);
        }
    }
    if (!std::isfinite(rep.asc_constant)) rep.asc_constant = 0.0;
    rep.asc_ok = rep.asc_constant > 0.0 || spec.identifications.empty();
    if (spec.identifications.empty()) rep.asc_constant = 1.0;

    // xi2: distance from each cylinder to the post-critical points outside it.
    for (int i = 1; i <= n; ++i) {
        for (std::size_t c = 0; c < pcd.points.size(); ++c) {
            bool inside = false;
            for (const auto& w : pcd.points[c].codings)
                if (w.at(0) == i) inside = true;
            if (inside) continue;
            double gap = std::numeric_limits<double>::infinity();
            for (const auto& p : clouds[static_cast<std::size_t>(i - 1)].pts)
                gap = std::min(gap, dist(p, pcd.points[c].point));
            gap -= rep.mesh;
            if (gap <= 0.0) {
                rep.sic_ok = false;
                rep.violations.push_back("post-critical point " + std::to_string(c) +
                                         " touches cylinder " + std::to_string(i) +
                                         " but has no coding inside it");
            } else {
                rep.xi2 = std::min(rep.xi2, gap);
            }
        }
    }
    return rep;
}

bool cylinders_intersect(const IfsSpec& spec, const PostCriticalData& pcd, const FiniteWord& I,
                         const FiniteWord& J) {
    if (I.size() != J.size())
        throw Error(Errc::Internal, "cylinder intersection requires equal word lengths");
    const int n = spec.size();
    // Ordered pair table (i,j) -> (u class, v class) with f_i(v) = f_j(u).
    std::vector<std::pair<int, int>> table(static_cast<std::size_t>(n * n), {-1, -1});
    for (const auto& id : spec.identifications) {
        int vu = pcd.class_of(id.u);
        int vv = pcd.class_of(id.v);
        if (vu < 0 || vv < 0) throw Error(Errc::Internal, "identification tails missing from closure");
        table[static_cast<std::size_t>((id.i - 1) * n + (id.j - 1))] = {vu, vv};
        table[static_cast<std::size_t>((id.j - 1) * n + (id.i - 1))] = {vv, vu};
    }

    bool diagonal = true; // state Id
    int ucls = -1, vcls = -1;
    for (std::size_t k = 0; k < I.size(); ++k) {
        Symbol a = I[k], b = J[k];
        if (diagonal) {
            if (a == b) continue;
            auto e = table[static_cast<std::size_t>((a - 1) * n + (b - 1))];
            if (e.first < 0) return false;
            ucls = e.first;
            vcls = e.second;
            diagonal = false;
        } else {
            // f_a(v2) = v1 and f_b(u2) = u1 must both be solvable in P.
            if (!pcd.has_coding_starting_with(vcls, a)) return false;
            if (!pcd.has_coding_starting_with(ucls, b)) return false;
            vcls = pcd.shift_class(vcls, a);
            ucls = pcd.shift_class(ucls, b);
            if (vcls < 0 || ucls < 0) throw Error(Errc::Internal, "shift escaped the point classes");
        }
    }
    return true;
}

} // namespace fractop
