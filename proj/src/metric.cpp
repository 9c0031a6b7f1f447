#include "fractop/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace fractop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double word_ratio(const IfsSpec& spec, const FiniteWord& w) {
    double r = 1.0;
    for (Symbol s : w) r *= spec.ratio(s);
    return r;
}

// Longest run of symbols that x shares, after dropping `offset` symbols, with
// any coding of the given point class. npos when the shifted word IS one of
// the codings, i.e. the words code the same point.
std::size_t longest_run(const PostCriticalData& pcd, int cls, const EvPeriodicWord& shifted) {
    std::size_t best = 0;
    for (const auto& w : pcd.points[static_cast<std::size_t>(cls)].codings) {
        std::size_t c = common_prefix_length(shifted, w);
        if (c == EvPeriodicWord::npos) return EvPeriodicWord::npos;
        best = std::max(best, c);
    }
    return best;
}

} // namespace

MetricConstants derive_constants(const IfsSpec& spec, const SeparationReport& rep) {
    MetricConstants c;
    c.xi1 = rep.xi1;
    c.xi2 = rep.xi2;
    c.asc_c = rep.asc_constant;
    c.A_star = spec.min_lower_bound();
    c.B_star = spec.max_upper_bound();
    c.r_star = spec.min_ratio();
    c.r_sup = spec.max_ratio();
    c.diam = rep.diam_upper;

    const double via_touch = c.asc_c * c.xi2 / c.A_star; // inf when xi2 is inf
    c.c1 = std::min(c.xi1, via_touch);
    c.c2 = 2.0 * c.diam / c.B_star;
    const double inv_xi1 = std::isinf(c.xi1) ? 0.0 : 1.0 / c.xi1;
    const double touch_term =
        std::isinf(c.xi2) ? 0.0 : c.r_sup / (c.asc_c * c.xi2);
    const double plain_term = std::isinf(c.xi2) ? 0.0 : c.r_sup / c.xi2;
    c.c3 = std::max({2.0 * c.diam / c.r_star, inv_xi1, touch_term, plain_term});
    return c;
}

MetricContext make_metric_context(const IfsSpec& spec, int depth) {
    MetricContext ctx{spec, compute_post_critical(spec), {}, {}, {}};
    ctx.automaton = build_automaton(ctx.spec, ctx.pcd);
    ctx.separation = verify_sic_asc(ctx.spec, ctx.pcd, depth);
    ctx.consts = derive_constants(ctx.spec, ctx.separation);
    return ctx;
}

SeparationPrefix separation_prefix(const MetricContext& ctx, const EvPeriodicWord& x,
                                   const EvPeriodicWord& y) {
    if (x == y) throw Error(Errc::DomainError, "separation prefix requires distinct codings");
    SeparationPrefix out;
    out.mu_full = x;
    out.nu_full = y;
    const std::size_t k = common_prefix_length(x, y);
    out.split = k;

    const Symbol i = x.at(k), j = y.at(k);
    const int state = ctx.automaton.step(TopologyAutomaton::kId, i, j);
    if (state == TopologyAutomaton::kExit) {
        out.kind = SeparationPrefix::Case::DisjointSplit;
        out.mu = x.prefix(k + 1);
        out.nu = y.prefix(k + 1);
        return out;
    }

    const AutomatonState& st = ctx.automaton.states[static_cast<std::size_t>(state)];
    out.has_touch = true;
    out.touch = ctx.spec.word_map(x.prefix(k + 1))
                    .apply(ctx.pcd.points[static_cast<std::size_t>(st.v_cls)].point);

    // Along x the touch point stays inside exactly as long as the shifted word
    // keeps tracking one of its codings; same along y with the classes swapped.
    const std::size_t run_x = longest_run(ctx.pcd, st.v_cls, x.suffix(k + 1));
    const std::size_t run_y = longest_run(ctx.pcd, st.u_cls, y.suffix(k + 1));
    if (run_x == EvPeriodicWord::npos && run_y == EvPeriodicWord::npos)
        throw Error(Errc::DomainError, "both codings name the touch point itself");

    if (run_x == EvPeriodicWord::npos) {
        out.kind = SeparationPrefix::Case::AtCodedPoint;
        out.mu_infinite = true;
        out.nu = y.prefix(k + 2 + run_y);
        return out;
    }
    if (run_y == EvPeriodicWord::npos) {
        out.kind = SeparationPrefix::Case::AtCodedPoint;
        out.nu_infinite = true;
        out.mu = x.prefix(k + 2 + run_x);
        return out;
    }
    out.kind = SeparationPrefix::Case::ThroughTouch;
    out.mu = x.prefix(k + 2 + run_x);
    out.nu = y.prefix(k + 2 + run_y);
    return out;
}

double rho(const MetricContext& ctx, const EvPeriodicWord& x, const EvPeriodicWord& y) {
    if (x == y) return 0.0;
    EvPeriodicWord lx = lowest_coding(ctx.spec, ctx.pcd, x);
    EvPeriodicWord ly = lowest_coding(ctx.spec, ctx.pcd, y);
    if (lx == ly) return 0.0;
    SeparationPrefix sp = separation_prefix(ctx, lx, ly);
    const double rm = sp.mu_infinite ? 0.0 : word_ratio(ctx.spec, sp.mu);
    const double rn = sp.nu_infinite ? 0.0 : word_ratio(ctx.spec, sp.nu);
    return std::max(rm, rn);
}

SandwichResult distance_sandwich(const MetricContext& ctx, const EvPeriodicWord& x,
                                 const EvPeriodicWord& y) {
    SurvivingTime t = surviving_time(ctx.automaton, x, y);
    if (!t.finite)
        throw Error(Errc::DomainError,
                    "sandwich needs a finite surviving time; the codings share a point "
                    "or touch forever");
    SandwichResult out;
    out.n = t.value;
    out.distance = dist(ctx.spec.eval(x), ctx.spec.eval(y));
    out.lower = ctx.consts.c1 * std::pow(ctx.consts.A_star, static_cast<double>(t.value));
    out.upper = ctx.consts.c2 * std::pow(ctx.consts.B_star, static_cast<double>(t.value));
    const double slack = 1e-9 * std::max(1.0, out.distance);
    out.ok = out.lower <= out.distance + slack && out.distance <= out.upper + slack;
    return out;
}

ComparabilityResult rho_comparability(const MetricContext& ctx, int samples, unsigned seed) {
    ComparabilityResult out;
    out.c3 = ctx.consts.c3;
    // `samples` counts pairs; draw just enough distinct words to cover it.
    const int want_words = static_cast<int>(std::ceil(std::sqrt(2.0 * samples))) + 2;
    std::vector<EvPeriodicWord> words = sample_lowest_codings(ctx, want_words, seed);
    for (std::size_t a = 0; a < words.size() && out.pairs_checked < samples; ++a) {
        for (std::size_t b = a + 1; b < words.size() && out.pairs_checked < samples; ++b) {
            double d = dist(ctx.spec.eval(words[a]), ctx.spec.eval(words[b]));
            double r = rho(ctx, words[a], words[b]);
            if (r == 0.0 || d == 0.0) continue; // same point through two codings
            double ratio = std::max(d / r, r / d);
            ++out.pairs_checked;
            if (ratio > out.max_ratio) {
                out.max_ratio = ratio;
                out.witness = words[a].str() + " vs " + words[b].str();
            }
        }
    }
    if (out.max_ratio > out.c3)
        throw Error(Errc::GeometryMismatch,
                    "distance/rho ratio " + std::to_string(out.max_ratio) + " exceeds c3 = " +
                        std::to_string(out.c3) + " at " + out.witness +
                        "; the separation estimates are too loose");
    return out;
}

double eta_modulus(const EtaParams& p, double t) {
    if (t < 0.0) throw Error(Errc::DomainError, "modulus argument must be nonnegative");
    if (!(p.r_star > 0.0 && p.r_star < 1.0) || !(p.r_sup > 0.0 && p.r_sup < 1.0) ||
        !(p.rprime_star > 0.0 && p.rprime_star < 1.0) || !(p.s > 0.0))
        throw Error(Errc::DomainError, "modulus parameters must lie in (0,1) with s > 0");
    if (t == 0.0) return 0.0; // every branch is a*t^b with b > 0

    const double r = p.r_star, R = p.r_sup, q = p.rprime_star, s = p.s;
    const double ts = std::pow(t, s);
    const double drift = std::pow(q, (std::log(t) - std::log(r)) / std::log(R));
    const double tail = std::pow(q, std::log(t) / std::log(R));

    const double t1 = t / (q * r);
    const double t2 = t * drift / r;
    const double t3 = ts * drift / (q * q * std::pow(r, s));
    const double t4 = ts / (q * q * q * std::pow(r, 2.0 * s));
    const double t5 = ts * tail / (q * q * q * std::pow(r, 2.0 * s));
    return std::max({t1, t2, t3, t4, t5});
}

BoundaryLemmaResult check_boundary_lemma(const MetricContext& ctx, int samples, unsigned seed) {
    BoundaryLemmaResult out;
    const auto& boundary = ctx.pcd.boundary_symbols;
    auto is_boundary = [&](Symbol s) {
        return std::find(boundary.begin(), boundary.end(), s) != boundary.end();
    };
    auto check_run = [&](const EvPeriodicWord& w, std::size_t split, std::size_t upto,
                         bool infinite) {
        // Interior symbols: positions split+2 .. upto-1 (1-based); an infinite
        // side constrains its entire tail, which one full phase cycle covers.
        std::size_t lo = split + 1; // 0-based index of position split+2
        std::size_t hi = infinite ? lo + w.phase_count() : upto - 1;
        bool any = false;
        for (std::size_t idx = lo; idx < hi; ++idx) {
            any = true;
            if (!is_boundary(w.at(idx))) {
                out.ok = false;
                std::ostringstream os;
                os << "symbol " << w.at(idx) << " at position " << (idx + 1) << " of " << w.str()
                   << " is not a boundary symbol";
                out.detail = os.str();
            }
        }
        return any;
    };

    const int want_words = static_cast<int>(std::ceil(std::sqrt(2.0 * samples))) + 2;
    std::vector<EvPeriodicWord> words = sample_lowest_codings(ctx, want_words, seed);
    for (std::size_t a = 0; a < words.size() && out.ok && out.pairs_checked < samples; ++a) {
        for (std::size_t b = a + 1; b < words.size() && out.ok && out.pairs_checked < samples;
             ++b) {
            SeparationPrefix sp = separation_prefix(ctx, words[a], words[b]);
            ++out.pairs_checked;
            if (sp.kind == SeparationPrefix::Case::DisjointSplit) continue;
            bool any = false;
            any |= sp.mu_infinite ? check_run(words[a], sp.split, 0, true)
                                  : check_run(words[a], sp.split, sp.mu.size(), false);
            any |= sp.nu_infinite ? check_run(words[b], sp.split, 0, true)
                                  : check_run(words[b], sp.split, sp.nu.size(), false);
            if (any) ++out.pairs_with_runs;
        }
    }
    return out;
}

QsTripleResult qs_triple_check(const MetricContext& from, const MetricContext& to, double s,
                               int samples, unsigned seed) {
    QsTripleResult out;
    EtaParams params{from.spec.min_ratio(), from.spec.max_ratio(), to.spec.min_ratio(), s};
    const int want_words = static_cast<int>(std::ceil(std::cbrt(2.0 * samples))) + 3;
    std::vector<EvPeriodicWord> words = sample_lowest_codings(from, want_words, seed);
    const std::size_t n = words.size();

    // Distances in both systems for every unordered pair, computed once.
    std::vector<double> rf(n * n, 0.0), rt(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            rf[a * n + b] = rf[b * n + a] = rho(from, words[a], words[b]);
            rt[a * n + b] = rt[b * n + a] = rho(to, words[a], words[b]);
        }
    }

    for (std::size_t a = 0; a < n && out.triples_checked < samples; ++a) {
        for (std::size_t b = 0; b < n && out.triples_checked < samples; ++b) {
            if (b == a) continue;
            for (std::size_t c = b + 1; c < n && out.triples_checked < samples; ++c) {
                if (c == a) continue;
                double rx_y = rf[a * n + b], rx_z = rf[a * n + c];
                if (rx_y <= 0.0 || rx_z <= 0.0) continue;
                double t = rx_y / rx_z;
                double gy = rt[a * n + b], gz = rt[a * n + c];
                if (gz <= 0.0) continue;
                double bound = eta_modulus(params, t) * gz;
                double margin = gy / bound;
                ++out.triples_checked;
                if (margin > out.worst_margin) {
                    out.worst_margin = margin;
                    out.witness = words[a].str() + ", " + words[b].str() + ", " + words[c].str();
                }
                if (margin > 1.0 + 1e-9) out.ok = false;
            }
        }
    }
    return out;
}

std::vector<EvPeriodicWord> sample_lowest_codings(const MetricContext& ctx, int count,
                                                  unsigned seed) {
    std::mt19937 rng(seed == 0 ? 0x5eedu : seed);
    auto draw = [&](std::uint32_t m) { return static_cast<int>(rng() % m); };
    const int n = ctx.spec.size();

    std::set<std::pair<FiniteWord, FiniteWord>> seen;
    std::vector<EvPeriodicWord> out;
    int attempts = 0;
    const int max_attempts = count * 40 + 200;
    while (static_cast<int>(out.size()) < count && attempts++ < max_attempts) {
        FiniteWord pre, per;
        std::size_t pre_len = static_cast<std::size_t>(draw(7));
        std::size_t per_len = static_cast<std::size_t>(draw(3)) + 1;
        for (std::size_t k = 0; k < pre_len; ++k)
            pre.push_back(1 + draw(static_cast<std::uint32_t>(n)));
        for (std::size_t k = 0; k < per_len; ++k)
            per.push_back(1 + draw(static_cast<std::uint32_t>(n)));
        EvPeriodicWord w = EvPeriodicWord::make(std::move(pre), std::move(per));
        EvPeriodicWord low = lowest_coding(ctx.spec, ctx.pcd, w);
        if (seen.emplace(low.pre, low.per).second) out.push_back(low);
    }
    return out;
}

} // namespace fractop
