#pragma once

#include <string>
#include <vector>

#include "fractop/automaton.hpp"
#include "fractop/ifs.hpp"

namespace fractop {

// Constants of the quantitative distance estimates. xi1/xi2/asc_c come from
// net estimation, the remaining fields from the declared ratio data.
struct MetricConstants {
    double xi1 = 0.0;    // least distance between disjoint first-level cylinders
    double xi2 = 0.0;    // least distance from a cylinder to an outside marked point
    double asc_c = 0.0;  // angle-separation constant
    double A_star = 0.0; // smallest lower Lipschitz bound
    double B_star = 0.0; // largest upper Lipschitz bound
    double r_star = 0.0; // smallest similitude ratio
    double r_sup = 0.0;  // largest similitude ratio
    double diam = 0.0;   // attractor diameter (upper estimate)
    double c1 = 0.0;     // lower sandwich constant: min{xi1, asc_c*xi2/A_star}
    double c2 = 0.0;     // upper sandwich constant: 2*diam/B_star
    double c3 = 0.0;     // comparability constant, max of the four candidate bounds
};

MetricConstants derive_constants(const IfsSpec& spec, const SeparationReport& rep);

// Bundles everything the estimates need so the expensive objects are built once.
struct MetricContext {
    IfsSpec spec;
    PostCriticalData pcd;
    TopologyAutomaton automaton;
    SeparationReport separation;
    MetricConstants consts;
};

MetricContext make_metric_context(const IfsSpec& spec, int depth = 7);

// The pair of prefixes at which two codings demonstrably part ways.
//  - DisjointSplit: the first divergent cylinders are already disjoint; both
//    prefixes have length |common| + 1.
//  - ThroughTouch: they meet at a single point that is neither coded point;
//    each prefix is the shortest cylinder excluding that point.
//  - AtCodedPoint: the touch point IS one of the coded points; that side keeps
//    its whole infinite word.
struct SeparationPrefix {
    enum class Case { DisjointSplit, ThroughTouch, AtCodedPoint };
    Case kind = Case::DisjointSplit;
    std::size_t split = 0; // length of the common prefix
    bool mu_infinite = false;
    bool nu_infinite = false;
    FiniteWord mu, nu;            // finite sides
    EvPeriodicWord mu_full, nu_full; // the full words (mu_full = x, nu_full = y)
    bool has_touch = false;
    Vec2 touch{0.0, 0.0};
};

SeparationPrefix separation_prefix(const MetricContext& ctx, const EvPeriodicWord& x,
                                   const EvPeriodicWord& y);

// max of the ratio products along the two separation prefixes; an infinite
// side contributes 0, and rho = 0 exactly when both words code one point.
double rho(const MetricContext& ctx, const EvPeriodicWord& x, const EvPeriodicWord& y);

struct SandwichResult {
    double lower = 0.0;
    double upper = 0.0;
    double distance = 0.0;
    std::size_t n = 0; // surviving time
    bool ok = false;
};

// c1 * A_star^n <= d <= c2 * B_star^n with n the surviving time.
SandwichResult distance_sandwich(const MetricContext& ctx, const EvPeriodicWord& x,
                                 const EvPeriodicWord& y);

struct ComparabilityResult {
    double max_ratio = 0.0; // worst observed max{d/rho, rho/d}
    double c3 = 0.0;
    int pairs_checked = 0;
    std::string witness; // pair attaining max_ratio
};

// Samples coding pairs and verifies c3^{-1} rho <= d <= c3 rho. A violation
// throws: it signals that the net estimates behind the constants are bad.
ComparabilityResult rho_comparability(const MetricContext& ctx, int samples, unsigned seed = 0);

struct EtaParams {
    double r_star = 0.0;      // smallest ratio of the domain system
    double r_sup = 0.0;       // largest ratio of the domain system
    double rprime_star = 0.0; // smallest ratio of the target system
    double s = 1.0;           // ratio power law exponent on the boundary symbols
};

// The explicit five-term distortion modulus; increasing, with eta(0) = 0.
double eta_modulus(const EtaParams& p, double t);

struct BoundaryLemmaResult {
    bool ok = true;
    int pairs_checked = 0;
    int pairs_with_runs = 0; // pairs whose prefix actually had interior symbols
    std::string detail;
};

// For sampled pairs: every symbol strictly between the split and the end of a
// separation prefix must be a boundary symbol (a first symbol of a marked
// point's coding).
BoundaryLemmaResult check_boundary_lemma(const MetricContext& ctx, int samples,
                                         unsigned seed = 0);

struct QsTripleResult {
    bool ok = true;
    int triples_checked = 0;
    double worst_margin = 0.0; // max of rho'(x,y) / (eta(t) * rho'(x,z))
    std::string witness;
};

// Empirical check of the distortion inequality between two systems sharing
// the same coding space: rho_K(x,y) <= t rho_K(x,z) must force
// rho_K'(x,y) <= eta(t) rho_K'(x,z).
QsTripleResult qs_triple_check(const MetricContext& from, const MetricContext& to, double s,
                               int samples, unsigned seed = 0);

// Deterministic sampler: distinct lowest codings with preperiod <= 6 and
// period <= 3, drawn from the raw mt19937 stream.
std::vector<EvPeriodicWord> sample_lowest_codings(const MetricContext& ctx, int count,
                                                  unsigned seed = 0);

} // namespace fractop
