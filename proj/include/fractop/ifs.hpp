#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fractop/common.hpp"
#include "fractop/words.hpp"

namespace fractop {

// Declared coincidence f_i(pi(v)) = f_j(pi(u)) between two first-level
// cylinders. u and v are codings of post-critical points.
struct Identification {
    Symbol i = 0;
    Symbol j = 0;
    EvPeriodicWord u;
    EvPeriodicWord v;
};

struct IfsSpec {
    std::vector<Similitude> maps; // index 0 holds map 1
    std::vector<Identification> identifications;
    std::vector<std::pair<double, double>> lipschitz_bounds; // per map, defaults (ratio, ratio)
    double tolerance = 1e-9;

    int size() const { return static_cast<int>(maps.size()); }
    const Similitude& map(Symbol i) const { return maps.at(static_cast<std::size_t>(i - 1)); }
    Similitude word_map(const FiniteWord& w) const;

    double ratio(Symbol i) const { return map(i).ratio; }
    double min_ratio() const; // r_*
    double max_ratio() const; // r^*
    double min_lower_bound() const; // A_*
    double max_upper_bound() const; // B^*

    // pi(w): the preperiod maps are composed onto the exact fixed point of the
    // period composition, so no iteration error enters.
    Vec2 eval(const EvPeriodicWord& w) const;

    // A point of K used as the anchor for depth nets (fixed point of map 1).
    Vec2 anchor() const { return maps.front().fixed_point(); }

    // Upper bound for diam(K) from the anchor's displacement under each map.
    double diam_bound() const;

    static IfsSpec from_json(const nlohmann::json& j);
    static IfsSpec load(const std::string& path);
    nlohmann::json to_json() const;
};

// One point together with every coding the closure discovered for it.
struct PointClass {
    Vec2 point;
    std::vector<EvPeriodicWord> codings; // sorted lexicographically, first is lowest
};

// A critical point (a first-level cylinder coincidence) with its full coding
// class and the symbols of the cylinders that contain it.
struct CriticalClass {
    Vec2 point;
    std::vector<EvPeriodicWord> codings; // sorted lexicographically
    std::vector<Symbol> symbols;         // distinct first symbols of the codings
};

struct PostCriticalData {
    std::vector<PointClass> points;            // the post-critical set P
    std::vector<CriticalClass> critical;       // the critical set C with codings
    std::vector<EvPeriodicWord> codings;       // all codings of P, sorted
    std::vector<Symbol> boundary_symbols;      // first symbols of codings of P

    // Index into points for a coding of a post-critical point; -1 when the
    // word codes no point of P.
    int class_of(const EvPeriodicWord& w) const;

    // Index into points of the class whose point matches geometrically.
    int class_of_point(const Vec2& p, double tol) const;

    bool has_coding_starting_with(int cls, Symbol i) const;

    // Class of f_i^{-1}(point of cls); requires a coding starting with i.
    int shift_class(int cls, Symbol i) const;
};

// Sigma-closure of the identification codings, grouped into point classes.
// Caps the closure at 10000 words and reports NotPcf beyond that.
PostCriticalData compute_post_critical(const IfsSpec& spec);

// Least coding of the point pi(w) in lexicographic order, computed by suffix
// rewriting through the critical coding classes.
EvPeriodicWord lowest_coding(const IfsSpec& spec, const PostCriticalData& pcd,
                             const EvPeriodicWord& w);

// Every coding of the point pi(w) reachable through critical-class suffix
// substitution, sorted lexicographically.
std::vector<EvPeriodicWord> coding_class(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const EvPeriodicWord& w);

struct SeparationReport {
    bool sic_ok = true;
    bool asc_ok = true;
    double xi1 = std::numeric_limits<double>::infinity(); // lower bound, +inf when no disjoint pair
    double xi2 = std::numeric_limits<double>::infinity(); // lower bound, +inf when no exterior point
    double asc_constant = 0.0;  // estimated angle separation constant
    double diam_lower = 0.0;
    double diam_upper = 0.0;
    double mesh = 0.0;          // depth-net resolution used for the bounds
    std::vector<std::string> violations;
};

// Depth-net verification of the single intersection and angle separation
// conditions; the xi1/xi2 separation bounds carry mesh corrections.
SeparationReport verify_sic_asc(const IfsSpec& spec, const PostCriticalData& pcd, int depth = 6);

// True when cylinders f_I(K) and f_J(K) intersect, decided symbolically from
// the declared identifications (|I| and |J| may differ).
bool cylinders_intersect(const IfsSpec& spec, const PostCriticalData& pcd, const FiniteWord& I,
                         const FiniteWord& J);

} // namespace fractop
