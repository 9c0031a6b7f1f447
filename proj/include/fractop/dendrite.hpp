#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fractop/ifs.hpp"
#include "fractop/words.hpp"

namespace fractop {

// Level-k cylinder/touch-point incidence structure. Cylinder vertices are the
// words of length k in lexicographic order; every point shared by two or more
// of those cylinders becomes a point vertex linked to each cylinder containing
// it. For a dendrite attractor this bipartite graph is a tree at every level,
// and paths in it give the maximal-block decomposition of arcs.
struct IncidenceGraph {
    int level = 0;
    std::vector<FiniteWord> cylinders; // lexicographic order

    struct TouchPoint {
        EvPeriodicWord coding;      // canonical (lowest) coding of the point
        std::vector<int> cylinders; // indices of the cylinders containing it
    };
    std::vector<TouchPoint> points;

    // Adjacency over cylinder vertices 0..C-1 followed by point vertices
    // C..C+P-1, in a single vertex numbering.
    std::vector<std::vector<int>> adj;

    int cylinder_count() const { return static_cast<int>(cylinders.size()); }
    int vertex_count() const { return static_cast<int>(adj.size()); }
    int edge_count() const;
    int cylinder_index(const FiniteWord& w) const;      // -1 when absent
    int point_index(const EvPeriodicWord& canon) const; // -1 when absent
};

IncidenceGraph build_incidence(const IfsSpec& spec, const PostCriticalData& pcd, int level);

struct DendriteCertificate {
    bool ok = false;
    int depth_checked = 0;
    std::string witness; // cycle or disconnection description when !ok

    explicit operator bool() const { return ok; }
};

// Certifies the attractor is tree-like: the incidence graph must be connected
// and acyclic at every level 1..depth.
DendriteCertificate certify_dendrite(const IfsSpec& spec, const PostCriticalData& pcd,
                                     int depth = 3);
DendriteCertificate certify_dendrite(const IfsSpec& spec, int depth = 3);

// Maximal single-cylinder blocks of the arc from a to b, with blocks taken at
// the given word length. joints[j] is the point shared by cylinders j and j+1.
struct ArcChain {
    std::pair<EvPeriodicWord, EvPeriodicWord> endpoints;
    std::vector<FiniteWord> cylinders;
    std::vector<EvPeriodicWord> joints;
};

ArcChain arc_chain(const IfsSpec& spec, const PostCriticalData& pcd, const EvPeriodicWord& a,
                   const EvPeriodicWord& b, int level);

// The unique point lying on all three pairwise arcs between x, y and z.
// Branch points with a single coding are recovered exactly by cycle detection
// on the descent state, so the result is always an exact eventually periodic
// coding.
EvPeriodicWord dendrite_median(const IfsSpec& spec, const PostCriticalData& pcd,
                               const EvPeriodicWord& x, const EvPeriodicWord& y,
                               const EvPeriodicWord& z);

struct PrimaryArc {
    EvPeriodicWord a, b; // canonical endpoint codings, a < b lexicographically
    // One entry per sub-arc of the level-1 decomposition: the map whose
    // cylinder holds the block and the index of the arc it pulls back to.
    std::vector<std::pair<Symbol, int>> expansion;
};

struct PrimaryArcSystem {
    std::vector<EvPeriodicWord> pstar;        // boundary + branch points, sorted
    std::vector<EvPeriodicWord> ramification; // branch points of the main tree
    std::vector<PrimaryArc> arcs;
    // adjacency[p] lists (arc id, neighbour point index).
    std::vector<std::vector<std::pair<int, int>>> adjacency;
    int rounds = 0; // pullback iterations until the point set stabilised

    int point_index(const EvPeriodicWord& canon) const; // -1 when absent
};

// Extracts the main-tree skeleton and the self-expansion of each of its arcs
// by fixed-point iteration: branch points come from medians of boundary-point
// triples, and block endpoints are pulled back through the maps until the
// point set stabilises (cap 50 rounds, then SystemExtractionFailure).
PrimaryArcSystem build_primary_arc_system(const IfsSpec& spec, const PostCriticalData& pcd);

// Number of arcs on the skeleton path between two pstar points.
int skeleton_distance(const PrimaryArcSystem& system, int p, int q);
// Arc ids along that path, in order.
std::vector<int> skeleton_path_arcs(const PrimaryArcSystem& system, int p, int q);

enum class CylinderKind { Boundary, Private, NonPrivate };

struct DendriteAssignment {
    int m = 1;
    double delta = 0.0; // the value actually used, after any halving
    double c = 1.0;
    int halvings = 0;

    std::vector<FiniteWord> words; // all words of length m, lex order
    std::vector<double> R;         // contraction weight per word
    std::vector<CylinderKind> kind;
    std::vector<int> owner; // arc id for Private words, -1 otherwise
    int boundary_count = 0;

    struct ArcStats {
        double boundary_sum = 0.0; // sum of ratio^c over boundary entries
        int n_private = 0;         // private entries in the expansion
        int n_nonprivate = 0;      // non-private entries in the expansion
        int private_blocks = 0;    // private cylinders among the blocks
        int entries = 0;           // total expansion entries at this level
    };
    std::vector<ArcStats> stats; // per arc

    double R_of(const FiniteWord& w) const; // DomainError on unknown word
    std::map<FiniteWord, double> weight_map() const;
};

// Weight scheme over the level-m cylinders: boundary words get ratio^c,
// cylinders meeting no arc (or several arcs) in more than one point get delta,
// and each arc's private cylinders split the leftover equally so that the arc
// weight sums to one. delta is halved (up to 60 times, when auto_halve is on)
// until every weight lies in (0,1); AssignmentInfeasible otherwise.
DendriteAssignment assign_weights(const PrimaryArcSystem& system, const IfsSpec& spec,
                                  const PostCriticalData& pcd, int m, double delta, double c,
                                  bool auto_halve = true);

// Recursive geodesic-count metric: level-0 distance is the number of skeleton
// arcs between two pstar points, and each refinement splits the connecting arc
// into maximal level-m blocks, scaling each block by its cylinder weight.
class DendriteMetric {
  public:
    DendriteMetric(const IfsSpec& spec, const PostCriticalData& pcd,
                   const PrimaryArcSystem& system, std::map<FiniteWord, double> weights, int m);

    double distance(int n, const EvPeriodicWord& x, const EvPeriodicWord& y) const;

    // The points X_n: skeleton points and their images under all words of
    // length m*n, as sorted canonical codings.
    std::vector<EvPeriodicWord> level_points(int n) const;

    int block_size() const { return m_; }

  private:
    IfsSpec spec_;
    PostCriticalData pcd_;
    PrimaryArcSystem system_;
    std::map<FiniteWord, double> weights_;
    int m_ = 1;
    IncidenceGraph block_graph_;
    mutable std::map<std::string, double> memo_;
};

struct MetricCheckReport {
    bool ok = true;
    int triples_checked = 0;
    int restriction_pairs = 0;
    std::vector<std::string> witnesses;
};

// Samples triples of X_n for symmetry, positivity and the triangle
// inequality, and pairs of X_{n-1} for agreement of successive levels.
MetricCheckReport dendrite_metric_check(const IfsSpec& spec, const PostCriticalData& pcd,
                                        const PrimaryArcSystem& system,
                                        const std::map<FiniteWord, double>& weights, int m, int n,
                                        int samples, unsigned seed = 0);

struct DendriteSimilitudeCheck {
    double max_rel_err = 0.0;
    int pairs_checked = 0;
    std::string witness;
};

// Checks D_{n+1}(f_w x, f_w y) = R(w) * D_n(x, y) on sampled pairs of X_n.
DendriteSimilitudeCheck dendrite_similitude_check(const IfsSpec& spec,
                                                  const PostCriticalData& pcd,
                                                  const PrimaryArcSystem& system,
                                                  const std::map<FiniteWord, double>& weights,
                                                  int m, const FiniteWord& w, int n, int samples,
                                                  unsigned seed = 0);

struct SmSolution {
    int m = 1;
    double s = 0.0;
    double delta_used = 0.0;
    double c = 1.0;
    int halvings = 0;
    DendriteAssignment assignment;
};

// Builds the level-m weight scheme and solves sum_I R(I)^s = 1 for s.
SmSolution solve_s_m(const PrimaryArcSystem& system, const IfsSpec& spec,
                     const PostCriticalData& pcd, int m, double delta, double c,
                     bool auto_halve = true);

// One solution per level in [m_lo, m_hi], with the geometric schedule
// delta^m applied at each level so the flat-count term vanishes faster than
// the equation sharpens.
std::vector<SmSolution> dendrite_dimension_trend(const PrimaryArcSystem& system,
                                                 const IfsSpec& spec,
                                                 const PostCriticalData& pcd, int m_lo, int m_hi,
                                                 double delta, double c);

// Main-tree skeleton over the cylinder layout, as a standalone SVG document.
std::string dendrite_svg(const IfsSpec& spec, const PostCriticalData& pcd,
                         const PrimaryArcSystem& system, int level = 3);

} // namespace fractop
