#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fractop/common.hpp"
#include "fractop/ifs.hpp"
#include "fractop/words.hpp"

namespace fractop {

// Weight data for the level-0 graph on the post-critical set: tau0 assigns a
// positive weight to each declared edge between distinct classes (self-loops
// are implicitly zero and never declared), and R assigns a contraction factor
// in (0,1) to each symbol. Instantiated with double or with Rational; the
// rational instantiation keeps every derived weight exact.
template <typename W>
struct BasicAssignment {
    // Keys are 1-based post-critical class indices with first < second.
    std::map<std::pair<int, int>, W> tau0;
    std::vector<W> R; // R[i-1] for symbol i

    bool has_edge(int a, int b) const;
    const W& tau(int a, int b) const; // throws DomainError when the edge is absent
    W word_factor(const FiniteWord& I) const; // product of R over the word
};

using WeightAssignment = BasicAssignment<double>;
using ExactAssignment = BasicAssignment<Rational>;

// Parses {"tau0": {"1-2": w, ...}, "R": [r1, ..., rN]}. Weight values may be
// numbers or fraction strings like "29/416".
WeightAssignment assignment_from_json(const nlohmann::json& j);

// Exact variant: every value must be an integer, a fraction string, or a
// double that reconstructs to a small fraction; otherwise nullopt.
std::optional<ExactAssignment> exact_assignment_from_json(const nlohmann::json& j);

WeightAssignment to_double(const ExactAssignment& a);

// Structural checks (sizes, ranges, no self-loops, positive weights);
// throws DomainError on violation.
template <typename W>
void validate_assignment(const IfsSpec& spec, const PostCriticalData& pcd,
                         const BasicAssignment<W>& assign);

// One way of naming a vertex of the refined graph: the image of post-critical
// class `anchor` under the map of `word`. Distinct addresses naming the same
// point are merged into one vertex.
struct VertexAddress {
    FiniteWord word;
    int anchor = 0; // 0-based post-critical class index
};

template <typename W>
struct RefinedEdge {
    int u = 0;
    int v = 0;
    W weight{};
    // Provenance: the edge is the image under the map of `word` of the
    // level-0 edge between classes a and b (0-based).
    FiniteWord word;
    int a = 0;
    int b = 0;
};

// The level-n refinement: the union of the images of the level-0 graph under
// all length-n words. Vertices are merged symbolically (equal canonical
// codings), positions only validate the merge. Vertex indices are assigned in
// ascending lexicographic order of the canonical coding, so indices are
// deterministic and index order doubles as address order.
template <typename W>
struct RefinedGraph {
    int level = 0;
    std::vector<EvPeriodicWord> keys; // canonical coding per vertex, ascending
    std::vector<Vec2> positions;
    std::vector<std::vector<VertexAddress>> addresses;
    std::vector<RefinedEdge<W>> edges;
    std::vector<std::vector<std::pair<int, std::size_t>>> adjacency; // (neighbor, edge id)

    std::size_t size() const { return keys.size(); }
    int vertex_of(const EvPeriodicWord& key) const; // -1 when absent
};

// Rebuilds the adjacency lists from the edge list (for hand-built graphs).
template <typename W>
void rebuild_adjacency(RefinedGraph<W>& g);

template <typename W>
RefinedGraph<W> refine(const IfsSpec& spec, const PostCriticalData& pcd,
                       const BasicAssignment<W>& assign, int n);

template <typename W>
RefinedGraph<W> refine(const IfsSpec& spec, const BasicAssignment<W>& assign, int n);

// A geodesic query result. `vertices` runs from x to y inclusive (just {x}
// when x == y); `edges` holds the edge id taken at each step. An unreachable
// target reports reachable == false, the infinite-distance convention.
template <typename W>
struct GeodesicResult {
    bool reachable = false;
    W distance{};
    std::vector<int> vertices;
    std::vector<std::size_t> edges;
};

// Shortest weighted path. Ties are broken toward the predecessor with the
// smaller vertex index (hence the lexicographically smaller coding), so the
// reported path is reproducible.
template <typename W>
GeodesicResult<W> geodesic(const RefinedGraph<W>& g, int x, int y);

struct GoodAssignmentReport {
    bool compatible = false;     // level-1 distances restrict to the level-0 metric
    bool edges_geodesic = false; // every level-1 edge realizes the distance of its endpoints
    std::vector<std::string> witnesses;
    bool ok() const { return compatible && edges_geodesic; }
};

template <typename W>
GoodAssignmentReport check_good_assignment(const IfsSpec& spec, const PostCriticalData& pcd,
                                           const BasicAssignment<W>& assign);

struct CompatibilityResult {
    bool ok = false;
    std::size_t pairs_checked = 0;
    double max_abs_dev = 0.0;
    std::string witness;
};

// Checks that level-n distances restrict to level-(n-1) distances on the
// level-(n-1) vertices. Exhaustive up to max_pairs vertex pairs, then a
// seeded sample of sources.
template <typename W>
CompatibilityResult verify_compatibility(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const BasicAssignment<W>& assign, int n,
                                         std::size_t max_pairs = 100000, std::uint64_t seed = 0);

// Level-n approximation of the limit metric between two coded points: both
// points are projected to the nearest vertex inside their level-n cylinder
// and the graph distance is returned together with the projection envelope
// 2 * (max_i R_i)^n * diam0. Successive levels agree within the envelope.
template <typename W>
struct MetricDValue {
    bool finite = true;
    W value{};
    W envelope{};
    int level = 0;
    int vx = -1;
    int vy = -1;
};

template <typename W>
MetricDValue<W> metric_D(const IfsSpec& spec, const PostCriticalData& pcd,
                         const BasicAssignment<W>& assign, const EvPeriodicWord& x,
                         const EvPeriodicWord& y, int n);

struct SimilitudeCheck {
    double max_rel_err = 0.0;
    std::size_t pairs_checked = 0;
    std::string witness;
};

// Measures how far map j is from scaling level-n graph distances by exactly
// R(j): max over vertex pairs of |D_{n+1}(jx, jy) - R(j) D_n(x, y)| / D_n(x, y).
template <typename W>
SimilitudeCheck check_similitude_under_D(const IfsSpec& spec, const PostCriticalData& pcd,
                                         const BasicAssignment<W>& assign, Symbol j, int n,
                                         std::size_t max_pairs = 100000, std::uint64_t seed = 0);

// Unique s >= 0 with sum_i ratios[i]^s = 1, by monotone bisection.
// Throws DomainError when the list is empty or any ratio lies outside (0,1).
double similarity_dimension(const std::vector<double>& ratios);

// An edge-induced subgraph, stored as a membership flag per edge id plus the
// touched vertex set.
struct Subgraph {
    std::vector<char> edge_in; // size = host edge count
    std::vector<char> vertex_in; // size = host vertex count

    bool has_edge(std::size_t e) const { return edge_in[e] != 0; }
    bool has_vertex(int v) const { return vertex_in[static_cast<std::size_t>(v)] != 0; }
};

// The block of g consisting of the edges whose provenance word starts with
// `prefix` — the image of the level-(n-|prefix|) graph under that word.
template <typename W>
Subgraph subgraph_by_prefix(const RefinedGraph<W>& g, const FiniteWord& prefix);

Subgraph subgraph_union(const Subgraph& a, const Subgraph& b);

// Splits a path whose endpoints lie strictly in g1 resp. g2 into a g1 part
// and a g2 part joined at one of the two shared vertices. Preconditions: g1
// and g2 cover the path and share exactly the vertices {cut.first,
// cut.second}; violations throw DecompositionError.
template <typename W>
std::pair<GeodesicResult<W>, GeodesicResult<W>> decompose_path_by_subgraphs(
    const RefinedGraph<W>& g, const GeodesicResult<W>& path, const Subgraph& g1,
    const Subgraph& g2, std::pair<int, int> cut);

// Standalone SVG drawing: vertices at their geometric positions, edge
// stroke width proportional to weight.
template <typename W>
std::string graph_svg(const RefinedGraph<W>& g);

} // namespace fractop
