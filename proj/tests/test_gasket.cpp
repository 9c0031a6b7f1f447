#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "fractop/gasket.hpp"

using namespace fractop;
using Catch::Approx;

namespace {

Similitude homothety(double r, Vec2 t) {
    Similitude f;
    f.ratio = r;
    f.rotation = 0.0;
    f.reflect = false;
    f.translation = t;
    return f;
}

IfsSpec make_spec(std::vector<Similitude> maps) {
    IfsSpec s;
    s.maps = std::move(maps);
    for (const auto& f : s.maps) s.lipschitz_bounds.emplace_back(f.ratio, f.ratio);
    return s;
}

Errc thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io; // sentinel: nothing thrown
}

GasketSpec load_gasket(const std::string& name) {
    return validate_gasket(IfsSpec::load("fixtures/" + name));
}

} // namespace

TEST_CASE("triangle cells compose and classify relations exactly") {
    TriangleCell whole{Rational(0), Rational(0), Rational(1)};
    TriangleCell half{Rational(0), Rational(0), Rational(1, 2)};
    TriangleCell child = half.compose(half);
    REQUIRE(child.alpha == Rational(0));
    REQUIRE(child.r == Rational(1, 4));
    TriangleCell shifted{Rational(1, 2), Rational(0), Rational(1, 2)};
    TriangleCell up{Rational(0), Rational(1, 2), Rational(1, 2)};

    Rational tx, ty;
    REQUIRE(cell_relation(half, shifted, tx, ty) == CellRelation::Touch);
    REQUIRE(tx == Rational(1, 2));
    REQUIRE(ty == Rational(0));
    REQUIRE(cell_relation(shifted, up, tx, ty) == CellRelation::Touch);
    REQUIRE(cell_relation(half, whole, tx, ty) == CellRelation::Overlap);
    TriangleCell far_cell{Rational(3, 4), Rational(0), Rational(1, 8)};
    REQUIRE(cell_relation(up, far_cell, tx, ty) == CellRelation::Disjoint);

    REQUIRE(whole.contains(Rational(1, 3), Rational(1, 3)));
    REQUIRE_FALSE(half.contains(Rational(3, 4), Rational(1, 2)));
}

TEST_CASE("the classic three-map gasket validates with three corner cells") {
    GasketSpec g = load_gasket("sierpinski.json");
    REQUIRE(g.cells.size() == 3);
    for (CellKind k : g.kind) REQUIRE(k == CellKind::Corner);
    REQUIRE(g.corner_map == std::array<int, 3>{{1, 2, 3}});
    REQUIRE(g.cells[0].r == Rational(1, 2));
    REQUIRE(g.cells[2].alpha == Rational(0));
    REQUIRE(g.cells[2].beta == Rational(1, 2));
}

TEST_CASE("the augmented fixture validates with the right cell kinds") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    REQUIRE(g.cells.size() == 15);
    REQUIRE(g.corner_map == std::array<int, 3>{{1, 2, 3}});
    int corners = 0, privates = 0, inner = 0;
    for (CellKind k : g.kind) {
        if (k == CellKind::Corner) ++corners;
        if (k == CellKind::Private) ++privates;
        if (k == CellKind::Inner) ++inner;
    }
    REQUIRE(corners == 3);
    REQUIRE(privates == 12);
    REQUIRE(inner == 0);
    for (int i = 3; i < 7; ++i) REQUIRE(g.edge_of[static_cast<std::size_t>(i)] == 0);
    for (int i = 7; i < 11; ++i) REQUIRE(g.edge_of[static_cast<std::size_t>(i)] == 1);
    for (int i = 11; i < 15; ++i) REQUIRE(g.edge_of[static_cast<std::size_t>(i)] == 2);
}

TEST_CASE("validation rejects broken gasket geometry") {
    Vec2 origin{0.0, 0.0};

    SECTION("overlapping cells") {
        IfsSpec s = make_spec({homothety(0.5, origin), homothety(0.5, {0.25, 0.0})});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::NotAGasket);
    }
    SECTION("touch at an edge-interior point") {
        IfsSpec s = make_spec(
            {homothety(0.5, origin), homothety(0.25, {0.4375, 0.10825317547305482})});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::NotAGasket);
    }
    SECTION("rotated map") {
        Similitude bad = homothety(0.25, {0.75, 0.0});
        bad.rotation = std::acos(-1.0) / 3.0;
        IfsSpec s = make_spec({homothety(0.5, origin), bad});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::NotAGasket);
    }
    SECTION("image outside the triangle") {
        IfsSpec s = make_spec({homothety(0.25, origin), homothety(0.5, {0.75, 0.0})});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::NotAGasket);
    }
    SECTION("non-contracting map") {
        IfsSpec s = make_spec({homothety(1.0, origin)});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::NotAGasket);
    }
    SECTION("irrational cell coordinate") {
        IfsSpec s = make_spec(
            {homothety(0.5, origin), homothety(0.125, {0.6180339887498949, 0.0})});
        REQUIRE(thrown_code([&] { validate_gasket(s); }) == Errc::DomainError);
    }
}

TEST_CASE("the augmentation report certifies the fifteen-map fixture") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    GasketAugmentationReport rep = augmentation_report(g);
    REQUIRE(rep.connected);
    REQUIRE(rep.boundary_covered);
    REQUIRE(rep.private_disjoint);
    REQUIRE(rep.counts_equal);
    REQUIRE(rep.private_counts == std::array<int, 3>{{4, 4, 4}});
    REQUIRE(rep.N0 == 4);
    REQUIRE(rep.inner_diameter_ok);
    REQUIRE(rep.ok());
}

TEST_CASE("the bare gasket is connected but carries no private cells") {
    GasketSpec g = load_gasket("sierpinski.json");
    GasketAugmentationReport rep = augmentation_report(g);
    REQUIRE(rep.connected);
    REQUIRE(rep.boundary_covered);
    REQUIRE(rep.N0 == 0);
    REQUIRE_FALSE(rep.ok());
}

TEST_CASE("the chain-and-island fixture fails the count bookkeeping") {
    GasketSpec g = load_gasket("gasket_chain_island.json");
    GasketAugmentationReport rep = augmentation_report(g);
    REQUIRE_FALSE(rep.connected);
    REQUIRE_FALSE(rep.counts_equal);
    REQUIRE_FALSE(rep.ok());
}

TEST_CASE("connectivity verdicts") {
    SECTION("connected gasket") {
        ConnectivityReport rep = gasket_connectivity(load_gasket("sierpinski.json"));
        REQUIRE(rep.connected);
        REQUIRE(rep.components.size() == 1);
        REQUIRE(rep.verdict == "1 (Thm 1.12)");
        REQUIRE_FALSE(rep.totally_disconnected_evidence);
    }
    SECTION("three disjoint corner cells are provably totally disconnected") {
        ConnectivityReport rep = gasket_connectivity(load_gasket("gasket_corners.json"));
        REQUIRE_FALSE(rep.connected);
        REQUIRE(rep.components ==
                std::vector<std::vector<int>>{{1}, {2}, {3}});
        REQUIRE(rep.totally_disconnected_evidence);
        REQUIRE(rep.diameter_bound == Approx(std::pow(0.25, 6)).epsilon(1e-12));
        REQUIRE(rep.verdict == "0 (Kovalev, cited)");
    }
    SECTION("a touching chain plus an island keeps a nondegenerate component") {
        ConnectivityReport rep = gasket_connectivity(load_gasket("gasket_chain_island.json"));
        REQUIRE_FALSE(rep.connected);
        REQUIRE(rep.components == std::vector<std::vector<int>>{{1, 2}, {3}});
        REQUIRE_FALSE(rep.totally_disconnected_evidence);
        REQUIRE(rep.verdict == "1 (Thm 1.12)");
    }
}

TEST_CASE("vertex iteration of the bare gasket") {
    GasketSpec g = load_gasket("sierpinski.json");
    VertexIteration it = vertex_iteration(g, 1);
    std::vector<FiniteWord> expected{{1, 1}, {2, 2}, {3, 3}, {1, 2}, {1, 3},
                                     {2, 1}, {2, 3}, {3, 1}, {3, 2}};
    REQUIRE(it.words == expected);
    REQUIRE(it.component == std::vector<int>{1, 2, 3, 1, 1, 2, 2, 3, 3});
    REQUIRE(it.C_m == 4);
    REQUIRE(it.derived.size() == 9);
    REQUIRE(it.derived.identifications.size() == 12);
    REQUIRE(it.cells[0].r == Rational(1, 4));

    VertexIteration it2 = vertex_iteration(g, 2);
    REQUIRE(it2.words.size() == 15);
    REQUIRE(it2.C_m == 6);
}

TEST_CASE("vertex iteration of the augmented fixture") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    VertexIteration it = vertex_iteration(g, 1);
    REQUIRE(it.words.size() == 57);
    REQUIRE(it.C_m == 16);
    REQUIRE(it.words[0] == FiniteWord{1, 1});
    REQUIRE(it.words[3] == FiniteWord{1, 2});
    REQUIRE(it.words[31] == FiniteWord{3, 1});
    REQUIRE(it.words[45] == FiniteWord{4});
    REQUIRE(it.component[0] == 1);
    REQUIRE(it.component[31] == 3);
    REQUIRE(it.component[45] == 0);
}

TEST_CASE("vertex iteration needs all three corner maps") {
    GasketSpec g = load_gasket("gasket_chain_island.json");
    REQUIRE(thrown_code([&] { vertex_iteration(g, 1); }) == Errc::CornerMapMissing);
}

TEST_CASE("the derived system redraws the same attractor") {
    GasketSpec g = load_gasket("sierpinski.json");
    VertexIteration it = vertex_iteration(g, 1);
    auto [gap, mesh] = vertex_iteration_net_gap(g, it, 3);
    REQUIRE(gap <= mesh);
    REQUIRE(gap < 0.2);
}

TEST_CASE("uniform weights on the bare gasket") {
    GasketSpec g = load_gasket("sierpinski.json");
    VertexIteration it = vertex_iteration(g, 1);
    GasketAssignment a = uniform_gasket_assignment(g, it);
    REQUIRE(a.uniform);
    REQUIRE(a.W == Approx(0.25));
    REQUIRE(a.weights.R.size() == 9);
    for (double r : a.weights.R) REQUIRE(r == Approx(0.25));

    GasketSpec aug = load_gasket("augmented_gasket.json");
    VertexIteration aug_it = vertex_iteration(aug, 1);
    REQUIRE(thrown_code([&] { uniform_gasket_assignment(aug, aug_it); }) == Errc::DomainError);
}

TEST_CASE("the weighted scheme on the augmented fixture") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    GasketAugmentationReport rep = augmentation_report(g);
    VertexIteration it = vertex_iteration(g, 1);
    REQUIRE(gasket_s_lower_bound(g, it) == Approx(1.0).epsilon(1e-12));

    GasketAssignment a = gasket_assignment(g, it, 1.25, rep);
    REQUIRE(a.N0 == 4);
    REQUIRE(a.C_m == 16);
    REQUIRE(a.W == Approx(29.0 / 416.0).epsilon(1e-14));
    REQUIRE(a.T == std::array<int, 3>{{57, 53, 46}});
    REQUIRE(a.weights.R[0] == Approx(1.0 / 32.0).epsilon(1e-14));
    REQUIRE(a.weights.R[56] == Approx(1.0 / 32.0).epsilon(1e-14));
    REQUIRE(a.weights.R[46] == Approx(29.0 / 416.0).epsilon(1e-14));

    SECTION("the exponent bound is strict") {
        REQUIRE(thrown_code([&] { gasket_assignment(g, it, 1.0, rep); }) ==
                Errc::SBoundViolation);
        REQUIRE(thrown_code([&] { gasket_assignment(g, it, 0.5, rep); }) ==
                Errc::SBoundViolation);
    }
    SECTION("the scheme refuses an uncertified gasket") {
        GasketSpec bare = load_gasket("sierpinski.json");
        GasketAugmentationReport bare_rep = augmentation_report(bare);
        VertexIteration bare_it = vertex_iteration(bare, 1);
        REQUIRE(thrown_code([&] { gasket_assignment(bare, bare_it, 1.5, bare_rep); }) ==
                Errc::DomainError);
    }
}

TEST_CASE("exact weights reproduce the frozen chain fractions") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    GasketAugmentationReport rep = augmentation_report(g);
    VertexIteration it = vertex_iteration(g, 1);
    std::array<Rational, 3> pow{Rational(1, 32), Rational(1, 32), Rational(1, 32)};
    ExactGasketAssignment ea = exact_gasket_assignment(g, it, pow, rep);
    REQUIRE(ea.W == Rational(29, 416));
    REQUIRE(ea.T == std::array<int, 3>{{57, 53, 46}});

    SECTION("powers at or above 1/C_m are rejected") {
        std::array<Rational, 3> big{Rational(1, 16), Rational(1, 16), Rational(1, 16)};
        REQUIRE(thrown_code([&] { exact_gasket_assignment(g, it, big, rep); }) ==
                Errc::SBoundViolation);
    }
    SECTION("powers must share one exponent") {
        std::array<Rational, 3> skew{Rational(1, 32), Rational(1, 32), Rational(1, 64)};
        REQUIRE(thrown_code([&] { exact_gasket_assignment(g, it, skew, rep); }) ==
                Errc::GeometryMismatch);
    }
}

TEST_CASE("exact lemma distances come out as the frozen rationals") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    GasketAugmentationReport rep = augmentation_report(g);
    VertexIteration it = vertex_iteration(g, 1);
    std::array<Rational, 3> pow{Rational(1, 32), Rational(1, 32), Rational(1, 32)};
    ExactGasketAssignment ea = exact_gasket_assignment(g, it, pow, rep);

    GasketGoodReport good = verify_gasket_good(it, ea);
    REQUIRE(good.corner_unit);
    REQUIRE(good.edges_geodesic);
    REQUIRE(good.lemmas_checked);
    REQUIRE(good.lemma_interior);
    REQUIRE(good.lemma_component);
    REQUIRE(good.ok());

    // Recompute the three lemma distances independently of the verifier.
    const IfsSpec& d = it.derived;
    PostCriticalData pcd = compute_post_critical(d);
    RefinedGraph<Rational> g1 = refine(d, pcd, ea.weights, 1);
    auto vertex = [&](std::vector<Symbol> pre, std::vector<Symbol> per) {
        int v = g1.vertex_of(lowest_coding(d, pcd, EvPeriodicWord::make(pre, per)));
        REQUIRE(v >= 0);
        return v;
    };
    int f1a3 = vertex({5}, {3});
    int f3a1 = vertex({32}, {1});
    int f3a2 = vertex({33}, {2});
    int a3 = vertex({}, {3});

    auto filtered = [&](int keep_component) {
        RefinedGraph<Rational> out = g1;
        out.edges.clear();
        for (const auto& e : g1.edges)
            if (it.component[static_cast<std::size_t>(e.word.front() - 1)] == keep_component)
                out.edges.push_back(e);
        rebuild_adjacency(out);
        return out;
    };

    RefinedGraph<Rational> generic = filtered(0);
    GeodesicResult<Rational> across = geodesic(generic, f1a3, f3a1);
    REQUIRE(across.reachable);
    REQUIRE(across.distance == Rational(25, 104));

    RefinedGraph<Rational> third = filtered(3);
    GeodesicResult<Rational> apex = geodesic(third, a3, f3a1);
    REQUIRE(apex.reachable);
    REQUIRE(apex.distance == Rational(79, 208));
    GeodesicResult<Rational> base = geodesic(third, f3a1, f3a2);
    REQUIRE(base.reachable);
    REQUIRE(base.distance == Rational(87, 208));
}

TEST_CASE("the double lane verifies uniform and weighted assignments") {
    SECTION("uniform bare gasket skips the private-cell arguments") {
        GasketSpec g = load_gasket("sierpinski.json");
        for (int m = 1; m <= 2; ++m) {
            VertexIteration it = vertex_iteration(g, m);
            GasketAssignment a = uniform_gasket_assignment(g, it);
            GasketGoodReport good = verify_gasket_good(it, a);
            REQUIRE(good.corner_unit);
            REQUIRE(good.edges_geodesic);
            REQUIRE_FALSE(good.lemmas_checked);
            REQUIRE(good.ok());
        }
    }
    SECTION("weighted augmented gasket passes all arguments") {
        GasketSpec g = load_gasket("augmented_gasket.json");
        GasketAugmentationReport rep = augmentation_report(g);
        VertexIteration it = vertex_iteration(g, 1);
        GasketAssignment a = gasket_assignment(g, it, 1.25, rep);
        GasketGoodReport good = verify_gasket_good(it, a);
        REQUIRE(good.lemmas_checked);
        REQUIRE(good.ok());
    }
    SECTION("a corrupted weight is caught with a witness") {
        GasketSpec g = load_gasket("augmented_gasket.json");
        GasketAugmentationReport rep = augmentation_report(g);
        VertexIteration it = vertex_iteration(g, 1);
        GasketAssignment a = gasket_assignment(g, it, 1.25, rep);
        a.weights.R[46] *= 1.5; // a plain bottom-edge cell
        GasketGoodReport good = verify_gasket_good(it, a);
        REQUIRE_FALSE(good.ok());
        REQUIRE_FALSE(good.corner_unit);
        REQUIRE_FALSE(good.witnesses.empty());
    }
}

TEST_CASE("exact uniform weights balance the bare gasket chains") {
    GasketSpec g = load_gasket("sierpinski.json");
    VertexIteration it = vertex_iteration(g, 1);
    ExactAssignment w = exact_uniform_assignment(it);
    REQUIRE(w.R == std::vector<Rational>(9, Rational(1, 4)));
    PostCriticalData pcd = compute_post_critical(it.derived);
    GoodAssignmentReport rep = check_good_assignment(it.derived, pcd, w);
    REQUIRE(rep.compatible);
    REQUIRE(rep.edges_geodesic);
}

TEST_CASE("the uniform dimension trend matches the closed form") {
    GasketSpec g = load_gasket("sierpinski.json");
    std::vector<DimensionRow> rows = conformal_upper_bound(g, 1, 20, true);
    REQUIRE(rows.size() == 20);
    for (const DimensionRow& row : rows) {
        double expected = std::log(6.0 * row.m + 3.0) / std::log(2.0 * row.m + 2.0);
        REQUIRE(row.dim == Approx(expected).margin(1e-9));
        REQUIRE(row.verified);
    }
    for (std::size_t k = 0; k + 1 < rows.size(); ++k)
        REQUIRE(rows[k].dim > rows[k + 1].dim);
    REQUIRE(rows[9].dim == Approx(1.340368108464558).margin(1e-12));
}

TEST_CASE("the weighted dimension trend on the augmented fixture") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    std::vector<DimensionRow> rows = conformal_upper_bound(g, 1, 3, false, 1.01);
    REQUIRE(rows.size() == 3);
    std::array<double, 3> frozen{1.459690516573744, 1.411235084796807, 1.381585456604365};
    for (int k = 0; k < 3; ++k) {
        REQUIRE(rows[static_cast<std::size_t>(k)].dim ==
                Approx(frozen[static_cast<std::size_t>(k)]).margin(1e-9));
        REQUIRE(rows[static_cast<std::size_t>(k)].dim > 1.0);
    }
    REQUIRE(rows[0].dim > rows[1].dim);
    REQUIRE(rows[1].dim > rows[2].dim);
    REQUIRE(rows[0].s_used == Approx(1.01).epsilon(1e-12));
}

TEST_CASE("the cell picture renders deterministically") {
    GasketSpec g = load_gasket("augmented_gasket.json");
    VertexIteration it = vertex_iteration(g, 1);
    std::string one = gasket_svg(g, it);
    std::string two = gasket_svg(g, it);
    REQUIRE(one == two);
    REQUIRE(one.rfind("<svg", 0) == 0);
    REQUIRE(one.find("<polygon") != std::string::npos);
    REQUIRE(one.find("</svg>") != std::string::npos);
}
