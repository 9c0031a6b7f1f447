#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "fractop/dendrite.hpp"

using namespace fractop;
using Catch::Approx;

namespace {

struct Loaded {
    IfsSpec spec;
    PostCriticalData pcd;
};

Loaded load(const std::string& name) {
    IfsSpec spec = IfsSpec::load("fixtures/" + name);
    PostCriticalData pcd = compute_post_critical(spec);
    return {std::move(spec), std::move(pcd)};
}

EvPeriodicWord w(std::vector<Symbol> pre, std::vector<Symbol> per) {
    return EvPeriodicWord::make(std::move(pre), std::move(per));
}

std::map<FiniteWord, double> weights1(std::vector<double> vals) {
    std::map<FiniteWord, double> out;
    for (std::size_t i = 0; i < vals.size(); ++i)
        out.emplace(FiniteWord{static_cast<Symbol>(i + 1)}, vals[i]);
    return out;
}

} // namespace

TEST_CASE("incidence graphs list cylinders and shared points") {
    auto [spec, pcd] = load("cross_dendrite_quarter.json");

    SECTION("level 1 is a four-armed star around the single shared point") {
        IncidenceGraph g = build_incidence(spec, pcd, 1);
        REQUIRE(g.cylinder_count() == 4);
        REQUIRE(g.points.size() == 1);
        REQUIRE(g.points[0].coding == w({1}, {3}));
        REQUIRE(g.points[0].cylinders == std::vector<int>{0, 1, 2, 3});
        REQUIRE(g.edge_count() == 4);
        REQUIRE(g.vertex_count() == 5);
    }

    SECTION("level 2 stays a tree with one junction per cell plus the middle") {
        IncidenceGraph g = build_incidence(spec, pcd, 2);
        REQUIRE(g.cylinder_count() == 16);
        REQUIRE(g.points.size() == 5);
        REQUIRE(g.edge_count() == g.vertex_count() - 1);
        REQUIRE(g.point_index(w({1, 1}, {3})) >= 0);
        REQUIRE(g.point_index(w({}, {1})) == -1);
        REQUIRE(g.cylinder_index({1, 3}) >= 0);
        REQUIRE(g.cylinder_index({5, 1}) == -1);
    }
}

TEST_CASE("tree certificates accept dendrites and reject loops") {
    SECTION("the crossed interval family is a dendrite") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        DendriteCertificate cert = certify_dendrite(spec, pcd, 4);
        REQUIRE(cert.ok);
        REQUIRE(cert.depth_checked == 4);
        REQUIRE(cert.witness.empty());
    }

    SECTION("the interval is a dendrite") {
        auto [spec, pcd] = load("interval.json");
        REQUIRE(certify_dendrite(spec, pcd, 5).ok);
    }

    SECTION("the five-cell cross is a dendrite") {
        auto [spec, pcd] = load("vicsek_cross.json");
        REQUIRE(certify_dendrite(spec, pcd, 3).ok);
    }

    SECTION("a single contraction is trivially a dendrite") {
        auto [spec, pcd] = load("single_map.json");
        REQUIRE(certify_dendrite(spec, pcd, 3).ok);
    }

    SECTION("the triangle attractor is rejected with a cycle witness") {
        auto [spec, pcd] = load("sierpinski.json");
        DendriteCertificate cert = certify_dendrite(spec, pcd, 2);
        REQUIRE_FALSE(cert.ok);
        REQUIRE(cert.depth_checked == 1);
        REQUIRE(cert.witness.find("cycle") != std::string::npos);
    }
}

TEST_CASE("arc chains decompose a path into cylinders and joints") {
    auto [spec, pcd] = load("cross_dendrite_quarter.json");
    EvPeriodicWord left = w({}, {1});
    EvPeriodicWord right = w({}, {3});

    SECTION("the spine at level 1 crosses two cells through the middle") {
        ArcChain chain = arc_chain(spec, pcd, left, right, 1);
        REQUIRE(chain.cylinders == std::vector<FiniteWord>{{1}, {3}});
        REQUIRE(chain.joints == std::vector<EvPeriodicWord>{w({1}, {3})});
    }

    SECTION("an endpoint-to-branch-tip path turns at the middle") {
        ArcChain chain = arc_chain(spec, pcd, left, w({4}, {3}), 1);
        REQUIRE(chain.cylinders == std::vector<FiniteWord>{{1}, {4}});
        REQUIRE(chain.joints == std::vector<EvPeriodicWord>{w({1}, {3})});
    }

    SECTION("two points of one cell give a single block and no joints") {
        ArcChain chain = arc_chain(spec, pcd, left, w({1, 2}, {3}), 1);
        REQUIRE(chain.cylinders == std::vector<FiniteWord>{{1}});
        REQUIRE(chain.joints.empty());
    }

    SECTION("the spine at level 2 crosses four cells at the quarter points") {
        ArcChain chain = arc_chain(spec, pcd, left, right, 2);
        REQUIRE(chain.cylinders ==
                std::vector<FiniteWord>{{1, 1}, {1, 3}, {3, 1}, {3, 3}});
        REQUIRE(chain.joints ==
                std::vector<EvPeriodicWord>{w({1, 1}, {3}), w({1}, {3}), w({3, 1}, {3})});
    }

    SECTION("coinciding endpoints are rejected") {
        REQUIRE_THROWS_AS(arc_chain(spec, pcd, left, w({}, {1}), 1), Error);
    }
}

TEST_CASE("the median of three points is located symbolically") {
    SECTION("three corners of the five-cell cross meet at the centre") {
        auto [spec, pcd] = load("vicsek_cross.json");
        EvPeriodicWord centre = w({}, {5});
        REQUIRE(dendrite_median(spec, pcd, w({}, {1}), w({}, {2}), w({}, {4})) == centre);
        REQUIRE(dendrite_median(spec, pcd, w({}, {1}), w({}, {2}), w({}, {3})) == centre);
        // A member of the triple that already lies between the other two is
        // its own median.
        REQUIRE(dendrite_median(spec, pcd, w({}, {1}), w({}, {2}), centre) == centre);
    }

    SECTION("on the crossed interval the middle separates spine and branches") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        EvPeriodicWord mid = w({1}, {3});
        REQUIRE(dendrite_median(spec, pcd, w({}, {1}), w({}, {3}), w({4}, {3})) == mid);
        REQUIRE(dendrite_median(spec, pcd, w({2}, {3}), w({4}, {3}), w({}, {1})) == mid);
    }

    SECTION("degenerate triples collapse to the repeated point") {
        auto [spec, pcd] = load("interval.json");
        EvPeriodicWord a = w({}, {1});
        EvPeriodicWord b = w({}, {2});
        REQUIRE(dendrite_median(spec, pcd, a, a, b) == a);
        REQUIRE(dendrite_median(spec, pcd, a, b, b) == b);
    }
}

TEST_CASE("the arc system captures the skeleton of the main tree") {
    SECTION("the interval is a single arc between its endpoints") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        REQUIRE(sys.pstar == std::vector<EvPeriodicWord>{w({}, {1}), w({}, {2})});
        REQUIRE(sys.ramification.empty());
        REQUIRE(sys.arcs.size() == 1);
        REQUIRE(sys.arcs[0].a == w({}, {1}));
        REQUIRE(sys.arcs[0].b == w({}, {2}));
        REQUIRE(sys.arcs[0].expansion ==
                std::vector<std::pair<Symbol, int>>{{1, 0}, {2, 0}});
    }

    SECTION("the crossed interval keeps one arc: branch tips are not endpoints") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        REQUIRE(sys.pstar == std::vector<EvPeriodicWord>{w({}, {1}), w({}, {3})});
        REQUIRE(sys.ramification.empty());
        REQUIRE(sys.arcs.size() == 1);
        REQUIRE(sys.arcs[0].expansion ==
                std::vector<std::pair<Symbol, int>>{{1, 0}, {3, 0}});
    }

    SECTION("the five-cell cross branches at its centre") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        REQUIRE(sys.pstar.size() == 5);
        REQUIRE(sys.pstar[4] == w({}, {5}));
        REQUIRE(sys.ramification == std::vector<EvPeriodicWord>{w({}, {5})});
        REQUIRE(sys.arcs.size() == 4);
        for (const auto& arc : sys.arcs) {
            REQUIRE(arc.b == w({}, {5}));
            REQUIRE(arc.expansion.size() == 3);
        }
        REQUIRE(sys.arcs[0].expansion ==
                std::vector<std::pair<Symbol, int>>{{1, 0}, {1, 3}, {5, 0}});
        REQUIRE(sys.adjacency[4].size() == 4);
        REQUIRE(skeleton_distance(sys, 0, 3) == 2);
        REQUIRE(skeleton_path_arcs(sys, 0, 1) == std::vector<int>{0, 1});
    }

    SECTION("a looped attractor is refused") {
        auto [spec, pcd] = load("sierpinski.json");
        REQUIRE_THROWS_AS(build_primary_arc_system(spec, pcd), Error);
        try {
            build_primary_arc_system(spec, pcd);
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::NotDendrite);
        }
    }
}

TEST_CASE("weights classify cylinders and balance every arc") {
    SECTION("interval level 1: both cells carry their contraction ratio") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteAssignment a = assign_weights(sys, spec, pcd, 1, 1e-3, 1.0);
        REQUIRE(a.words == std::vector<FiniteWord>{{1}, {2}});
        REQUIRE(a.kind[0] == CylinderKind::Boundary);
        REQUIRE(a.kind[1] == CylinderKind::Boundary);
        REQUIRE(a.R[0] == Approx(0.5).margin(1e-15));
        REQUIRE(a.R[1] == Approx(0.5).margin(1e-15));
        REQUIRE(a.halvings == 0);
    }

    SECTION("interval level 2: interior cells become private at equal weight") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteAssignment a = assign_weights(sys, spec, pcd, 2, 1e-3, 1.0);
        REQUIRE(a.words.size() == 4);
        for (double r : a.R) REQUIRE(r == Approx(0.25).margin(1e-13));
        REQUIRE(a.kind[0] == CylinderKind::Boundary);  // 11
        REQUIRE(a.kind[1] == CylinderKind::Private);   // 12
        REQUIRE(a.kind[2] == CylinderKind::Private);   // 21
        REQUIRE(a.kind[3] == CylinderKind::Boundary);  // 22
        REQUIRE(a.owner[1] == 0);
        REQUIRE(a.owner[2] == 0);
    }

    SECTION("crossed interval level 2: spine cells are kept, branches padded") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        double delta = 1e-3;
        DendriteAssignment a = assign_weights(sys, spec, pcd, 2, delta, 1.0);
        REQUIRE(a.words.size() == 16);
        REQUIRE(a.boundary_count == 2);
        int n_boundary = 0, n_private = 0, n_pad = 0;
        for (std::size_t i = 0; i < a.words.size(); ++i) {
            switch (a.kind[i]) {
            case CylinderKind::Boundary: ++n_boundary; break;
            case CylinderKind::Private: ++n_private; break;
            case CylinderKind::NonPrivate: ++n_pad; break;
            }
        }
        REQUIRE(n_boundary == 2);
        REQUIRE(n_private == 2);
        REQUIRE(n_pad == 12);
        REQUIRE(a.R_of({1, 1}) == Approx(0.25).margin(1e-15));
        REQUIRE(a.R_of({3, 3}) == Approx(0.25).margin(1e-15));
        REQUIRE(a.R_of({1, 3}) == Approx(0.25).margin(1e-13));
        REQUIRE(a.R_of({3, 1}) == Approx(0.25).margin(1e-13));
        REQUIRE(a.R_of({2, 4}) == Approx(delta).margin(1e-15));
        REQUIRE(a.stats.size() == 1);
        REQUIRE(a.stats[0].boundary_sum == Approx(0.5).margin(1e-13));
        REQUIRE(a.stats[0].n_private == 2);
        REQUIRE(a.stats[0].private_blocks == 2);
        REQUIRE(a.stats[0].n_nonprivate == 0);
        REQUIRE(a.stats[0].entries == 4);
    }

    SECTION("five-cell cross level 1 has nothing private and cannot balance") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        REQUIRE_THROWS_AS(assign_weights(sys, spec, pcd, 1, 1e-3, 1.0), Error);
        try {
            assign_weights(sys, spec, pcd, 1, 1e-3, 1.0);
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::AssignmentInfeasible);
        }
    }

    SECTION("five-cell cross level 2: ledger of 4 kept, 12 private, 9 padded") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        double delta = 1e-3;
        DendriteAssignment a = assign_weights(sys, spec, pcd, 2, delta, 1.0);
        REQUIRE(a.words.size() == 25);
        REQUIRE(a.boundary_count == 4);
        int n_boundary = 0, n_private = 0, n_pad = 0;
        for (auto k : a.kind) {
            if (k == CylinderKind::Boundary) ++n_boundary;
            if (k == CylinderKind::Private) ++n_private;
            if (k == CylinderKind::NonPrivate) ++n_pad;
        }
        REQUIRE(n_boundary == 4);
        REQUIRE(n_private == 12);
        REQUIRE(n_pad == 9);
        for (const auto& st : a.stats) {
            REQUIRE(st.boundary_sum == Approx(2.0 / 9.0).margin(1e-13));
            REQUIRE(st.n_private == 6);
            REQUIRE(st.private_blocks == 3);
            REQUIRE(st.n_nonprivate == 1);
            REQUIRE(st.entries == 9);
        }
        double expected = (1.0 - 2.0 / 9.0 - delta) / 6.0;
        REQUIRE(a.R_of({1, 5}) == Approx(expected).margin(1e-13));
        REQUIRE(a.R_of({1, 4}) == Approx(expected).margin(1e-13));
        REQUIRE(a.R_of({5, 1}) == Approx(expected).margin(1e-13));
        REQUIRE(a.R_of({5, 5}) == Approx(delta).margin(1e-15));
        REQUIRE(a.R_of({1, 2}) == Approx(delta).margin(1e-15));
    }

    SECTION("an oversized padding weight is halved until the arc balances") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteAssignment a = assign_weights(sys, spec, pcd, 2, 0.9, 1.0);
        REQUIRE(a.halvings == 1);
        REQUIRE(a.delta == Approx(0.45).margin(1e-15));
        REQUIRE_THROWS_AS(assign_weights(sys, spec, pcd, 2, 0.9, 1.0, false), Error);
    }
}

TEST_CASE("the recursive metric refines the skeleton distance") {
    SECTION("interval: equal half weights give the euclidean distance") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteMetric metric(spec, pcd, sys, weights1({0.5, 0.5}), 1);
        auto pts = metric.level_points(3);
        REQUIRE(pts.size() == 9);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                double expect = std::fabs(spec.eval(pts[i]).x - spec.eval(pts[j]).x);
                REQUIRE(metric.distance(3, pts[i], pts[j]) == Approx(expect).margin(1e-12));
            }
        }
    }

    SECTION("crossed interval: branch weights stretch the tips") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteMetric metric(spec, pcd, sys, weights1({0.5, 0.3, 0.5, 0.3}), 1);
        EvPeriodicWord left = w({}, {1});
        EvPeriodicWord right = w({}, {3});
        EvPeriodicWord mid = w({1}, {3});
        EvPeriodicWord tip2 = w({2}, {3});
        EvPeriodicWord tip4 = w({4}, {3});
        REQUIRE(metric.distance(1, left, right) == Approx(1.0).margin(1e-12));
        REQUIRE(metric.distance(1, left, mid) == Approx(0.5).margin(1e-12));
        REQUIRE(metric.distance(1, left, tip2) == Approx(0.8).margin(1e-12));
        REQUIRE(metric.distance(1, tip2, tip4) == Approx(0.6).margin(1e-12));
        REQUIRE(metric.distance(2, left, w({1, 2}, {3})) == Approx(0.4).margin(1e-12));
    }

    SECTION("five-cell cross: distances count arcs through the centre") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        DendriteMetric metric(spec, pcd, sys, weights1({0.4, 0.4, 0.4, 0.4, 0.2}), 1);
        EvPeriodicWord c1 = w({}, {1});
        EvPeriodicWord c2 = w({}, {2});
        EvPeriodicWord centre = w({}, {5});
        EvPeriodicWord gate1 = w({1}, {4});
        REQUIRE(metric.distance(0, c1, c2) == Approx(2.0).margin(1e-12));
        REQUIRE(metric.distance(1, c1, gate1) == Approx(0.8).margin(1e-12));
        REQUIRE(metric.distance(1, c1, c2) == Approx(2.0).margin(1e-12));
        REQUIRE(metric.distance(1, c1, centre) == Approx(1.0).margin(1e-12));
    }

    SECTION("metric axioms and level compatibility hold on good weights") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        MetricCheckReport rep = dendrite_metric_check(
            spec, pcd, sys, weights1({0.5, 0.3, 0.5, 0.3}), 1, 2, 120);
        REQUIRE(rep.ok);
        REQUIRE(rep.triples_checked > 50);
        REQUIRE(rep.restriction_pairs > 0);
        REQUIRE(rep.witnesses.empty());
    }

    SECTION("weights that sum short of one break level compatibility") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        MetricCheckReport rep = dendrite_metric_check(
            spec, pcd, sys, weights1({0.45, 0.45}), 1, 1, 60);
        REQUIRE_FALSE(rep.ok);
        REQUIRE_FALSE(rep.witnesses.empty());
    }

    SECTION("each cell map scales the metric by exactly its weight") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        auto weights = weights1({0.5, 0.3, 0.5, 0.3});
        for (Symbol s : {1, 2, 3, 4}) {
            DendriteSimilitudeCheck chk = dendrite_similitude_check(
                spec, pcd, sys, weights, 1, {s}, 1, 60);
            REQUIRE(chk.pairs_checked > 0);
            REQUIRE(chk.max_rel_err <= 1e-12);
        }
    }
}

TEST_CASE("dimension estimates shrink toward the expected limits") {
    SECTION("the interval sits at dimension one for every block level") {
        auto [spec, pcd] = load("interval.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        auto rows = dendrite_dimension_trend(sys, spec, pcd, 1, 3, 1e-3, 1.0);
        REQUIRE(rows.size() == 3);
        for (const auto& row : rows) {
            REQUIRE(row.s == Approx(1.0).margin(1e-9));
            REQUIRE(row.halvings == 0);
        }
    }

    SECTION("the crossed interval's exponent decreases to one along the schedule") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        auto rows = dendrite_dimension_trend(sys, spec, pcd, 1, 6, 1e-3, 1.0);
        std::vector<double> expect = {
            1.002832265529425, 1.000008655187163, 1.000000026930293,
            1.000000000086562, 1.000000000000286, 1.000000000000001,
        };
        REQUIRE(rows.size() == expect.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            REQUIRE(rows[i].m == static_cast<int>(i) + 1);
            REQUIRE(rows[i].s == Approx(expect[i]).margin(1e-9));
            if (i > 0) REQUIRE(rows[i].s < rows[i - 1].s);
        }
    }

    SECTION("shrinking the padding weight alone lowers the exponent") {
        auto [spec, pcd] = load("cross_dendrite_quarter.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        double s_a = solve_s_m(sys, spec, pcd, 2, 1e-3, 1.0).s;
        double s_b = solve_s_m(sys, spec, pcd, 2, 0.5e-3, 1.0).s;
        double s_c = solve_s_m(sys, spec, pcd, 2, 0.25e-3, 1.0).s;
        REQUIRE(s_a == Approx(1.008224792832420).margin(1e-9));
        REQUIRE(s_b == Approx(1.004204192578731).margin(1e-9));
        REQUIRE(s_c == Approx(1.002129299532345).margin(1e-9));
        REQUIRE(s_b < s_a);
        REQUIRE(s_c < s_b);
    }

    SECTION("the five-cell cross stays above its topological floor") {
        auto [spec, pcd] = load("vicsek_cross.json");
        PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
        SmSolution tight = solve_s_m(sys, spec, pcd, 2, 1e-6, 1.0);
        REQUIRE(tight.s == Approx(1.333780697440807).margin(1e-9));
        SmSolution halved = solve_s_m(sys, spec, pcd, 2, 0.9, 1.0);
        REQUIRE(halved.delta_used == Approx(0.45).margin(1e-15));
        REQUIRE(halved.halvings == 1);
        REQUIRE(halved.s == Approx(2.768019056411980).margin(1e-9));
    }
}

TEST_CASE("the skeleton drawing is produced deterministically") {
    auto [spec, pcd] = load("vicsek_cross.json");
    PrimaryArcSystem sys = build_primary_arc_system(spec, pcd);
    std::string svg = dendrite_svg(spec, pcd, sys, 2);
    REQUIRE(svg.find("<svg") == 0);
    REQUIRE(svg.find("polyline") != std::string::npos);
    REQUIRE(svg == dendrite_svg(spec, pcd, sys, 2));
}
