#include <catch_amalgamated.hpp>

#include <cmath>

#include <nlohmann/json.hpp>

#include "fractop/ifs.hpp"

using namespace fractop;

namespace {

IfsSpec sierpinski() { return IfsSpec::load("fixtures/sierpinski.json"); }
IfsSpec antenna() { return IfsSpec::load("fixtures/antenna_quarter.json"); }

// Oracle for the coding map: iterate the truncated compositions from the
// anchor until the contraction has squeezed the error below 1e-13.
Vec2 eval_by_iteration(const IfsSpec& spec, const EvPeriodicWord& w) {
    Vec2 z = spec.anchor();
    FiniteWord head = w.prefix(120);
    for (auto it = head.rbegin(); it != head.rend(); ++it) z = spec.map(*it).apply(z);
    return z;
}

} // namespace

TEST_CASE("coding map evaluation matches the iterative oracle") {
    auto specs = {sierpinski(), antenna()};
    std::vector<EvPeriodicWord> words = {
        EvPeriodicWord::make({}, {1}),
        EvPeriodicWord::make({}, {2}),
        EvPeriodicWord::make({1}, {2}),
        EvPeriodicWord::make({2, 1}, {3}),
        EvPeriodicWord::make({}, {1, 2, 3}),
        EvPeriodicWord::make({3, 1}, {2, 1}),
    };
    for (const auto& spec : specs) {
        for (const auto& w : words) {
            Vec2 closed = spec.eval(w);
            Vec2 iter = eval_by_iteration(spec, w);
            CAPTURE(w.str());
            REQUIRE(dist(closed, iter) < 1e-12);
        }
    }
}

TEST_CASE("coding map fixture values") {
    auto sg = sierpinski();
    Vec2 a3 = sg.eval(EvPeriodicWord::constant(3));
    REQUIRE(std::abs(a3.x - 0.5) < 1e-12);
    REQUIRE(std::abs(a3.y - std::sqrt(3.0) / 2.0) < 1e-12);

    // Midpoint of the bottom edge has two codings that must evaluate equal.
    Vec2 m1 = sg.eval(EvPeriodicWord::make({1}, {2}));
    Vec2 m2 = sg.eval(EvPeriodicWord::make({2}, {1}));
    REQUIRE(dist(m1, m2) < 1e-12);
    REQUIRE(std::abs(m1.x - 0.5) < 1e-12);
    REQUIRE(std::abs(m1.y) < 1e-12);

    auto ka = antenna();
    Vec2 mid = ka.eval(EvPeriodicWord::make({1}, {3}));
    REQUIRE(dist(mid, Vec2{0.5, 0.0}) < 1e-12);
    // Antenna tip of the upper arm: f4 applied to the right endpoint.
    Vec2 tip = ka.eval(EvPeriodicWord::make({4}, {3}));
    REQUIRE(dist(tip, Vec2{0.5, 0.25}) < 1e-12);
}

TEST_CASE("post-critical set of the gasket is its three vertices") {
    auto sg = sierpinski();
    auto pcd = compute_post_critical(sg);
    REQUIRE(pcd.points.size() == 3);
    REQUIRE(pcd.codings.size() == 3);
    REQUIRE(pcd.boundary_symbols == std::vector<Symbol>{1, 2, 3});
    for (const auto& pc : pcd.points) REQUIRE(pc.codings.size() == 1);

    REQUIRE(pcd.critical.size() == 3);
    for (const auto& cc : pcd.critical) REQUIRE(cc.codings.size() == 2);

    // The class of the bottom midpoint holds exactly 1(2) and 2(1).
    int found = -1;
    for (std::size_t c = 0; c < pcd.critical.size(); ++c)
        if (dist(pcd.critical[c].point, Vec2{0.5, 0.0}) < 1e-9) found = static_cast<int>(c);
    REQUIRE(found >= 0);
    const auto& cls = pcd.critical[static_cast<std::size_t>(found)];
    REQUIRE(cls.codings[0] == EvPeriodicWord::make({1}, {2}));
    REQUIRE(cls.codings[1] == EvPeriodicWord::make({2}, {1}));
}

TEST_CASE("post-critical set of the antenna dendrite is the pair {0, 1}") {
    auto ka = antenna();
    auto pcd = compute_post_critical(ka);
    REQUIRE(pcd.points.size() == 2);
    REQUIRE(pcd.boundary_symbols == std::vector<Symbol>{1, 3});

    // One critical point carried by all four cylinders.
    REQUIRE(pcd.critical.size() == 1);
    const auto& cc = pcd.critical.front();
    REQUIRE(dist(cc.point, Vec2{0.5, 0.0}) < 1e-9);
    REQUIRE(cc.codings.size() == 4);
    REQUIRE(cc.symbols == std::vector<Symbol>{1, 2, 3, 4});
    REQUIRE(cc.codings.front() == EvPeriodicWord::make({1}, {3}));
}

TEST_CASE("lowest coding rewrites through the critical classes") {
    auto sg = sierpinski();
    auto pcd = compute_post_critical(sg);
    auto low = lowest_coding(sg, pcd, EvPeriodicWord::make({2}, {1}));
    REQUIRE(low == EvPeriodicWord::make({1}, {2}));

    // Prefixes ride along unchanged.
    auto low2 = lowest_coding(sg, pcd, EvPeriodicWord::make({3, 2}, {1}));
    REQUIRE(low2 == EvPeriodicWord::make({3, 1}, {2}));

    // Already-lowest codings are fixed points.
    auto low3 = lowest_coding(sg, pcd, EvPeriodicWord::make({1}, {2}));
    REQUIRE(low3 == EvPeriodicWord::make({1}, {2}));

    auto ka = antenna();
    auto kpcd = compute_post_critical(ka);
    auto klow = lowest_coding(ka, kpcd, EvPeriodicWord::make({4}, {1}));
    REQUIRE(klow == EvPeriodicWord::make({1}, {3}));
    auto cls = coding_class(ka, kpcd, EvPeriodicWord::make({3}, {1}));
    REQUIRE(cls.size() == 4);
}

TEST_CASE("coding equivalence classes stay point-consistent") {
    auto sg = sierpinski();
    auto pcd = compute_post_critical(sg);
    auto cls = coding_class(sg, pcd, EvPeriodicWord::make({3, 1, 2}, {1}));
    REQUIRE(cls.size() >= 2);
    Vec2 p = sg.eval(cls.front());
    for (const auto& w : cls) REQUIRE(dist(p, sg.eval(w)) < 1e-9);
}

TEST_CASE("separation report for the gasket") {
    auto sg = sierpinski();
    auto pcd = compute_post_critical(sg);
    auto rep = verify_sic_asc(sg, pcd, 7);
    REQUIRE(rep.sic_ok);
    REQUIRE(rep.asc_ok);
    REQUIRE(rep.violations.empty());
    // All first-level cylinder pairs touch, so no xi1 witness exists.
    REQUIRE(std::isinf(rep.xi1));
    // Each vertex sits at distance 1/2 from the opposite cylinder.
    REQUIRE(rep.xi2 > 0.4);
    REQUIRE(rep.xi2 < 0.5 + 1e-9);
    REQUIRE(rep.diam_lower > 0.99);
    REQUIRE(rep.diam_upper >= 1.0);
    REQUIRE(rep.asc_constant > 0.3);
}

TEST_CASE("separation report for the antenna dendrite") {
    auto ka = antenna();
    auto pcd = compute_post_critical(ka);
    auto rep = verify_sic_asc(ka, pcd, 7);
    REQUIRE(rep.sic_ok);
    REQUIRE(rep.asc_ok);
    REQUIRE(std::isinf(rep.xi1));
    // Closest exterior approach: the arm cylinders against the endpoints,
    // true gap just under 0.46.
    REQUIRE(rep.xi2 > 0.4);
    REQUIRE(rep.xi2 < 0.5);
}

TEST_CASE("symbolic cylinder intersection tracks the geometry") {
    auto sg = sierpinski();
    auto pcd = compute_post_critical(sg);
    REQUIRE(cylinders_intersect(sg, pcd, {1, 2}, {2, 1}));
    REQUIRE_FALSE(cylinders_intersect(sg, pcd, {1, 2}, {2, 2}));
    REQUIRE(cylinders_intersect(sg, pcd, {1, 1}, {1, 2}));
    REQUIRE(cylinders_intersect(sg, pcd, {1, 2, 2}, {2, 1, 1}));
    REQUIRE_FALSE(cylinders_intersect(sg, pcd, {1, 1, 2}, {2, 1, 1}));

    auto ka = antenna();
    auto kpcd = compute_post_critical(ka);
    REQUIRE(cylinders_intersect(ka, kpcd, {1, 3}, {3, 1}));
    REQUIRE(cylinders_intersect(ka, kpcd, {2, 1}, {4, 1}));
    REQUIRE_FALSE(cylinders_intersect(ka, kpcd, {2, 1}, {4, 3}));
    REQUIRE_FALSE(cylinders_intersect(ka, kpcd, {1, 1}, {3, 3}));
}

TEST_CASE("spec validation rejects malformed input") {
    nlohmann::json bad = {{"maps", nlohmann::json::array()}};
    REQUIRE_THROWS_AS(IfsSpec::from_json(bad), Error);

    nlohmann::json wrong_ratio = {
        {"maps", {{{"ratio", 1.5}, {"translation", {0.0, 0.0}}}}}};
    try {
        IfsSpec::from_json(wrong_ratio);
        FAIL("expected a validation error");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::InvalidSpec);
    }
}
