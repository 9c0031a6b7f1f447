#include <catch_amalgamated.hpp>

#include "fractop/words.hpp"

using namespace fractop;

TEST_CASE("eventually periodic words normalize to primitive period and minimal preperiod") {
    auto w = EvPeriodicWord::make({1, 2}, {3, 1, 3, 1});
    REQUIRE(w.per == FiniteWord{3, 1});

    // 1 (31)^inf spells the same stream as (13)^inf.
    auto rolled = EvPeriodicWord::make({1}, {3, 1});
    REQUIRE(rolled.pre.empty());
    REQUIRE(rolled.per == FiniteWord{1, 3});

    auto chain = EvPeriodicWord::make({2, 1, 1}, {1});
    REQUIRE(chain.pre == FiniteWord{2});
    REQUIRE(chain.per == FiniteWord{1});
    REQUIRE(chain.str() == "2(1)");
}

TEST_CASE("symbol access, prefixes, and shifts agree with the expanded stream") {
    auto w = EvPeriodicWord::make({1, 2}, {3, 4});
    FiniteWord head = w.prefix(7);
    REQUIRE(head == FiniteWord{1, 2, 3, 4, 3, 4, 3});
    REQUIRE(w.at(0) == 1);
    REQUIRE(w.at(5) == 4);

    auto s = w.suffix(3);
    REQUIRE(s.at(0) == 4);
    REQUIRE(s.at(1) == 3);

    // Shifting past the preperiod rotates the period.
    auto t = EvPeriodicWord::make({}, {1, 2, 3}).suffix(4);
    REQUIRE(t == EvPeriodicWord::make({}, {2, 3, 1}));

    // A shift never changes the coded stream.
    for (std::size_t k = 0; k < 6; ++k) {
        auto sk = w.suffix(k);
        for (std::size_t p = 0; p < 10; ++p) REQUIRE(sk.at(p) == w.at(k + p));
    }
}

TEST_CASE("lexicographic order compares infinite expansions, not representations") {
    auto a = EvPeriodicWord::make({1}, {2});    // 1222...
    auto b = EvPeriodicWord::make({1, 2}, {2}); // same stream
    REQUIRE(a == b);
    REQUIRE_FALSE(lex_less(a, b));
    REQUIRE_FALSE(lex_less(b, a));

    auto c = EvPeriodicWord::make({}, {1, 2}); // 1212...
    REQUIRE(lex_less(c, a));                   // 12122... < 12222...
    REQUIRE(common_prefix_length(c, a) == 2);

    auto d = EvPeriodicWord::make({}, {2, 1});
    REQUIRE(lex_less(c, d));
    REQUIRE(common_prefix_length(c, d) == 0);
}

TEST_CASE("prefix attachment composes with shifts") {
    auto w = EvPeriodicWord::make({}, {3});
    auto v = w.with_prefix({1, 2});
    REQUIRE(v.prefix(4) == FiniteWord{1, 2, 3, 3});
    REQUIRE(v.suffix(2) == w);
}
