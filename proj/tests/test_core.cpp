#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "hskip/core.hpp"
#include "hskip/rng.hpp"

using namespace hskip;

namespace {

/// Independent oracle: first disagreement by linear bit scan.
int scan_common_prefix(const BitStream& a, const BitStream& b) {
    for (int j = 0; j < std::min(a.cap(), b.cap()); ++j)
        if (a.bit(j) != b.bit(j)) return j;
    throw LevelOverflow("identical streams");
}

}  // namespace

TEST_CASE("bit queries are deterministic and capped", "[core]") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 32; ++trial) {
        BitStream s(rng.next());
        const int j = static_cast<int>(rng.index(256));
        CHECK(s.bit(j) == s.bit(j));
        BitStream same(s.seed());
        CHECK(same.bit(j) == s.bit(j));
    }
    BitStream s(42);
    CHECK_THROWS_AS(s.bit(256), LevelOverflow);
    CHECK_THROWS_AS(s.bit(-1), LevelOverflow);
    CHECK_NOTHROW(s.bit(255));

    BitStream short_cap(42, 8);
    CHECK_NOTHROW(short_cap.bit(7));
    CHECK_THROWS_AS(short_cap.bit(8), LevelOverflow);
}

TEST_CASE("distinct seeds give distinct 256-bit expansions", "[core]") {
    BitStream a(0x1), b(0x2);
    bool differ = false;
    for (int j = 0; j < 256 && !differ; ++j) differ = a.bit(j) != b.bit(j);
    CHECK(differ);
}

TEST_CASE("common_prefix matches the linear-scan oracle and is symmetric", "[core]") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        BitStream a(rng.next()), b(rng.next());
        const int cp = common_prefix(a, b);
        CHECK(cp == scan_common_prefix(a, b));
        CHECK(cp == common_prefix(b, a));
    }
}

TEST_CASE("common_prefix on explicit patterns", "[core]") {
    CHECK(common_prefix(BitStream::from_bits("101"), BitStream::from_bits("100")) == 2);
    CHECK(common_prefix(BitStream::from_bits("0"), BitStream::from_bits("1")) == 0);
    BitStream s(99);
    BitStream t(99);
    CHECK_THROWS_AS(common_prefix(s, t), LevelOverflow);
}

TEST_CASE("prefix reads the leading bits", "[core]") {
    BitStream s = BitStream::from_bits("101");
    CHECK(s.prefix(0).empty());
    CHECK(s.prefix(3) == std::vector<std::uint8_t>{1, 0, 1});
    CHECK_THROWS_AS(s.prefix(257), LevelOverflow);

    SplitMix64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        BitStream a(rng.next()), b(rng.next());
        const int cp = common_prefix(a, b);
        CHECK(a.prefix(cp) == b.prefix(cp));
        // Nesting: equality at i+1 implies equality at i.
        for (int i = 0; i < cp; ++i) CHECK(prefix_equal(a, b, i));
        CHECK_FALSE(prefix_equal(a, b, cp + 1));
    }
}

TEST_CASE("bandwidth keys are a strict total order", "[core]") {
    SplitMix64 rng(5);
    std::vector<BandwidthKey> keys;
    for (int i = 0; i < 64; ++i)
        keys.push_back({rng.uniform(1.0, 4.0), rng.below(8)});  // many bw collisions
    for (const auto& a : keys) {
        CHECK_FALSE(a < a);
        for (const auto& b : keys) {
            if (!(a == b)) CHECK((a < b) != (b < a));  // totality
            for (const auto& c : keys)
                if (a < b && b < c) CHECK(a < c);  // transitivity
        }
    }
    CHECK(BandwidthKey{2.0, 1} < BandwidthKey{2.0, 2});
    CHECK(BandwidthKey{1.0, 9} < BandwidthKey{2.0, 1});
}

TEST_CASE("F4 fixture ids derive the expected stream prefixes", "[core]") {
    using namespace testutil;
    CHECK(BitStream(seed_from_id(A)).prefix(2) == std::vector<std::uint8_t>{0, 0});
    CHECK(BitStream(seed_from_id(B)).prefix(2) == std::vector<std::uint8_t>{0, 1});
    CHECK(BitStream(seed_from_id(C)).prefix(2) == std::vector<std::uint8_t>{1, 0});
    CHECK(BitStream(seed_from_id(D)).prefix(2) == std::vector<std::uint8_t>{1, 1});
}
