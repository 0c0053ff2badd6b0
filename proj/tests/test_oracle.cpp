#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <set>

#include "helpers.hpp"
#include "hskip/oracle.hpp"

using namespace hskip;
using namespace testutil;

namespace {

std::vector<NodeId> ids_of(const oracle::GlobalView& v) {
    std::vector<NodeId> out;
    for (const auto& n : v.nodes()) out.push_back(n.id);
    return out;
}

bool undirected_connected(const std::vector<NodeId>& ids,
                          const std::vector<std::pair<NodeId, NodeId>>& edges) {
    if (ids.size() <= 1) return true;
    std::map<NodeId, NodeId> parent;
    for (NodeId id : ids) parent[id] = id;
    std::function<NodeId(NodeId)> find = [&](NodeId x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : edges) parent[find(a)] = find(b);
    for (NodeId id : ids)
        if (find(id) != find(ids.front())) return false;
    return true;
}

}  // namespace

TEST_CASE("component filters by shared prefix", "[oracle]") {
    const auto view = f4_view();
    CHECK(oracle::component(view, B, 0) == std::vector<NodeId>{B, A, D, C});  // id order
    CHECK(oracle::component(view, B, 1) == std::vector<NodeId>{B, A});
    CHECK(oracle::component(view, C, 1) == std::vector<NodeId>{D, C});
    CHECK_THROWS_AS(oracle::component(view, 999, 0), UnknownNode);

    // nesting over random views
    const auto rv = random_view(24, 5);
    for (const auto& n : rv.nodes()) {
        for (int i = 0; i < 4; ++i) {
            const auto inner = oracle::component(rv, n.id, i + 1);
            const auto outer = oracle::component(rv, n.id, i);
            const std::set<NodeId> outer_set(outer.begin(), outer.end());
            for (NodeId w : inner) CHECK(outer_set.count(w) == 1);
        }
    }
}

TEST_CASE("graph_level is the maximum pairwise common prefix", "[oracle]") {
    CHECK(oracle::graph_level(f4_view()) == 1);

    oracle::GlobalView two({{1, BitStream::from_bits("0"), 2.0},
                            {2, BitStream::from_bits("1"), 1.0}});
    CHECK(oracle::graph_level(two) == 0);

    oracle::GlobalView one({{1, BitStream(seed_from_id(1)), 1.0}});
    CHECK(oracle::graph_level(one) == 0);

    // against the naive all-pairs maximum
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto rv = random_view(33, seed);
        int naive = 0;
        for (const auto& a : rv.nodes())
            for (const auto& b : rv.nodes())
                if (a.id < b.id) naive = std::max(naive, common_prefix(a.rs, b.rs));
        CHECK(oracle::graph_level(rv) == naive);
    }
}

TEST_CASE("first_pred / first_succ pick the nearest per-bit neighbor", "[oracle]") {
    const auto view = f4_view();
    CHECK(oracle::first_pred(view, D, 0, 0) == B);
    CHECK(oracle::first_pred(view, D, 0, 1) == C);
    CHECK_FALSE(oracle::first_pred(view, C, 0, 1).has_value());
    CHECK_FALSE(oracle::first_pred(view, A, 0, 0).has_value());  // maximal key
    CHECK_FALSE(oracle::first_pred(view, A, 0, 1).has_value());

    CHECK(oracle::first_succ(view, A, 0, 1) == C);
    CHECK(oracle::first_succ(view, A, 0, 0) == B);
    CHECK_FALSE(oracle::first_succ(view, B, 0, 0).has_value());
    CHECK_FALSE(oracle::first_succ(view, D, 0, 0).has_value());  // minimal key
}

TEST_CASE("farthest bounds take the farther existing per-bit neighbor", "[oracle]") {
    const auto view = f4_view();
    CHECK(oracle::farthest_pred(view, D, 0) == B);
    CHECK(oracle::farthest_succ(view, B, 0) == C);
    CHECK_FALSE(oracle::farthest_pred(view, A, 0).has_value());
    CHECK(oracle::farthest_succ(view, A, 0) == C);
}

TEST_CASE("range spans the component between the farthest bounds", "[oracle]") {
    const auto view = f4_view();
    CHECK(sorted_pairs({}).empty());
    auto r = oracle::range(view, A, 0);
    std::sort(r.begin(), r.end());
    CHECK(r == std::vector<NodeId>{B, C});
    CHECK(oracle::range(view, B, 1) == std::vector<NodeId>{A});

    oracle::GlobalView single({{7, BitStream(seed_from_id(7)), 3.0}});
    for (int i = 0; i < 4; ++i) CHECK(oracle::range(single, 7, i).empty());

    // range is always inside the component
    const auto rv = random_view(20, 9);
    for (const auto& n : rv.nodes())
        for (int i = 0; i <= oracle::graph_level(rv); ++i) {
            const auto comp = oracle::component(rv, n.id, i);
            const std::set<NodeId> comp_set(comp.begin(), comp.end());
            for (NodeId w : oracle::range(rv, n.id, i)) {
                CHECK(comp_set.count(w) == 1);
                CHECK(w != n.id);
            }
        }
}

TEST_CASE("target_edges matches the hand-derived F4 network", "[oracle]") {
    const auto edges = oracle::target_edges(f4_view());
    CHECK(sorted_pairs(edges.as_pairs()) == sorted_pairs(f4_target_pairs()));

    oracle::GlobalView two({{1, BitStream(seed_from_id(1)), 2.0},
                            {2, BitStream(seed_from_id(2)), 1.0}});
    CHECK(sorted_pairs(oracle::target_edges(two).as_pairs()) ==
          sorted_pairs({{1, 2}, {2, 1}}));
}

TEST_CASE("target_edges equals the brute-force enumeration", "[oracle]") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto rv = random_view(static_cast<int>(8 + 7 * seed), seed);
        CHECK(sorted_pairs(oracle::target_edges(rv).as_pairs()) == brute_force_target_pairs(rv));
    }
}

TEST_CASE("level-0 list and per-level closest neighbors are always included", "[oracle]") {
    for (std::uint64_t seed = 20; seed <= 26; ++seed) {
        const auto rv = random_view(40, seed);
        const auto target = oracle::target_edges(rv);
        const int top = oracle::graph_level(rv);
        for (const auto& n : rv.nodes()) {
            for (int i = 0; i <= top; ++i) {
                // closest pred/succ inside component(v, i), the list edges of level i
                const auto comp = oracle::component(rv, n.id, i);
                std::optional<BandwidthKey> pred, succ;
                NodeId pred_id = 0, succ_id = 0;
                for (NodeId w : comp) {
                    if (w == n.id) continue;
                    const auto k = rv.at(w).key();
                    if (k > n.key() && (!pred || k < *pred)) { pred = k; pred_id = w; }
                    if (k < n.key() && (!succ || k > *succ)) { succ = k; succ_id = w; }
                }
                if (pred) {
                    CHECK(target.contains(n.id, pred_id));
                    const auto witnessed = oracle::range(rv, n.id, i);
                    CHECK(std::count(witnessed.begin(), witnessed.end(), pred_id) == 1);
                }
                if (succ) CHECK(target.contains(n.id, succ_id));
            }
        }
    }
}

TEST_CASE("target graphs are connected with logarithmic degree", "[oracle]") {
    int views = 0;
    for (std::uint64_t seed = 1; views < 30; ++seed, ++views) {
        const auto rv = random_view(views % 2 ? 64 : 48, seed);
        const auto target = oracle::target_edges(rv);
        CHECK(undirected_connected(ids_of(rv), target.as_pairs()));
    }
    // empirical degree bound over larger views
    for (int n : {64, 256}) {
        const double bound = 8.0 * std::log2(static_cast<double>(n));
        for (std::uint64_t seed = 100; seed < 150; ++seed) {
            const auto rv = random_view(n, seed);
            std::map<NodeId, int> out_deg;
            for (const auto& [s, d] : oracle::target_edges(rv).as_pairs()) out_deg[s] += 1;
            int max_deg = 0;
            for (const auto& [id, deg] : out_deg) max_deg = std::max(max_deg, deg);
            CHECK(static_cast<double>(max_deg) <= bound);
        }
    }
}

TEST_CASE("legality demands exact edges and fresh caches", "[oracle]") {
    const auto view = f4_view();
    const auto target = oracle::target_edges(view);

    std::vector<oracle::StoredRef> stored;
    for (const auto& e : target.edges()) stored.push_back({e.src, e.dst, view.at(e.dst).bw});

    auto rep = oracle::check_legality(view, stored);
    CHECK(rep.legal());
    CHECK(rep.diff_lines().empty());

    SECTION("missing edge") {
        std::vector<oracle::StoredRef> damaged;
        for (const auto& r : stored)
            if (!(r.src == D && r.dst == B)) damaged.push_back(r);
        const auto bad = oracle::check_legality(view, damaged);
        CHECK_FALSE(bad.legal());
        REQUIRE(bad.missing.size() == 1);
        CHECK(bad.missing[0].src == D);
        CHECK(bad.missing[0].dst == B);
        CHECK(bad.missing[0].level == 0);
        CHECK(bad.surplus.empty());
        CHECK(bad.diff_lines()[0] == "MISSING 3→1@0");
    }

    SECTION("surplus edge") {
        auto extra = stored;
        extra.push_back({A, D, view.at(D).bw});
        const auto bad = oracle::check_legality(view, extra);
        CHECK_FALSE(bad.legal());
        REQUIRE(bad.surplus.size() == 1);
        CHECK(bad.surplus[0] == std::pair{A, D});
    }

    SECTION("stale cache") {
        auto stale = stored;
        for (auto& r : stale)
            if (r.src == A && r.dst == B) r.cached_bw = 29.0;
        const auto bad = oracle::check_legality(view, stale);
        CHECK_FALSE(bad.legal());
        CHECK(bad.missing.empty());
        CHECK(bad.surplus.empty());
        REQUIRE(bad.stale.size() == 1);
        CHECK(bad.stale[0] == std::pair{A, B});
        CHECK(bad.diff_lines()[0] == "STALE 2:1");
    }
}
