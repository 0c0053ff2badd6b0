#pragma once

// Shared fixtures. F4 is the four-node network used throughout: bandwidth
// order A > B > C > D with bit streams 00…, 01…, 10…, 11…, which makes every
// neighborhood small enough to verify by hand.

#include <map>
#include <vector>

#include "hskip/experiments.hpp"
#include "hskip/oracle.hpp"
#include "hskip/protocol.hpp"
#include "hskip/rng.hpp"
#include "hskip/simnet.hpp"

namespace testutil {

using namespace hskip;

// Ids chosen so the id-derived streams begin 00, 01, 10, 11; a test pins
// these prefixes so any change to the stream derivation fails loudly.
inline constexpr NodeId A = 2, B = 1, C = 12, D = 3;

inline std::vector<oracle::NodeInfo> f4_infos() {
    return {
        {A, BitStream(seed_from_id(A)), 40.0},
        {B, BitStream(seed_from_id(B)), 30.0},
        {C, BitStream(seed_from_id(C)), 20.0},
        {D, BitStream(seed_from_id(D)), 10.0},
    };
}

inline oracle::GlobalView f4_view() { return oracle::GlobalView(f4_infos()); }

/// The hand-derived HSkip+ edges of F4.
inline std::vector<std::pair<NodeId, NodeId>> f4_target_pairs() {
    return {{A, B}, {A, C}, {B, A}, {B, C}, {C, B}, {C, D}, {D, B}, {D, C}};
}

/// Node states whose neighborhoods equal the target neighborhoods with fresh
/// caches, i.e. a legal protocol fixpoint.
inline std::map<NodeId, NodeState> fixpoint_states(const oracle::GlobalView& view) {
    std::map<NodeId, NodeState> states;
    for (const auto& n : view.nodes()) states.emplace(n.id, NodeState(n.id, n.rs, n.bw));
    const auto target = oracle::target_edges(view);
    for (const auto& e : target.edges()) {
        const auto& dst = view.at(e.dst);
        states.at(e.src).seed_ref({dst.id, dst.rs, dst.bw});
    }
    return states;
}

inline std::map<NodeId, NodeState> f4_fixpoint() { return fixpoint_states(f4_view()); }

/// Random view with id-derived streams; bandwidths uniform in (1, 100).
inline oracle::GlobalView random_view(int n, std::uint64_t seed) {
    SplitMix64 rng(mix64(seed ^ 0x9216d5d98979fb1bULL));
    std::vector<oracle::NodeInfo> infos;
    for (int i = 1; i <= n; ++i)
        infos.push_back({static_cast<NodeId>(i), BitStream(seed_from_id(static_cast<NodeId>(i))),
                         rng.uniform(1.0, 100.0)});
    return oracle::GlobalView(std::move(infos));
}

/// Independent oracle for target_edges: enumerate range(v, i) per operation
/// definitions, no grouping shortcuts.
inline std::vector<std::pair<NodeId, NodeId>> brute_force_target_pairs(
    const oracle::GlobalView& view) {
    std::vector<std::pair<NodeId, NodeId>> out;
    const int top = oracle::graph_level(view);
    for (const auto& n : view.nodes())
        for (int i = 0; i <= top; ++i)
            for (NodeId w : oracle::range(view, n.id, i)) out.emplace_back(n.id, w);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::vector<std::pair<NodeId, NodeId>> sorted_pairs(
    std::vector<std::pair<NodeId, NodeId>> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

/// World whose live nodes and explicit edges mirror a legal fixpoint of the
/// given view.
inline World fixpoint_world(const oracle::GlobalView& view, std::uint64_t rng_seed = 7) {
    World w(rng_seed);
    for (const auto& n : view.nodes()) {
        // Worlds derive streams from ids, so the view must use id-derived
        // streams for this helper.
        w.add_node(n.id, n.bw);
    }
    const auto target = oracle::target_edges(view);
    for (const auto& e : target.edges()) w.seed_edge(e.src, e.dst);
    return w;
}

}  // namespace testutil
