#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hskip/core.hpp"

namespace hskip::oracle {

struct NodeInfo {
    NodeId id = 0;
    BitStream rs{0};
    double bw = 0.0;

    BandwidthKey key() const noexcept { return {bw, id}; }
};

/// Omniscient snapshot of the true current values of every live node.
/// All topology definitions below are evaluated against it.
class GlobalView {
public:
    GlobalView() = default;

    explicit GlobalView(std::vector<NodeInfo> nodes) : nodes_(std::move(nodes)) {
        std::sort(nodes_.begin(), nodes_.end(),
                  [](const NodeInfo& a, const NodeInfo& b) { return a.id < b.id; });
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (nodes_[i].id == nodes_[i - 1].id) throw Error("duplicate node id in view");
        key_order_.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) key_order_[i] = i;
        std::sort(key_order_.begin(), key_order_.end(), [this](std::size_t a, std::size_t b) {
            return nodes_[a].key() < nodes_[b].key();
        });
        rank_of_pos_.resize(nodes_.size());
        for (std::size_t r = 0; r < key_order_.size(); ++r) rank_of_pos_[key_order_[r]] = r;
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    bool contains(NodeId id) const noexcept { return find_pos(id).has_value(); }

    const NodeInfo& at(NodeId id) const {
        const auto pos = find_pos(id);
        if (!pos) throw UnknownNode("node " + std::to_string(id) + " not in view");
        return nodes_[*pos];
    }

    /// Nodes in ascending id order.
    const std::vector<NodeInfo>& nodes() const noexcept { return nodes_; }

    /// Positions into nodes() in ascending BandwidthKey order.
    const std::vector<std::size_t>& key_order() const noexcept { return key_order_; }

    std::size_t rank_in_key_order(NodeId id) const { return rank_of_pos_[pos_or_throw(id)]; }

    const NodeInfo& by_rank(std::size_t rank) const { return nodes_[key_order_[rank]]; }

private:
    std::optional<std::size_t> find_pos(NodeId id) const noexcept {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                   [](const NodeInfo& n, NodeId v) { return n.id < v; });
        if (it == nodes_.end() || it->id != id) return std::nullopt;
        return static_cast<std::size_t>(it - nodes_.begin());
    }

    std::size_t pos_or_throw(NodeId id) const {
        const auto pos = find_pos(id);
        if (!pos) throw UnknownNode("node " + std::to_string(id) + " not in view");
        return *pos;
    }

    std::vector<NodeInfo> nodes_;
    std::vector<std::size_t> key_order_;
    std::vector<std::size_t> rank_of_pos_;
};

/// Nodes sharing an i-bit prefix with v, v included. Level 0 is everyone.
inline std::vector<NodeId> component(const GlobalView& view, NodeId v, int i) {
    const NodeInfo& self = view.at(v);
    std::vector<NodeId> out;
    for (const NodeInfo& n : view.nodes()) {
        if (n.id == v || prefix_equal(n.rs, self.rs, i)) out.push_back(n.id);
    }
    return out;
}

/// Maximum common prefix over distinct pairs; 0 for degenerate views.
inline int graph_level(const GlobalView& view) {
    if (view.size() < 2) return 0;
    // Split the key-ordered node list by successive bits; the level of the
    // view is the last depth at which some group still has two members.
    std::vector<std::vector<std::size_t>> groups{view.key_order()};
    int level = 0;
    for (int i = 0;; ++i) {
        bool nontrivial = false;
        std::vector<std::vector<std::size_t>> next;
        for (const auto& g : groups) {
            if (g.size() < 2) continue;
            nontrivial = true;
            std::vector<std::size_t> zero, one;
            for (std::size_t pos : g)
                (view.nodes()[pos].rs.bit(i) ? one : zero).push_back(pos);
            next.push_back(std::move(zero));
            next.push_back(std::move(one));
        }
        if (!nontrivial) return level;
        level = i;
        if (std::all_of(next.begin(), next.end(),
                        [](const auto& g) { return g.size() < 2; }))
            return level;
        groups = std::move(next);
    }
}

/// Nearest predecessor of v (next higher key) that shares an i-bit prefix and
/// whose bit i equals b. Together with first_succ these are the per-bit
/// neighbors whose farther one bounds the range.
inline std::optional<NodeId> first_pred(const GlobalView& view, NodeId v, int i, int b) {
    const NodeInfo& self = view.at(v);
    const std::size_t rank = view.rank_in_key_order(v);
    for (std::size_t r = rank + 1; r < view.size(); ++r) {
        const NodeInfo& u = view.by_rank(r);
        if (prefix_equal(u.rs, self.rs, i) && u.rs.bit(i) == b) return u.id;
    }
    return std::nullopt;
}

inline std::optional<NodeId> first_succ(const GlobalView& view, NodeId v, int i, int b) {
    const NodeInfo& self = view.at(v);
    const std::size_t rank = view.rank_in_key_order(v);
    for (std::size_t r = rank; r-- > 0;) {
        const NodeInfo& u = view.by_rank(r);
        if (prefix_equal(u.rs, self.rs, i) && u.rs.bit(i) == b) return u.id;
    }
    return std::nullopt;
}

/// The farther (higher key) of the two existing per-bit predecessors.
inline std::optional<NodeId> farthest_pred(const GlobalView& view, NodeId v, int i) {
    const auto p0 = first_pred(view, v, i, 0);
    const auto p1 = first_pred(view, v, i, 1);
    if (!p0) return p1;
    if (!p1) return p0;
    return view.at(*p0).key() > view.at(*p1).key() ? p0 : p1;
}

inline std::optional<NodeId> farthest_succ(const GlobalView& view, NodeId v, int i) {
    const auto s0 = first_succ(view, v, i, 0);
    const auto s1 = first_succ(view, v, i, 1);
    if (!s0) return s1;
    if (!s1) return s0;
    return view.at(*s0).key() < view.at(*s1).key() ? s0 : s1;
}

/// All component members between the farthest bounds. A missing bound means
/// there is nothing on that side at this level, so that side stays empty.
inline std::vector<NodeId> range(const GlobalView& view, NodeId v, int i) {
    const NodeInfo& self = view.at(v);
    const auto fp = farthest_pred(view, v, i);
    const auto fs = farthest_succ(view, v, i);
    const BandwidthKey hi = fp ? view.at(*fp).key() : self.key();
    const BandwidthKey lo = fs ? view.at(*fs).key() : self.key();
    std::vector<NodeId> out;
    for (const NodeInfo& n : view.nodes()) {
        if (n.id == v) continue;
        if (!prefix_equal(n.rs, self.rs, i)) continue;
        const BandwidthKey k = n.key();
        if (lo <= k && k <= hi) out.push_back(n.id);
    }
    return out;
}

struct TargetEdge {
    NodeId src = 0;
    NodeId dst = 0;
    int level = 0;  // lowest witnessing level

    friend bool operator==(const TargetEdge&, const TargetEdge&) = default;
};

/// The HSkip+ edge set: (v, w) for every w in range(v, i) at some level i.
/// Sorted by (src, dst); each edge carries its lowest witnessing level.
class TargetEdgeSet {
public:
    TargetEdgeSet() = default;
    explicit TargetEdgeSet(std::vector<TargetEdge> edges) : edges_(std::move(edges)) {
        std::sort(edges_.begin(), edges_.end(), [](const TargetEdge& a, const TargetEdge& b) {
            if (a.src != b.src) return a.src < b.src;
            if (a.dst != b.dst) return a.dst < b.dst;
            return a.level < b.level;
        });
        edges_.erase(std::unique(edges_.begin(), edges_.end(),
                                 [](const TargetEdge& a, const TargetEdge& b) {
                                     return a.src == b.src && a.dst == b.dst;
                                 }),
                     edges_.end());
    }

    const std::vector<TargetEdge>& edges() const noexcept { return edges_; }
    std::size_t size() const noexcept { return edges_.size(); }

    bool contains(NodeId src, NodeId dst) const noexcept {
        auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{src, dst},
                                   [](const TargetEdge& e, const std::pair<NodeId, NodeId>& p) {
                                       return std::pair{e.src, e.dst} < p;
                                   });
        return it != edges_.end() && it->src == src && it->dst == dst;
    }

    std::vector<std::pair<NodeId, NodeId>> as_pairs() const {
        std::vector<std::pair<NodeId, NodeId>> out;
        out.reserve(edges_.size());
        for (const TargetEdge& e : edges_) out.emplace_back(e.src, e.dst);
        return out;
    }

private:
    std::vector<TargetEdge> edges_;
};

/// Builds the full target edge set by walking the prefix groups level by
/// level. Equivalent to enumerating range(v, i) for every v and i (the unit
/// tests pin that equivalence) but near-linear per level.
inline TargetEdgeSet target_edges(const GlobalView& view) {
    std::vector<TargetEdge> acc;
    if (view.size() < 2) return TargetEdgeSet{std::move(acc)};

    std::vector<std::vector<std::size_t>> groups{view.key_order()};
    for (int i = 0; !groups.empty(); ++i) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& g : groups) {
            if (g.size() < 2) continue;
            // bits of each member at this level
            std::vector<int> bits(g.size());
            for (std::size_t p = 0; p < g.size(); ++p)
                bits[p] = view.nodes()[g[p]].rs.bit(i);
            for (std::size_t p = 0; p < g.size(); ++p) {
                // nearest member above/below per next-bit value
                std::size_t hi = p, lo = p;
                {
                    bool seen0 = false, seen1 = false;
                    for (std::size_t q = p + 1; q < g.size() && !(seen0 && seen1); ++q) {
                        if (bits[q] == 0 && !seen0) { seen0 = true; hi = std::max(hi, q); }
                        if (bits[q] == 1 && !seen1) { seen1 = true; hi = std::max(hi, q); }
                    }
                }
                {
                    bool seen0 = false, seen1 = false;
                    for (std::size_t q = p; q-- > 0 && !(seen0 && seen1);) {
                        if (bits[q] == 0 && !seen0) { seen0 = true; lo = std::min(lo, q); }
                        if (bits[q] == 1 && !seen1) { seen1 = true; lo = std::min(lo, q); }
                    }
                }
                const NodeId v = view.nodes()[g[p]].id;
                for (std::size_t q = lo; q <= hi; ++q) {
                    if (q == p) continue;
                    acc.push_back({v, view.nodes()[g[q]].id, i});
                }
            }
            std::vector<std::size_t> zero, one;
            for (std::size_t p = 0; p < g.size(); ++p)
                (bits[p] ? one : zero).push_back(g[p]);
            if (zero.size() >= 2) next.push_back(std::move(zero));
            if (one.size() >= 2) next.push_back(std::move(one));
        }
        groups = std::move(next);
    }
    return TargetEdgeSet{std::move(acc)};
}

/// One neighborhood entry as collected from a live node or a dump: holder,
/// subject, and the bandwidth the holder has cached for the subject.
struct StoredRef {
    NodeId src = 0;
    NodeId dst = 0;
    double cached_bw = 0.0;
};

/// Legality verdict plus the diff that explains it. Legal means the explicit
/// edges equal the target edge set exactly and every cache is fresh.
struct LegalityReport {
    std::vector<TargetEdge> missing;                    // in target, not stored
    std::vector<std::pair<NodeId, NodeId>> surplus;     // stored, not in target
    std::vector<std::pair<NodeId, NodeId>> stale;       // stored with wrong cached bw

    bool legal() const noexcept { return missing.empty() && surplus.empty() && stale.empty(); }

    std::vector<std::string> diff_lines() const {
        std::vector<std::string> out;
        for (const TargetEdge& e : missing)
            out.push_back("MISSING " + std::to_string(e.src) + "→" + std::to_string(e.dst) +
                          "@" + std::to_string(e.level));
        for (const auto& [s, d] : surplus)
            out.push_back("SURPLUS " + std::to_string(s) + "→" + std::to_string(d));
        for (const auto& [s, d] : stale)
            out.push_back("STALE " + std::to_string(s) + ":" + std::to_string(d));
        return out;
    }
};

inline LegalityReport check_legality(const GlobalView& view, std::vector<StoredRef> stored) {
    std::sort(stored.begin(), stored.end(), [](const StoredRef& a, const StoredRef& b) {
        return std::pair{a.src, a.dst} < std::pair{b.src, b.dst};
    });
    const TargetEdgeSet target = target_edges(view);

    LegalityReport rep;
    for (const TargetEdge& e : target.edges()) {
        auto it = std::lower_bound(stored.begin(), stored.end(), std::pair{e.src, e.dst},
                                   [](const StoredRef& r, const std::pair<NodeId, NodeId>& p) {
                                       return std::pair{r.src, r.dst} < p;
                                   });
        if (it == stored.end() || it->src != e.src || it->dst != e.dst) rep.missing.push_back(e);
    }
    for (const StoredRef& r : stored) {
        if (!view.contains(r.src) || !view.contains(r.dst)) {
            rep.surplus.emplace_back(r.src, r.dst);
            continue;
        }
        if (!target.contains(r.src, r.dst)) rep.surplus.emplace_back(r.src, r.dst);
        if (r.cached_bw != view.at(r.dst).bw) rep.stale.emplace_back(r.src, r.dst);
    }
    return rep;
}

}  // namespace hskip::oracle
