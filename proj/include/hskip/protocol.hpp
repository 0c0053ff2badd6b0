#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hskip/core.hpp"

namespace hskip {

/// Portable reference to a node. id and rs never change; bw is the snapshot
/// the holder has cached and may be stale relative to the node's true value.
struct NodeRef {
    NodeId id = 0;
    BitStream rs{0};
    double bw = 0.0;

    BandwidthKey key() const noexcept { return {bw, id}; }
};

enum class MsgKind { build, remove, lookup };

/// Protocol datagram. Build and Remove carry one node reference; Lookup
/// carries the target reference plus the hop trace and routed volume.
struct Message {
    MsgKind kind = MsgKind::build;
    NodeRef node;                  // build/remove payload, or lookup target
    std::vector<NodeId> trace;     // lookup only: nodes that forwarded so far
    double volume = 0.0;           // lookup only

    static Message build(NodeRef x) { return {MsgKind::build, std::move(x), {}, 0.0}; }
    static Message remove(NodeRef x) { return {MsgKind::remove, std::move(x), {}, 0.0}; }
    static Message lookup(NodeRef target, double volume) {
        return {MsgKind::lookup, std::move(target), {}, volume};
    }
};

struct Send {
    NodeId to = 0;
    Message msg;
};

/// What one protocol transition did: messages to enqueue plus the explicit
/// edge churn, which the simulator folds into its metrics.
struct Effects {
    std::vector<Send> sends;
    std::uint64_t edges_added = 0;
    std::uint64_t edges_removed = 0;
};

/// A live node: identity, true current bandwidth, and the neighborhood of
/// cached references. All transitions are deterministic functions of the
/// state and the stimulus; neighbors are always iterated in ascending id.
class NodeState {
public:
    NodeState(NodeId id, BitStream rs, double bw) : id_(id), rs_(std::move(rs)), bw_(bw) {
        if (!(bw > 0.0)) throw InvalidBandwidth("bandwidth must be positive");
    }

    NodeId id() const noexcept { return id_; }
    const BitStream& rs() const noexcept { return rs_; }
    double bw() const noexcept { return bw_; }
    BandwidthKey key() const noexcept { return {bw_, id_}; }
    NodeRef ref() const { return {id_, rs_, bw_}; }

    const std::map<NodeId, NodeRef>& nh() const noexcept { return nh_; }
    std::size_t degree() const noexcept { return nh_.size(); }

    /// Maximum common prefix with any neighbor; 0 for an empty neighborhood.
    int local_level() const {
        int level = 0;
        for (const auto& [id, w] : nh_) level = std::max(level, common_prefix(rs_, w.rs));
        return level;
    }

    /// Nearest cached predecessor at level i whose bit i is b.
    std::optional<NodeRef> local_first_pred(int i, int b) const {
        return scan_per_bit(i, b, /*preds=*/true);
    }
    std::optional<NodeRef> local_first_succ(int i, int b) const {
        return scan_per_bit(i, b, /*preds=*/false);
    }

    /// The farther of the two existing per-bit predecessors at level i.
    std::optional<NodeRef> local_farthest_pred(int i) const {
        auto a = local_first_pred(i, 0), b = local_first_pred(i, 1);
        if (!a) return b;
        if (!b) return a;
        return a->key() > b->key() ? a : b;
    }
    std::optional<NodeRef> local_farthest_succ(int i) const {
        auto a = local_first_succ(i, 0), b = local_first_succ(i, 1);
        if (!a) return b;
        if (!b) return a;
        return a->key() < b->key() ? a : b;
    }

    std::optional<NodeRef> local_closest_pred(int i) const {
        std::optional<NodeRef> best;
        for (const auto& [id, w] : nh_) {
            if (w.key() > key() && prefix_equal(rs_, w.rs, i))
                if (!best || w.key() < best->key()) best = w;
        }
        return best;
    }
    std::optional<NodeRef> local_closest_succ(int i) const {
        std::optional<NodeRef> best;
        for (const auto& [id, w] : nh_) {
            if (w.key() < key() && prefix_equal(rs_, w.rs, i))
                if (!best || w.key() > best->key()) best = w;
        }
        return best;
    }

    /// Neighbors at level i (ascending id), i.e. cached refs sharing an
    /// i-bit prefix.
    std::vector<NodeRef> local_neighbors(int i) const {
        std::vector<NodeRef> out;
        for (const auto& [id, w] : nh_)
            if (prefix_equal(rs_, w.rs, i)) out.push_back(w);
        return out;
    }

    /// Predecessors at level i, nearest first (ascending key).
    std::vector<NodeRef> local_predecessors(int i) const {
        std::vector<NodeRef> out;
        for (const auto& [id, w] : nh_)
            if (w.key() > key() && prefix_equal(rs_, w.rs, i)) out.push_back(w);
        std::sort(out.begin(), out.end(),
                  [](const NodeRef& a, const NodeRef& b) { return a.key() < b.key(); });
        return out;
    }

    /// Successors at level i, nearest first (descending key).
    std::vector<NodeRef> local_successors(int i) const {
        std::vector<NodeRef> out;
        for (const auto& [id, w] : nh_)
            if (w.key() < key() && prefix_equal(rs_, w.rs, i)) out.push_back(w);
        std::sort(out.begin(), out.end(),
                  [](const NodeRef& a, const NodeRef& b) { return b.key() < a.key(); });
        return out;
    }

    /// True iff w is needed at some level: it shares the prefix and lies
    /// within the farthest bounds. Evaluated with w counted inside the
    /// neighborhood, whether or not it is currently stored.
    bool check_node(const NodeRef& w) const {
        if (w.id == id_) throw Error("check_node on self");
        const Bounds b = make_bounds(&w);
        return check_with(b, w);
    }

    /// Drops every neighbor that is no longer needed and delegates its
    /// reference to the remaining neighbor with the longest common prefix.
    /// One pass per invocation; a run that removed nothing is memoized so
    /// repeated Build-triggered rechecks of an unchanged neighborhood are
    /// free.
    void check_neighborhood(Effects& fx) {
        if (checked_version_ == nh_version_) return;
        std::vector<NodeId> ids;
        ids.reserve(nh_.size());
        for (const auto& [id, w] : nh_) ids.push_back(id);

        Bounds bounds = make_bounds(nullptr);
        bool removed = false;
        for (NodeId id : ids) {
            auto it = nh_.find(id);
            if (it == nh_.end()) continue;
            if (check_with(bounds, it->second)) continue;
            NodeRef w = it->second;
            nh_.erase(it);
            ++nh_version_;
            if (nh_.empty()) {
                // No delegation target; dropping w would strand the ref and
                // break weak connectivity, so it is retained.
                nh_.emplace(w.id, std::move(w));
                ++nh_version_;
                continue;
            }
            fx.edges_removed += 1;
            fx.sends.push_back({forward_target(w), Message::build(std::move(w))});
            removed = true;
            bounds = make_bounds(nullptr);
        }
        if (!removed) checked_version_ = nh_version_;
    }

    /// Sends this node's reference (current bandwidth) to every neighbor.
    void introduce_node(Effects& fx) const {
        for (const auto& [id, w] : nh_) fx.sends.push_back({id, Message::build(ref())});
    }

    /// Per level, announces the closest predecessor and successor to every
    /// neighbor of that level.
    void introduce_closest_neighbors(Effects& fx) const {
        const int top = local_level();
        for (int i = 0; i <= top; ++i) {
            const auto nbrs = local_neighbors(i);
            if (nbrs.empty()) continue;
            if (auto p = local_closest_pred(i))
                for (const NodeRef& w : nbrs) fx.sends.push_back({w.id, Message::build(*p)});
            if (auto s = local_closest_succ(i))
                for (const NodeRef& w : nbrs) fx.sends.push_back({w.id, Message::build(*s)});
        }
    }

    /// Per level, introduces each predecessor to the next-nearest one, and
    /// likewise for successors.
    void linearize_neighbors(Effects& fx) const {
        const int top = local_level();
        for (int i = 0; i <= top; ++i) {
            const auto preds = local_predecessors(i);
            for (std::size_t j = 0; j + 1 < preds.size(); ++j)
                fx.sends.push_back({preds[j].id, Message::build(preds[j + 1])});
            const auto succs = local_successors(i);
            for (std::size_t j = 0; j + 1 < succs.size(); ++j)
                fx.sends.push_back({succs[j].id, Message::build(succs[j + 1])});
        }
    }

    void periodic_action(Effects& fx) {
        check_neighborhood(fx);
        introduce_node(fx);
        introduce_closest_neighbors(fx);
        linearize_neighbors(fx);
    }

    /// Build handler. Known refs get their cache refreshed; unknown ones are
    /// kept if needed, otherwise delegated toward the neighbor with the
    /// longest common prefix.
    void handle_build(const NodeRef& x, Effects& fx) {
        if (x.id == id_) return;  // self-references are discarded
        auto it = nh_.find(x.id);
        if (it != nh_.end()) {
            if (it->second.bw != x.bw) {
                it->second.bw = x.bw;
                ++nh_version_;
            }
            check_neighborhood(fx);
            return;
        }
        const Bounds b = make_bounds(&x);
        if (check_with(b, x)) {
            nh_.emplace(x.id, x);
            ++nh_version_;
            fx.edges_added += 1;
            check_neighborhood(fx);
        } else {
            // nh cannot be empty here: a sole candidate always passes.
            fx.sends.push_back({forward_target(x), Message::build(x)});
        }
    }

    void handle_remove(const NodeRef& x, Effects& fx) {
        auto it = nh_.find(x.id);
        if (it == nh_.end()) return;
        nh_.erase(it);
        ++nh_version_;
        fx.edges_removed += 1;
    }

    struct LookupDecision {
        enum class Kind { delivered, forward, no_route } kind;
        NodeId next_hop = 0;
    };

    /// Routing step: climb predecessors matching the target's next bit while
    /// possible, otherwise descend successors.
    LookupDecision handle_lookup(const NodeRef& target) const {
        if (target.id == id_) return {LookupDecision::Kind::delivered, 0};
        const int length = std::min(local_level(), common_prefix(rs_, target.rs));
        const int b = target.rs.bit(length);
        if (auto p = local_first_pred(length, b)) return {LookupDecision::Kind::forward, p->id};
        if (auto s = local_first_succ(length, b)) return {LookupDecision::Kind::forward, s->id};
        return {LookupDecision::Kind::no_route, 0};
    }

    /// Join bootstrap: one build message carrying this node's reference.
    void join(NodeId contact, Effects& fx) const {
        fx.sends.push_back({contact, Message::build(ref())});
    }

    /// Graceful departure: remove messages to every neighbor, then forget
    /// them all.
    void leave(Effects& fx) {
        for (const auto& [id, w] : nh_) fx.sends.push_back({id, Message::remove(ref())});
        fx.edges_removed += nh_.size();
        nh_.clear();
        ++nh_version_;
    }

    void change_bandwidth(double bw) {
        if (!(bw > 0.0)) throw InvalidBandwidth("bandwidth must be positive");
        bw_ = bw;
        ++nh_version_;
    }

    /// Failure-detector hook: silently drop a reference (no message, counted
    /// by the caller). Returns whether it was present.
    bool drop_ref(NodeId id) {
        if (nh_.erase(id) == 0) return false;
        ++nh_version_;
        return true;
    }

    /// Seeding hook for initial states; not part of the protocol.
    void seed_ref(NodeRef w) {
        if (w.id == id_) throw Error("seed_ref on self");
        nh_.insert_or_assign(w.id, std::move(w));
        ++nh_version_;
    }

private:
    // Per-level farthest/closest keys over the current neighborhood (plus an
    // optional extra candidate), built in one pass: for a predecessor u with
    // common prefix c, u is the same-bit candidate at levels below c and the
    // opposite-bit candidate exactly at c.
    struct Bounds {
        int level = 0;
        std::vector<std::optional<BandwidthKey>> pred_eq, succ_eq;  // nearest with cp == i
        std::vector<std::optional<BandwidthKey>> pred_ge, succ_ge;  // nearest with cp >= i

        std::optional<BandwidthKey> first_pred(int i, int b, int self_bit) const {
            if (b == self_bit) return pred_ge[static_cast<std::size_t>(i) + 1];
            return pred_eq[static_cast<std::size_t>(i)];
        }
        std::optional<BandwidthKey> first_succ(int i, int b, int self_bit) const {
            if (b == self_bit) return succ_ge[static_cast<std::size_t>(i) + 1];
            return succ_eq[static_cast<std::size_t>(i)];
        }
        std::optional<BandwidthKey> farthest_pred(int i, int self_bit) const {
            auto a = first_pred(i, 0, self_bit), b = first_pred(i, 1, self_bit);
            if (!a) return b;
            if (!b) return a;
            return *a > *b ? a : b;
        }
        std::optional<BandwidthKey> farthest_succ(int i, int self_bit) const {
            auto a = first_succ(i, 0, self_bit), b = first_succ(i, 1, self_bit);
            if (!a) return b;
            if (!b) return a;
            return *a < *b ? a : b;
        }
    };

    // Bounds over nh, with `extra` added or overriding the stored ref of the
    // same id (the Build handler checks the incoming ref as if stored).
    Bounds make_bounds(const NodeRef* extra) const {
        Bounds b;
        const BandwidthKey self = key();
        for (const auto& [id, w] : nh_) {
            if (extra && id == extra->id) continue;
            b.level = std::max(b.level, common_prefix(rs_, w.rs));
        }
        if (extra) b.level = std::max(b.level, common_prefix(rs_, extra->rs));

        const std::size_t n = static_cast<std::size_t>(b.level) + 2;
        b.pred_eq.assign(n, std::nullopt);
        b.succ_eq.assign(n, std::nullopt);
        b.pred_ge.assign(n, std::nullopt);
        b.succ_ge.assign(n, std::nullopt);

        auto consider = [&](const NodeRef& w) {
            const int c = common_prefix(rs_, w.rs);
            const BandwidthKey k = w.key();
            const std::size_t ci = static_cast<std::size_t>(c);
            if (k > self) {
                if (!b.pred_eq[ci] || k < *b.pred_eq[ci]) b.pred_eq[ci] = k;
            } else {
                if (!b.succ_eq[ci] || k > *b.succ_eq[ci]) b.succ_eq[ci] = k;
            }
        };
        for (const auto& [id, w] : nh_) {
            if (extra && id == extra->id) continue;
            consider(w);
        }
        if (extra) consider(*extra);

        for (int i = b.level; i >= 0; --i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            b.pred_ge[ii] = b.pred_eq[ii];
            if (b.pred_ge[ii + 1] && (!b.pred_ge[ii] || *b.pred_ge[ii + 1] < *b.pred_ge[ii]))
                b.pred_ge[ii] = b.pred_ge[ii + 1];
            b.succ_ge[ii] = b.succ_eq[ii];
            if (b.succ_ge[ii + 1] && (!b.succ_ge[ii] || *b.succ_ge[ii + 1] > *b.succ_ge[ii]))
                b.succ_ge[ii] = b.succ_ge[ii + 1];
        }
        return b;
    }

    bool check_with(const Bounds& b, const NodeRef& w) const {
        const int wc = common_prefix(rs_, w.rs);
        const BandwidthKey wk = w.key();
        const int top = std::min(b.level, wc);
        for (int i = 0; i <= top; ++i) {
            const int self_bit = rs_.bit(i);
            const auto fp = b.farthest_pred(i, self_bit);
            const auto fs = b.farthest_succ(i, self_bit);
            if ((!fp || wk <= *fp) && (!fs || wk >= *fs)) return true;
        }
        return false;
    }

    /// Delegation target: the neighbor with the longest common prefix with x,
    /// ties broken by smaller id.
    NodeId forward_target(const NodeRef& x) const {
        int best_cp = -1;
        NodeId best = 0;
        for (const auto& [id, w] : nh_) {
            const int c = common_prefix(x.rs, w.rs);
            if (c > best_cp) {
                best_cp = c;
                best = id;
            }
        }
        if (best_cp < 0) throw Error("forward_target on empty neighborhood");
        return best;
    }

    std::optional<NodeRef> scan_per_bit(int i, int b, bool preds) const {
        std::optional<NodeRef> best;
        const BandwidthKey self = key();
        for (const auto& [id, w] : nh_) {
            const BandwidthKey k = w.key();
            if (preds ? !(k > self) : !(k < self)) continue;
            if (!prefix_equal(rs_, w.rs, i)) continue;
            if (w.rs.bit(i) != b) continue;
            if (!best || (preds ? k < best->key() : k > best->key())) best = w;
        }
        return best;
    }

    NodeId id_;
    BitStream rs_;
    double bw_;
    std::map<NodeId, NodeRef> nh_;
    std::uint64_t nh_version_ = 1;
    std::uint64_t checked_version_ = 0;
};

}  // namespace hskip
