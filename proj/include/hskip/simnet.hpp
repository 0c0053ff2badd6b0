#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hskip/oracle.hpp"
#include "hskip/protocol.hpp"
#include "hskip/rng.hpp"

namespace hskip {

enum class MsgOrigin { periodic, reactive };

inline const char* to_string(MsgOrigin o) {
    return o == MsgOrigin::periodic ? "periodic" : "reactive";
}

inline const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::build: return "build";
        case MsgKind::remove: return "remove";
        default: return "lookup";
    }
}

struct Envelope {
    std::uint64_t seq = 0;       // global enqueue order; FIFO witness
    NodeId src = 0;
    NodeId dst = 0;
    Message msg;
    MsgOrigin origin = MsgOrigin::reactive;
    std::uint64_t sent_at = 0;   // round (sync) or step (async)
    std::uint64_t deadline = 0;  // async fairness deadline
};

struct RoundCounters {
    std::uint64_t sent_build = 0;
    std::uint64_t sent_remove = 0;
    std::uint64_t sent_lookup = 0;
    std::uint64_t sent_periodic = 0;
    std::uint64_t sent_reactive = 0;
    std::uint64_t edges_added = 0;
    std::uint64_t edges_removed = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_dead = 0;
    bool legal = false;

    std::uint64_t sent_total() const noexcept { return sent_build + sent_remove + sent_lookup; }
};

struct LookupRecord {
    std::uint64_t hops = 0;
    bool delivered = false;
};

/// Per-run accumulators. Counters only ever grow; periodic + reactive always
/// equals the total sent.
class MetricsSink {
public:
    void begin_epoch() { rounds_.emplace_back(); }
    RoundCounters& current() {
        if (rounds_.empty()) rounds_.emplace_back();  // pre-run external events
        return rounds_.back();
    }
    const std::vector<RoundCounters>& rounds() const noexcept { return rounds_; }

    void set_legal(std::size_t epoch, bool legal) {
        if (epoch < rounds_.size()) rounds_[epoch].legal = legal;
    }

    void add_traffic(NodeId id, double volume) { traffic_[id] += volume; }
    const std::map<NodeId, double>& traffic() const noexcept { return traffic_; }

    void record_lookup(LookupRecord r) { lookups_.push_back(r); }
    const std::vector<LookupRecord>& lookups() const noexcept { return lookups_; }

    void record_isolation() { ++isolation_events_; }
    std::uint64_t isolation_events() const noexcept { return isolation_events_; }

    void record_no_route() { ++no_route_events_; }
    std::uint64_t no_route_events() const noexcept { return no_route_events_; }

    RoundCounters totals() const {
        RoundCounters t;
        for (const RoundCounters& r : rounds_) {
            t.sent_build += r.sent_build;
            t.sent_remove += r.sent_remove;
            t.sent_lookup += r.sent_lookup;
            t.sent_periodic += r.sent_periodic;
            t.sent_reactive += r.sent_reactive;
            t.edges_added += r.edges_added;
            t.edges_removed += r.edges_removed;
            t.delivered += r.delivered;
            t.dropped_dead += r.dropped_dead;
        }
        return t;
    }

private:
    std::vector<RoundCounters> rounds_;
    std::map<NodeId, double> traffic_;
    std::vector<LookupRecord> lookups_;
    std::uint64_t isolation_events_ = 0;
    std::uint64_t no_route_events_ = 0;
};

/// The simulated universe: live nodes, one FIFO channel per ordered pair,
/// a synchronous round scheduler and an asynchronous fair scheduler. A World
/// is a value; copying it forks the whole simulation deterministically.
class World {
public:
    explicit World(std::uint64_t rng_seed) : rng_(rng_seed) {}

    // --- population ------------------------------------------------------

    /// Adds a node with the canonical id-derived bit stream. Initial worlds
    /// are assembled with this plus seed_edge before the clock starts.
    NodeState& add_node(NodeId id, double bw) {
        if (live_.count(id) || departed_.count(id)) throw Error("node id reused");
        auto [it, ok] = live_.emplace(id, NodeState(id, BitStream(seed_from_id(id)), bw));
        return it->second;
    }

    /// Initial explicit edge src -> dst with a fresh cache; not counted as
    /// protocol churn.
    void seed_edge(NodeId src, NodeId dst) {
        node_mut(src).seed_ref(node(dst).ref());
    }

    /// Join: spawn the node and send its reference to a live contact.
    void join(NodeId id, double bw, NodeId contact) {
        if (!live_.count(contact)) throw UnknownNode("join contact not live");
        NodeState& v = add_node(id, bw);
        Effects fx;
        v.join(contact, fx);
        dispatch(v.id(), fx, MsgOrigin::reactive);
    }

    /// Graceful leave: remove messages go out, then the node departs. Its
    /// inbound channels are dropped; already-sent messages stay in flight.
    void leave(NodeId id) {
        NodeState& v = node_mut(id);
        Effects fx;
        v.leave(fx);
        dispatch(id, fx, MsgOrigin::reactive);
        live_.erase(id);
        departed_.insert(id);
        drop_channels(id, /*inbound=*/true, /*outbound=*/false);
        periodic_deadline_.erase(id);
    }

    /// Crash: victims vanish with no farewell; all their channels drop.
    void crash(const std::vector<NodeId>& victims) {
        for (NodeId id : victims)
            if (!live_.count(id)) throw UnknownNode("crash victim not live");
        for (NodeId id : victims) {
            live_.erase(id);
            departed_.insert(id);
            drop_channels(id, true, true);
            periodic_deadline_.erase(id);
        }
    }

    void change_bandwidth(NodeId id, double bw) { node_mut(id).change_bandwidth(bw); }

    // --- stepping ----------------------------------------------------------

    /// One synchronous round: every live node (ascending id) first has dead
    /// references purged, then processes every message that was queued for it
    /// at round start, then runs its periodic action. Everything emitted
    /// becomes visible next round.
    void step_round() {
        metrics_.begin_epoch();
        // Snapshot what is deliverable this round; anything enqueued during
        // the round stays for the next one. Channel iteration is (src, dst)
        // ascending, so each inbox lists sources in ascending id.
        std::map<NodeId, std::vector<std::pair<NodeId, std::size_t>>> inbox;
        for (const auto& [key, q] : channels_)
            if (!q.empty()) inbox[key.second].emplace_back(key.first, q.size());

        std::vector<NodeId> order;
        order.reserve(live_.size());
        for (const auto& [id, v] : live_) order.push_back(id);

        for (NodeId id : order) {
            detect_and_purge(id);
            if (auto in = inbox.find(id); in != inbox.end()) {
                for (const auto& [src, count] : in->second) {
                    auto ch = channels_.find({src, id});
                    if (ch == channels_.end()) continue;
                    for (std::size_t k = 0; k < count && !ch->second.empty(); ++k)
                        deliver(pop_front(ch));
                }
            }
            auto it = live_.find(id);
            if (it == live_.end()) continue;
            Effects fx;
            it->second.periodic_action(fx);
            dispatch(id, fx, MsgOrigin::periodic);
            if (turn_hook_) turn_hook_(*this);
        }
        ++clock_;
    }

    /// One asynchronous step: either deliver the head of one channel or run
    /// one node's periodic action. Obligations carry deadlines (creation step
    /// plus the fairness window); anything overdue runs first, otherwise the
    /// choice is uniform.
    void step_async() {
        async_mode_ = true;
        metrics_.begin_epoch();
        struct Action {
            bool periodic;
            NodeId node;
            std::pair<NodeId, NodeId> channel;
            std::uint64_t deadline;
        };
        std::vector<Action> enabled;
        for (const auto& [key, q] : channels_)
            if (!q.empty()) enabled.push_back({false, 0, key, q.front().deadline});
        for (const auto& [id, v] : live_) {
            auto it = periodic_deadline_.find(id);
            if (it == periodic_deadline_.end())
                it = periodic_deadline_.emplace(id, step_ + fairness_window()).first;
            enabled.push_back({true, id, {}, it->second});
        }
        if (enabled.empty()) {
            ++step_;
            return;
        }
        const Action* chosen = nullptr;
        for (const Action& a : enabled)
            if (a.deadline <= step_ && (!chosen || a.deadline < chosen->deadline))
                chosen = &a;
        if (!chosen) chosen = &enabled[rng_.index(enabled.size())];

        if (chosen->periodic) {
            const NodeId id = chosen->node;
            detect_and_purge(id);
            auto it = live_.find(id);
            if (it != live_.end()) {
                Effects fx;
                it->second.periodic_action(fx);
                dispatch(id, fx, MsgOrigin::periodic);
            }
            periodic_deadline_[id] = step_ + fairness_window();
        } else {
            auto ch = channels_.find(chosen->channel);
            deliver(pop_front(ch));
        }
        ++step_;
        if (turn_hook_) turn_hook_(*this);
    }

    /// Failure detector for one node: cached references to departed nodes are
    /// silently dropped before the node acts.
    void detect_and_purge(NodeId id) {
        auto it = live_.find(id);
        if (it == live_.end()) return;
        NodeState& v = it->second;
        std::vector<NodeId> dead;
        for (const auto& [nid, ref] : v.nh())
            if (departed_.count(nid)) dead.push_back(nid);
        if (dead.empty()) return;
        const bool had = v.degree() > 0;
        for (NodeId d : dead) {
            v.drop_ref(d);
            metrics_.current().edges_removed += 1;
        }
        if (had && v.degree() == 0) metrics_.record_isolation();
    }

    // --- lookups -----------------------------------------------------------

    /// Starts a lookup at src through the channels. Volume is accounted on
    /// every receiving node.
    void issue_lookup(NodeId src, const NodeRef& target, double volume) {
        const NodeState& v = node(src);
        auto decision = v.handle_lookup(target);
        using K = NodeState::LookupDecision::Kind;
        if (decision.kind == K::delivered) {
            metrics_.record_lookup({0, true});
            return;
        }
        if (decision.kind == K::no_route) {
            metrics_.record_no_route();
            metrics_.record_lookup({0, false});
            return;
        }
        Message m = Message::lookup(target, volume);
        m.trace.push_back(src);
        enqueue(src, decision.next_hop, std::move(m), MsgOrigin::reactive);
    }

    // --- inspection ----------------------------------------------------------

    std::uint64_t clock() const noexcept { return clock_; }
    std::uint64_t steps() const noexcept { return step_; }
    std::size_t live_count() const noexcept { return live_.size(); }
    const std::map<NodeId, NodeState>& live() const noexcept { return live_; }
    bool is_departed(NodeId id) const noexcept { return departed_.count(id) > 0; }

    const NodeState& node(NodeId id) const {
        auto it = live_.find(id);
        if (it == live_.end()) throw UnknownNode("node " + std::to_string(id) + " not live");
        return it->second;
    }

    MetricsSink& metrics() noexcept { return metrics_; }
    const MetricsSink& metrics() const noexcept { return metrics_; }

    SplitMix64& rng() noexcept { return rng_; }

    oracle::GlobalView global_view() const {
        std::vector<oracle::NodeInfo> infos;
        infos.reserve(live_.size());
        for (const auto& [id, v] : live_) infos.push_back({id, v.rs(), v.bw()});
        return oracle::GlobalView(std::move(infos));
    }

    std::vector<oracle::StoredRef> stored_refs() const {
        std::vector<oracle::StoredRef> out;
        for (const auto& [id, v] : live_)
            for (const auto& [nid, ref] : v.nh()) out.push_back({id, nid, ref.bw});
        return out;
    }

    oracle::LegalityReport legality() const {
        return oracle::check_legality(global_view(), stored_refs());
    }

    std::vector<std::pair<NodeId, NodeId>> explicit_edges() const {
        std::vector<std::pair<NodeId, NodeId>> out;
        for (const auto& [id, v] : live_)
            for (const auto& [nid, ref] : v.nh()) out.emplace_back(id, nid);
        return out;
    }

    /// Weak connectivity over explicit edges plus references riding in
    /// queued messages (implicit edges channel-destination -> payload).
    bool connectivity_check() const {
        if (live_.size() <= 1) return true;
        std::map<NodeId, NodeId> parent;
        for (const auto& [id, v] : live_) parent[id] = id;
        std::function<NodeId(NodeId)> find = [&](NodeId x) {
            while (parent[x] != x) {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            return x;
        };
        auto unite = [&](NodeId a, NodeId b) { parent[find(a)] = find(b); };

        for (const auto& [id, v] : live_)
            for (const auto& [nid, ref] : v.nh())
                if (live_.count(nid)) unite(id, nid);
        for (const auto& [key, q] : channels_) {
            if (!live_.count(key.second)) continue;
            for (const Envelope& env : q)
                if (live_.count(env.msg.node.id)) unite(key.second, env.msg.node.id);
        }
        NodeId root = find(live_.begin()->first);
        for (const auto& [id, v] : live_)
            if (find(id) != root) return false;
        return true;
    }

    std::size_t queued_messages() const noexcept { return queued_total_; }

    const std::map<std::pair<NodeId, NodeId>, std::deque<Envelope>>& channels() const noexcept {
        return channels_;
    }

    // --- configuration -------------------------------------------------------

    void set_queue_ceiling(std::size_t n) noexcept { queue_ceiling_ = n; }

    /// Called after every node turn (sync) or step (async); used by the
    /// invariant sweeps.
    void set_turn_hook(std::function<void(const World&)> fn) { turn_hook_ = std::move(fn); }

    /// Called on every delivery, before the handler runs.
    void set_delivery_hook(std::function<void(const Envelope&)> fn) {
        delivery_hook_ = std::move(fn);
    }

    void set_trace(std::ostream* os) noexcept { trace_ = os; }

    /// Value copy with observers detached; scenario baselines fork worlds
    /// without inheriting the original's sinks.
    World fork() const {
        World w = *this;
        w.turn_hook_ = nullptr;
        w.delivery_hook_ = nullptr;
        w.trace_ = nullptr;
        return w;
    }

private:
    NodeState& node_mut(NodeId id) {
        auto it = live_.find(id);
        if (it == live_.end()) throw UnknownNode("node " + std::to_string(id) + " not live");
        return it->second;
    }

    std::uint64_t fairness_window() const noexcept {
        return 4 * (live_.size() + nonempty_channels_);
    }

    using ChannelMap = std::map<std::pair<NodeId, NodeId>, std::deque<Envelope>>;

    Envelope pop_front(ChannelMap::iterator ch) {
        Envelope env = std::move(ch->second.front());
        ch->second.pop_front();
        --queued_total_;
        if (ch->second.empty()) --nonempty_channels_;
        return env;
    }

    void drop_channels(NodeId id, bool inbound, bool outbound) {
        for (auto it = channels_.begin(); it != channels_.end();) {
            const bool in = it->first.second == id;
            const bool out = it->first.first == id;
            if ((inbound && in) || (outbound && out)) {
                queued_total_ -= it->second.size();
                if (!it->second.empty()) --nonempty_channels_;
                it = channels_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void enqueue(NodeId src, NodeId dst, Message msg, MsgOrigin origin) {
        RoundCounters& c = metrics_.current();
        if (departed_.count(dst)) {
            // Detectably dead endpoint; the message is never materialized.
            c.dropped_dead += 1;
            return;
        }
        switch (msg.kind) {
            case MsgKind::build: c.sent_build += 1; break;
            case MsgKind::remove: c.sent_remove += 1; break;
            case MsgKind::lookup: c.sent_lookup += 1; break;
        }
        (origin == MsgOrigin::periodic ? c.sent_periodic : c.sent_reactive) += 1;
        if (trace_) {
            const std::uint64_t now = async_mode_ ? step_ : clock_;
            (*trace_) << now << ',' << src << ',' << dst << ',' << to_string(msg.kind) << ','
                      << msg.node.id << ',' << to_string(origin) << '\n';
        }
        Envelope env;
        env.seq = ++seq_;
        env.src = src;
        env.dst = dst;
        env.origin = origin;
        env.sent_at = async_mode_ ? step_ : clock_;
        env.deadline = async_mode_ ? step_ + fairness_window() : 0;
        env.msg = std::move(msg);
        auto& q = channels_[{src, dst}];
        if (q.empty()) ++nonempty_channels_;
        q.push_back(std::move(env));
        if (++queued_total_ > queue_ceiling_)
            throw Error("queued messages exceed ceiling; run diverged");
    }

    void dispatch(NodeId src, Effects& fx, MsgOrigin origin) {
        RoundCounters& c = metrics_.current();
        c.edges_added += fx.edges_added;
        c.edges_removed += fx.edges_removed;
        for (Send& s : fx.sends) enqueue(src, s.to, std::move(s.msg), origin);
        fx.sends.clear();
    }

    void deliver(Envelope env) {
        RoundCounters& c = metrics_.current();
        // FIFO witness: per ordered pair, global sequence numbers must rise.
        auto& last = last_delivered_seq_[{env.src, env.dst}];
        if (env.seq <= last) throw Error("FIFO violation detected");
        last = env.seq;

        if (delivery_hook_) delivery_hook_(env);

        auto it = live_.find(env.dst);
        if (it == live_.end()) {
            c.dropped_dead += 1;
            return;
        }
        NodeState& v = it->second;
        c.delivered += 1;

        switch (env.msg.kind) {
            case MsgKind::build: {
                if (departed_.count(env.msg.node.id)) {
                    c.dropped_dead += 1;
                    return;
                }
                Effects fx;
                v.handle_build(env.msg.node, fx);
                dispatch(env.dst, fx, MsgOrigin::reactive);
                break;
            }
            case MsgKind::remove: {
                Effects fx;
                v.handle_remove(env.msg.node, fx);
                dispatch(env.dst, fx, MsgOrigin::reactive);
                break;
            }
            case MsgKind::lookup: {
                if (departed_.count(env.msg.node.id)) {
                    c.dropped_dead += 1;
                    return;
                }
                metrics_.add_traffic(env.dst, env.msg.volume);
                auto decision = v.handle_lookup(env.msg.node);
                using K = NodeState::LookupDecision::Kind;
                if (decision.kind == K::delivered) {
                    metrics_.record_lookup({env.msg.trace.size(), true});
                } else if (decision.kind == K::no_route) {
                    metrics_.record_no_route();
                    metrics_.record_lookup({env.msg.trace.size(), false});
                } else {
                    Message m = std::move(env.msg);
                    m.trace.push_back(env.dst);
                    enqueue(env.dst, decision.next_hop, std::move(m), MsgOrigin::reactive);
                }
                break;
            }
        }
    }

    std::map<NodeId, NodeState> live_;
    std::set<NodeId> departed_;
    ChannelMap channels_;
    std::size_t nonempty_channels_ = 0;
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> last_delivered_seq_;
    std::map<NodeId, std::uint64_t> periodic_deadline_;
    std::uint64_t clock_ = 0;
    std::uint64_t step_ = 0;
    bool async_mode_ = false;
    std::uint64_t seq_ = 0;
    std::size_t queued_total_ = 0;
    std::size_t queue_ceiling_ = 10'000'000;
    SplitMix64 rng_;
    MetricsSink metrics_;
    std::function<void(const World&)> turn_hook_;
    std::function<void(const Envelope&)> delivery_hook_;
    std::ostream* trace_ = nullptr;
};

}  // namespace hskip
