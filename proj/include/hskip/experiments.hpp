#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hskip/simnet.hpp"

namespace hskip {

// --- bandwidth distributions -------------------------------------------------

/// Pluggable bandwidth source: uniform(lo,hi), pareto(alpha,scale), or an
/// empirical file with one positive value per line.
class BandwidthDist {
public:
    enum class Kind { uniform, pareto, empirical };

    static BandwidthDist uniform(double lo, double hi) {
        if (!(0.0 < lo && lo < hi)) throw BadDistribution("uniform needs 0 < lo < hi");
        BandwidthDist d;
        d.kind_ = Kind::uniform;
        d.a_ = lo;
        d.b_ = hi;
        return d;
    }

    static BandwidthDist pareto(double alpha, double scale) {
        if (!(alpha > 0.0) || !(scale > 0.0)) throw BadDistribution("pareto needs alpha, scale > 0");
        BandwidthDist d;
        d.kind_ = Kind::pareto;
        d.a_ = alpha;
        d.b_ = scale;
        return d;
    }

    static BandwidthDist empirical_values(std::vector<double> values) {
        if (values.empty()) throw BadDistribution("empirical set is empty");
        for (double v : values)
            if (!(v > 0.0) || !std::isfinite(v)) throw BadDistribution("empirical values must be positive");
        BandwidthDist d;
        d.kind_ = Kind::empirical;
        d.values_ = std::move(values);
        return d;
    }

    static BandwidthDist empirical_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw BadDistribution("cannot open bandwidth file: " + path);
        std::vector<double> values;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(line, &used);
            } catch (const std::exception&) {
                throw BadDistribution("bad line in bandwidth file: " + line);
            }
            if (line.find_first_not_of(" \t\r", used) != std::string::npos)
                throw BadDistribution("bad line in bandwidth file: " + line);
            values.push_back(v);
        }
        return empirical_values(std::move(values));
    }

    /// Accepts "uniform(lo,hi)", "pareto(alpha,scale)", "empirical(path)".
    static BandwidthDist parse(const std::string& spec) {
        const auto open = spec.find('(');
        const auto close = spec.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw BadDistribution("bad distribution spec: " + spec);
        const std::string name = spec.substr(0, open);
        const std::string args = spec.substr(open + 1, close - open - 1);
        if (name == "empirical") return empirical_file(args);
        const auto comma = args.find(',');
        if (comma == std::string::npos) throw BadDistribution("bad distribution spec: " + spec);
        double x = 0, y = 0;
        try {
            x = std::stod(args.substr(0, comma));
            y = std::stod(args.substr(comma + 1));
        } catch (const std::exception&) {
            throw BadDistribution("bad distribution spec: " + spec);
        }
        if (name == "uniform") return uniform(x, y);
        if (name == "pareto") return pareto(x, y);
        throw BadDistribution("unknown distribution: " + name);
    }

    double draw(SplitMix64& rng) const {
        switch (kind_) {
            case Kind::uniform: return rng.uniform(a_, b_);
            case Kind::pareto: return rng.pareto(a_, b_);
            default: return values_[rng.index(values_.size())];
        }
    }

    std::string to_string() const {
        std::ostringstream os;
        switch (kind_) {
            case Kind::uniform: os << "uniform(" << a_ << ',' << b_ << ')'; break;
            case Kind::pareto: os << "pareto(" << a_ << ',' << b_ << ')'; break;
            default: os << "empirical(" << values_.size() << " values)"; break;
        }
        return os.str();
    }

private:
    BandwidthDist() = default;
    Kind kind_ = Kind::pareto;
    double a_ = 1.5, b_ = 1.0;
    std::vector<double> values_;
};

inline BandwidthDist default_dist() { return BandwidthDist::pareto(1.5, 1.0); }

// --- scenario configuration ----------------------------------------------------

enum class CrashMode { random, contiguous };

struct ScenarioConfig {
    enum class Kind { converge, join, leave, change, crash, flow, random_target_flow };

    Kind kind = Kind::converge;
    int n = 16;
    std::uint64_t seed = 1;
    BandwidthDist dist = default_dist();
    int max_rounds = 0;  // 0: use 50 * ceil(log2 n)
    int repeats = 1;
    double fraction = 0.0;               // crash only
    CrashMode mode = CrashMode::random;  // crash only

    void validate() const {
        if (n < 2) throw Error("scenario needs n >= 2");
        if (repeats < 1) throw Error("repeats must be >= 1");
        if (effective_max_rounds() < 1) throw Error("max_rounds must be >= 1");
        if (kind == Kind::crash && !(fraction >= 0.0 && fraction < 1.0))
            throw BadFraction("fraction must be in [0,1)");
    }

    int effective_max_rounds() const {
        if (max_rounds > 0) return max_rounds;
        int bits = 1;
        while ((1 << bits) < n) ++bits;
        return 50 * bits;
    }

    std::string scenario_name() const {
        switch (kind) {
            case Kind::converge: return "converge";
            case Kind::join: return "join";
            case Kind::leave: return "leave";
            case Kind::change: return "change";
            case Kind::crash: return mode == CrashMode::contiguous ? "attack" : "crash";
            case Kind::flow: return "flow";
            default: return "random_target_flow";
        }
    }

    static Kind parse_kind(const std::string& name, CrashMode* mode_out) {
        if (name == "converge") return Kind::converge;
        if (name == "join") return Kind::join;
        if (name == "leave") return Kind::leave;
        if (name == "change") return Kind::change;
        if (name == "flow") return Kind::flow;
        if (name == "random_target_flow") return Kind::random_target_flow;
        if (name == "crash") return Kind::crash;
        if (name == "attack") {
            if (mode_out) *mode_out = CrashMode::contiguous;
            return Kind::crash;
        }
        throw Error("unknown scenario: " + name);
    }
};

/// One CSV-emittable measurement row.
struct RunRecord {
    std::uint64_t run_id = 0;
    std::uint64_t seed = 0;
    int n = 0;
    std::string scenario;
    int rounds_to_legal = 0;
    std::uint64_t total_messages = 0;
    std::optional<long long> additional_messages;
    int max_degree = 0;
    std::optional<std::uint64_t> dilation;
    std::optional<double> avg_normalized_congestion;
    std::optional<double> surviving_fraction;
    bool legal = false;
};

// --- world generation -----------------------------------------------------------

/// n nodes (ids 1..n) with id-derived bit streams and bandwidths from dist;
/// the explicit edges form a uniformly random recursive tree (node i attaches
/// to a uniform earlier node). Channels start empty.
inline World gen_initial_world(int n, std::uint64_t seed, const BandwidthDist& dist) {
    if (n < 2) throw Error("gen_initial_world needs n >= 2");
    World w(mix64(seed ^ 0x77c5bfb5ae2d2c4bULL));
    SplitMix64 rng(mix64(seed ^ 0x452821e638d01377ULL));
    for (int i = 1; i <= n; ++i) w.add_node(static_cast<NodeId>(i), dist.draw(rng));
    for (int i = 2; i <= n; ++i) {
        const NodeId parent = 1 + rng.below(static_cast<std::uint64_t>(i - 1));
        w.seed_edge(static_cast<NodeId>(i), parent);
    }
    return w;
}

// --- stabilization ---------------------------------------------------------------

struct StabilizationResult {
    int rounds = 0;
    bool legal = false;
    RoundCounters totals;  // messages and churn during the counted rounds
};

namespace detail {
inline RoundCounters diff_totals(const RoundCounters& after, const RoundCounters& before) {
    RoundCounters d;
    d.sent_build = after.sent_build - before.sent_build;
    d.sent_remove = after.sent_remove - before.sent_remove;
    d.sent_lookup = after.sent_lookup - before.sent_lookup;
    d.sent_periodic = after.sent_periodic - before.sent_periodic;
    d.sent_reactive = after.sent_reactive - before.sent_reactive;
    d.edges_added = after.edges_added - before.edges_added;
    d.edges_removed = after.edges_removed - before.edges_removed;
    d.delivered = after.delivered - before.delivered;
    d.dropped_dead = after.dropped_dead - before.dropped_dead;
    return d;
}
}  // namespace detail

/// Steps rounds until the oracle accepts the state or the budget runs out.
/// Legality is evaluated before the first step, so an already-legal world
/// reports zero rounds.
inline StabilizationResult run_until_legal(World& w, int max_rounds) {
    const RoundCounters before = w.metrics().totals();
    int r = 0;
    bool legal = w.legality().legal();
    w.metrics().set_legal(w.metrics().rounds().empty() ? 0 : w.metrics().rounds().size() - 1,
                          legal);
    while (!legal && r < max_rounds) {
        w.step_round();
        ++r;
        legal = w.legality().legal();
        w.metrics().set_legal(w.metrics().rounds().size() - 1, legal);
    }
    return {r, legal, detail::diff_totals(w.metrics().totals(), before)};
}

/// Runs exactly `rounds` rounds and reports the message counters; the
/// undisturbed-baseline side of the additional-messages measurement.
inline RoundCounters run_rounds(World& w, int rounds) {
    const RoundCounters before = w.metrics().totals();
    for (int i = 0; i < rounds; ++i) w.step_round();
    return detail::diff_totals(w.metrics().totals(), before);
}

// --- component-wise stability (for churn runs) ------------------------------------

namespace detail {

inline std::map<NodeId, NodeId> component_roots(const World& w) {
    std::map<NodeId, NodeId> parent;
    for (const auto& [id, v] : w.live()) parent[id] = id;
    std::function<NodeId(NodeId)> find = [&](NodeId x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& [id, v] : w.live())
        for (const auto& [nid, ref] : v.nh())
            if (w.live().count(nid)) parent[find(id)] = find(nid);
    std::map<NodeId, NodeId> root;
    for (const auto& [id, v] : w.live()) root[id] = find(id);
    return root;
}

}  // namespace detail

struct ComponentStability {
    bool stable = false;           // every component legal, no cross refs in flight
    bool single_legal = false;     // the whole world is one legal component
    double largest_legal_fraction = 0.0;
};

/// Churn can split the world; a split world never satisfies global legality,
/// so stability means every weak component is internally legal and no queued
/// reference could still merge two components.
inline ComponentStability component_stability(const World& w) {
    ComponentStability out;
    if (w.live_count() == 0) {
        out.stable = true;
        return out;
    }
    const auto root = detail::component_roots(w);
    std::map<NodeId, std::vector<NodeId>> comps;
    for (const auto& [id, r] : root) comps[r].push_back(id);

    for (const auto& [key, q] : w.channels()) {
        if (!w.live().count(key.second)) continue;
        for (const Envelope& env : q) {
            const NodeId payload = env.msg.node.id;
            if (w.live().count(payload) && root.at(payload) != root.at(key.second))
                return out;  // a merge is still possible; not stable
        }
    }

    std::size_t largest_legal = 0;
    bool all_legal = true;
    for (const auto& [r, members] : comps) {
        std::vector<oracle::NodeInfo> infos;
        std::vector<oracle::StoredRef> stored;
        for (NodeId id : members) {
            const NodeState& v = w.node(id);
            infos.push_back({id, v.rs(), v.bw()});
            for (const auto& [nid, ref] : v.nh()) stored.push_back({id, nid, ref.bw});
        }
        const bool legal =
            oracle::check_legality(oracle::GlobalView(std::move(infos)), std::move(stored)).legal();
        if (legal)
            largest_legal = std::max(largest_legal, members.size());
        else
            all_legal = false;
    }
    out.stable = all_legal;
    out.largest_legal_fraction =
        static_cast<double>(largest_legal) / static_cast<double>(w.live_count());
    out.single_legal = all_legal && comps.size() == 1;
    return out;
}

struct ChurnResult {
    int rounds = 0;
    bool stable = false;
    double surviving_fraction = 0.0;
    bool single_legal = false;
};

inline ChurnResult run_until_stable(World& w, int max_rounds) {
    ChurnResult res;
    ComponentStability st = component_stability(w);
    while (!st.stable && res.rounds < max_rounds) {
        w.step_round();
        ++res.rounds;
        st = component_stability(w);
    }
    res.stable = st.stable;
    res.surviving_fraction = st.largest_legal_fraction;
    res.single_legal = st.single_legal;
    return res;
}

// --- routing harnesses --------------------------------------------------------------

/// Drives one lookup hop by hop through the node states without touching the
/// schedulers (routing in a legal world has no side effects). Returns the
/// full visited path, source and target included.
inline std::vector<NodeId> route_lookup(const World& w, NodeId src, NodeId dst) {
    std::vector<NodeId> path{src};
    const NodeRef target = w.node(dst).ref();
    NodeId cur = src;
    const std::size_t guard = w.live_count() + 2;
    while (cur != dst) {
        const auto d = w.node(cur).handle_lookup(target);
        using K = NodeState::LookupDecision::Kind;
        if (d.kind == K::no_route)
            throw NoRouteError("no route from " + std::to_string(src) + " to " +
                               std::to_string(dst) + " at " + std::to_string(cur));
        cur = d.next_hop;
        path.push_back(cur);
        if (path.size() > guard) throw NoRouteError("routing made no progress");
    }
    return path;
}

/// Strictly rising bandwidth, then strictly falling (either leg may be empty).
inline bool bandwidth_unimodal(const std::vector<double>& bws) {
    std::size_t k = 0;
    while (k + 1 < bws.size() && bws[k + 1] > bws[k]) ++k;
    while (k + 1 < bws.size() && bws[k + 1] < bws[k]) ++k;
    return k + 1 >= bws.size();
}

struct RouteAudit {
    bool min_bandwidth_ok = true;  // every node >= min(src, dst) bandwidth
    bool unimodal_ok = true;       // ascending then descending
};

inline RouteAudit audit_path(const World& w, const std::vector<NodeId>& path) {
    RouteAudit a;
    std::vector<double> bws;
    bws.reserve(path.size());
    for (NodeId id : path) bws.push_back(w.node(id).bw());
    const double floor = std::min(bws.front(), bws.back());
    for (double b : bws)
        if (b < floor) a.min_bandwidth_ok = false;
    a.unimodal_ok = bandwidth_unimodal(bws);
    return a;
}

struct FlowResult {
    double avg_normalized_congestion = 0.0;
    double max_normalized_congestion = 0.0;
    std::uint64_t dilation = 0;
    double total_volume_hops = 0.0;  // sum over messages of volume * hops
    double total_traffic = 0.0;      // sum over nodes of accumulated volume
    bool min_bandwidth_ok = true;
    bool unimodal_ok = true;
};

/// The paper's flow problem: every ordered pair (u,v) routes volume
/// u.bw * v.bw / sum(bw); each hop charges the receiving node. Legal worlds
/// must route every pair.
inline FlowResult flow_problem(const World& w) {
    FlowResult res;
    double total_bw = 0.0;
    std::vector<NodeId> ids;
    ids.reserve(w.live_count());
    for (const auto& [id, v] : w.live()) {
        ids.push_back(id);
        total_bw += v.bw();
    }
    std::map<NodeId, double> traffic;
    for (NodeId u : ids) {
        const double ubw = w.node(u).bw();
        for (NodeId v : ids) {
            if (u == v) continue;
            const double vol = ubw * w.node(v).bw() / total_bw;
            const auto path = route_lookup(w, u, v);
            const auto hops = static_cast<std::uint64_t>(path.size() - 1);
            res.dilation = std::max(res.dilation, hops);
            res.total_volume_hops += vol * static_cast<double>(hops);
            for (std::size_t i = 1; i < path.size(); ++i) traffic[path[i]] += vol;
            const RouteAudit a = audit_path(w, path);
            res.min_bandwidth_ok = res.min_bandwidth_ok && a.min_bandwidth_ok;
            res.unimodal_ok = res.unimodal_ok && a.unimodal_ok;
        }
    }
    double sum_norm = 0.0;
    for (NodeId id : ids) {
        const double t = traffic.count(id) ? traffic[id] : 0.0;
        res.total_traffic += t;
        const double norm = t / w.node(id).bw();
        sum_norm += norm;
        res.max_normalized_congestion = std::max(res.max_normalized_congestion, norm);
    }
    res.avg_normalized_congestion = sum_norm / static_cast<double>(ids.size());
    // Volume conservation: traffic is charged once per hop, so the two sums
    // must agree up to rounding.
    const double scale = std::max(1.0, std::abs(res.total_volume_hops));
    if (std::abs(res.total_traffic - res.total_volume_hops) > 1e-6 * scale)
        throw Error("flow accounting identity violated");
    return res;
}

/// Randomized congestion problem: each node draws a uniform target bitstring,
/// routes to the longest-prefix-match node (ties to the higher key) with
/// volume min(u.bw, w.bw).
inline FlowResult random_target_flow(const World& w, std::uint64_t seed) {
    FlowResult res;
    SplitMix64 rng(mix64(seed ^ 0x243f6a8885a308d3ULL));
    std::vector<NodeId> ids;
    for (const auto& [id, v] : w.live()) ids.push_back(id);
    std::map<NodeId, double> traffic;
    for (NodeId u : ids) {
        const BitStream x(rng.next());
        NodeId best = 0;
        int best_cp = -1;
        for (NodeId c : ids) {
            const NodeState& cand = w.node(c);
            const int cp = common_prefix(cand.rs(), x);
            if (cp > best_cp || (cp == best_cp && cand.key() > w.node(best).key())) {
                best_cp = cp;
                best = c;
            }
        }
        if (best == u) continue;  // own stream wins: zero hops, no traffic
        const double vol = std::min(w.node(u).bw(), w.node(best).bw());
        const auto path = route_lookup(w, u, best);
        const auto hops = static_cast<std::uint64_t>(path.size() - 1);
        res.dilation = std::max(res.dilation, hops);
        res.total_volume_hops += vol * static_cast<double>(hops);
        for (std::size_t i = 1; i < path.size(); ++i) traffic[path[i]] += vol;
        const RouteAudit a = audit_path(w, path);
        res.min_bandwidth_ok = res.min_bandwidth_ok && a.min_bandwidth_ok;
        res.unimodal_ok = res.unimodal_ok && a.unimodal_ok;
    }
    double sum_norm = 0.0;
    for (NodeId id : ids) {
        const double t = traffic.count(id) ? traffic[id] : 0.0;
        res.total_traffic += t;
        const double norm = t / w.node(id).bw();
        sum_norm += norm;
        res.max_normalized_congestion = std::max(res.max_normalized_congestion, norm);
    }
    res.avg_normalized_congestion = sum_norm / static_cast<double>(ids.size());
    const double scale = std::max(1.0, std::abs(res.total_volume_hops));
    if (std::abs(res.total_traffic - res.total_volume_hops) > 1e-6 * scale)
        throw Error("flow accounting identity violated");
    return res;
}

// --- scenarios ---------------------------------------------------------------------

namespace detail {

inline int world_max_degree(const World& w) {
    std::size_t deg = 0;
    for (const auto& [id, v] : w.live()) deg = std::max(deg, v.degree());
    return static_cast<int>(deg);
}

inline NodeId pick_live(const World& w, SplitMix64& rng) {
    std::vector<NodeId> ids;
    ids.reserve(w.live_count());
    for (const auto& [id, v] : w.live()) ids.push_back(id);
    return ids[rng.index(ids.size())];
}

inline NodeId max_id(const World& w) {
    NodeId m = 0;
    for (const auto& [id, v] : w.live()) m = std::max(m, id);
    return m;
}

}  // namespace detail

/// Runs one scenario to a RunRecord. Everything is a pure function of
/// (config, seed): same inputs, identical record. An optional stream receives
/// the message trace of the disturbed world (baseline clones stay silent).
inline RunRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                              std::ostream* trace = nullptr) {
    cfg.validate();
    const int max_rounds = cfg.effective_max_rounds();
    SplitMix64 event_rng(mix64(seed ^ 0x13198a2e03707344ULL));

    RunRecord rec;
    rec.seed = seed;
    rec.n = cfg.n;
    rec.scenario = cfg.scenario_name();

    World w = gen_initial_world(cfg.n, seed, cfg.dist);
    w.set_trace(trace);
    const StabilizationResult base = run_until_legal(w, max_rounds);

    if (cfg.kind == ScenarioConfig::Kind::converge) {
        rec.rounds_to_legal = base.rounds;
        rec.total_messages = base.totals.sent_total();
        rec.legal = base.legal;
        rec.max_degree = detail::world_max_degree(w);
        return rec;
    }

    if (!base.legal) {  // scenario events need a legal starting point
        rec.rounds_to_legal = base.rounds;
        rec.total_messages = base.totals.sent_total();
        rec.legal = false;
        rec.max_degree = detail::world_max_degree(w);
        return rec;
    }

    switch (cfg.kind) {
        case ScenarioConfig::Kind::join:
        case ScenarioConfig::Kind::leave:
        case ScenarioConfig::Kind::change: {
            World baseline = w.fork();
            if (cfg.kind == ScenarioConfig::Kind::join) {
                const NodeId fresh = detail::max_id(w) + 1;
                const NodeId contact = detail::pick_live(w, event_rng);
                w.join(fresh, cfg.dist.draw(event_rng), contact);
            } else if (cfg.kind == ScenarioConfig::Kind::leave) {
                w.leave(detail::pick_live(w, event_rng));
            } else {
                w.change_bandwidth(detail::pick_live(w, event_rng), cfg.dist.draw(event_rng));
            }
            const StabilizationResult after = run_until_legal(w, max_rounds);
            const RoundCounters undisturbed = run_rounds(baseline, after.rounds);
            rec.rounds_to_legal = after.rounds;
            rec.total_messages = after.totals.sent_total();
            rec.additional_messages = static_cast<long long>(after.totals.sent_total()) -
                                      static_cast<long long>(undisturbed.sent_total());
            rec.legal = after.legal;
            rec.max_degree = detail::world_max_degree(w);
            return rec;
        }
        case ScenarioConfig::Kind::crash: {
            const int k = static_cast<int>(
                std::ceil(cfg.fraction * static_cast<double>(cfg.n)));
            std::vector<NodeId> victims;
            if (k > 0) {
                if (cfg.mode == CrashMode::random) {
                    std::vector<NodeId> ids;
                    for (const auto& [id, v] : w.live()) ids.push_back(id);
                    for (int i = 0; i < k; ++i) {
                        const std::size_t j = event_rng.index(ids.size());
                        victims.push_back(ids[j]);
                        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(j));
                    }
                } else {
                    // a contiguous block in bandwidth order at a random offset
                    const auto view = w.global_view();
                    const std::size_t offset =
                        event_rng.index(view.size() - static_cast<std::size_t>(k) + 1);
                    for (int i = 0; i < k; ++i)
                        victims.push_back(view.by_rank(offset + static_cast<std::size_t>(i)).id);
                }
            }
            w.crash(victims);
            std::vector<NodeId> survivors;
            for (const auto& [id, v] : w.live()) survivors.push_back(id);
            NodeId fresh = static_cast<NodeId>(cfg.n) * 2 + 1;
            for (int i = 0; i < k; ++i) {
                const NodeId contact = survivors[event_rng.index(survivors.size())];
                w.join(fresh++, cfg.dist.draw(event_rng), contact);
            }
            const RoundCounters before = w.metrics().totals();
            const ChurnResult churn = run_until_stable(w, max_rounds);
            rec.rounds_to_legal = churn.rounds;
            rec.total_messages = detail::diff_totals(w.metrics().totals(), before).sent_total();
            rec.surviving_fraction = churn.surviving_fraction;
            rec.legal = churn.single_legal;
            rec.max_degree = detail::world_max_degree(w);
            return rec;
        }
        case ScenarioConfig::Kind::flow: {
            const FlowResult flow = flow_problem(w);
            if (!flow.min_bandwidth_ok || !flow.unimodal_ok)
                throw Error("flow problem violated routing monotonicity in a legal world");
            rec.rounds_to_legal = base.rounds;
            rec.total_messages = base.totals.sent_total();
            rec.dilation = flow.dilation;
            rec.avg_normalized_congestion = flow.avg_normalized_congestion;
            rec.legal = true;
            rec.max_degree = detail::world_max_degree(w);
            return rec;
        }
        case ScenarioConfig::Kind::random_target_flow: {
            const FlowResult flow = random_target_flow(w, seed);
            rec.rounds_to_legal = base.rounds;
            rec.total_messages = base.totals.sent_total();
            rec.dilation = flow.dilation;
            rec.avg_normalized_congestion = flow.avg_normalized_congestion;
            rec.legal = true;
            rec.max_degree = detail::world_max_degree(w);
            return rec;
        }
        default: throw Error("unreachable scenario kind");
    }
}

// --- statistics helpers ----------------------------------------------------------------

inline double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("fit_line needs >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw Error("fit_line: degenerate x values");
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = f.intercept + f.slope * x[i];
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    f.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return f;
}

// --- parallel driver ----------------------------------------------------------------------

/// Fans jobs out over worker threads. Each job owns its slot, so results are
/// independent of scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) return;
                    fn(i);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace hskip
