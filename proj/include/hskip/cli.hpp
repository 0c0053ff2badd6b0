#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hskip/experiments.hpp"

namespace hskip {

struct ConfigError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

// --- CSV -------------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "run_id,seed,n,scenario,rounds_to_legal,total_messages,additional_messages,"
    "max_degree,dilation,avg_normalized_congestion,surviving_fraction,legal";

/// RFC 4180: quote fields containing comma, quote, or newline.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string to_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.run_id << ',' << r.seed << ',' << r.n << ',' << csv_field(r.scenario) << ','
       << r.rounds_to_legal << ',' << r.total_messages << ',';
    if (r.additional_messages) os << *r.additional_messages;
    os << ',' << r.max_degree << ',';
    if (r.dilation) os << *r.dilation;
    os << ',';
    if (r.avg_normalized_congestion) os << csv_double(*r.avg_normalized_congestion);
    os << ',';
    if (r.surviving_fraction) os << csv_double(*r.surviving_fraction);
    os << ',' << (r.legal ? 1 : 0);
    return os.str();
}

// --- campaign files -----------------------------------------------------------

struct Campaign {
    std::uint64_t base_seed = 1;
    std::string out;  // empty: stdout
    std::vector<ScenarioConfig> entries;
    std::vector<bool> entry_has_seed;
};

inline ScenarioConfig parse_scenario_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario entry must be an object");
    ScenarioConfig cfg;
    if (!j.contains("scenario") || !j["scenario"].is_string())
        throw ConfigError("scenario entry needs a 'scenario' name");
    cfg.kind = ScenarioConfig::parse_kind(j["scenario"].get<std::string>(), &cfg.mode);
    if (!j.contains("n") || !j["n"].is_number_integer())
        throw ConfigError("scenario entry needs integer 'n'");
    cfg.n = j["n"].get<int>();
    if (j.contains("repeats")) cfg.repeats = j["repeats"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_rounds")) cfg.max_rounds = j["max_rounds"].get<int>();
    if (j.contains("dist")) cfg.dist = BandwidthDist::parse(j["dist"].get<std::string>());
    if (j.contains("fraction")) cfg.fraction = j["fraction"].get<double>();
    if (j.contains("mode")) {
        const std::string m = j["mode"].get<std::string>();
        if (m == "random")
            cfg.mode = CrashMode::random;
        else if (m == "contiguous")
            cfg.mode = CrashMode::contiguous;
        else
            throw ConfigError("mode must be 'random' or 'contiguous'");
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid scenario entry: ") + e.what());
    }
    return cfg;
}

inline Campaign parse_campaign_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("campaign must be a JSON object");
    Campaign c;
    if (j.contains("seed")) c.base_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (!j.contains("scenarios") || !j["scenarios"].is_array() || j["scenarios"].empty())
        throw ConfigError("campaign needs a nonempty 'scenarios' array");
    for (const auto& entry : j["scenarios"]) {
        c.entries.push_back(parse_scenario_json(entry));
        c.entry_has_seed.push_back(entry.contains("seed"));
    }
    return c;
}

inline Campaign load_campaign(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open campaign file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("campaign JSON parse error: ") + e.what());
    }
    try {
        return parse_campaign_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("campaign JSON error: ") + e.what());
    }
}

struct CampaignOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> trace;
    unsigned threads = 0;  // 0: hardware default
};

/// Runs every scenario of the campaign, writes the CSV (rows sorted by
/// scenario, n, seed) and returns 0 iff every run ended legal. Message traces,
/// when requested, are buffered per run and emitted in row order so the
/// output does not depend on scheduling.
inline int execute_campaign(const Campaign& campaign, const CampaignOverrides& overrides,
                            std::ostream& err = std::cerr) {
    struct Planned {
        ScenarioConfig cfg;
        std::uint64_t seed;
    };
    std::vector<Planned> plan;
    for (std::size_t e = 0; e < campaign.entries.size(); ++e) {
        const ScenarioConfig& cfg = campaign.entries[e];
        std::uint64_t base = campaign.base_seed;
        if (campaign.entry_has_seed.size() > e && campaign.entry_has_seed[e]) base = cfg.seed;
        if (overrides.seed) base = *overrides.seed;
        for (int r = 0; r < cfg.repeats; ++r)
            plan.push_back({cfg, base + static_cast<std::uint64_t>(r)});
    }

    struct Outcome {
        RunRecord rec;
        std::string trace;
        std::string error;
    };
    std::vector<Outcome> results(plan.size());
    const bool want_trace = overrides.trace.has_value();
    parallel_for(
        plan.size(),
        [&](std::size_t i) {
            std::ostringstream trace;
            try {
                results[i].rec =
                    run_scenario(plan[i].cfg, plan[i].seed, want_trace ? &trace : nullptr);
            } catch (const Error& ex) {
                results[i].rec.seed = plan[i].seed;
                results[i].rec.n = plan[i].cfg.n;
                results[i].rec.scenario = plan[i].cfg.scenario_name();
                results[i].rec.legal = false;
                results[i].error = ex.what();
            }
            results[i].trace = trace.str();
        },
        overrides.threads);

    std::sort(results.begin(), results.end(), [](const Outcome& a, const Outcome& b) {
        return std::tie(a.rec.scenario, a.rec.n, a.rec.seed) <
               std::tie(b.rec.scenario, b.rec.n, b.rec.seed);
    });
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rec.run_id = i;

    const std::string out_path = overrides.out ? *overrides.out : campaign.out;
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::trunc);
        if (!file) throw IoError("cannot write CSV: " + out_path);
        os = &file;
    }
    (*os) << kCsvHeader << '\n';
    for (const Outcome& o : results) (*os) << to_csv_row(o.rec) << '\n';
    os->flush();

    if (want_trace) {
        std::ofstream tf(*overrides.trace, std::ios::trunc);
        if (!tf) throw IoError("cannot write trace: " + *overrides.trace);
        for (const Outcome& o : results) tf << o.trace;
    }

    int failures = 0;
    for (const Outcome& o : results) {
        if (o.rec.legal && o.error.empty()) continue;
        ++failures;
        err << "run " << o.rec.run_id << " (" << o.rec.scenario << " n=" << o.rec.n
            << " seed=" << o.rec.seed << "): "
            << (o.error.empty() ? "did not reach a legal state" : o.error) << '\n';
    }
    if (failures) err << failures << " of " << results.size() << " runs failed\n";
    return failures == 0 ? 0 : 1;
}

inline int run_campaign(const std::string& config_path, const CampaignOverrides& overrides,
                        std::ostream& err = std::cerr) {
    Campaign campaign;
    try {
        campaign = load_campaign(config_path);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return 2;
    }
    try {
        return execute_campaign(campaign, overrides, err);
    } catch (const IoError& e) {
        err << e.what() << '\n';
        return 2;
    }
}

// --- world dumps and oracle-check ------------------------------------------------

struct WorldDump {
    std::vector<std::pair<NodeId, double>> nodes;  // id, true bandwidth
    std::vector<oracle::StoredRef> edges;          // src, dst, cached bandwidth
};

inline WorldDump dump_from_world(const World& w) {
    WorldDump d;
    for (const auto& [id, v] : w.live()) d.nodes.emplace_back(id, v.bw());
    d.edges = w.stored_refs();
    return d;
}

inline void write_world_dump(const WorldDump& d, const std::string& path) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& [id, bw] : d.nodes) j["nodes"].push_back({{"id", id}, {"bw", bw}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : d.edges)
        j["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"cached_bw", e.cached_bw}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write dump: " + path);
    out << j.dump(2) << '\n';
}

inline WorldDump load_world_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dump: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dump JSON parse error: ") + e.what());
    }
    WorldDump d;
    try {
        for (const auto& n : j.at("nodes"))
            d.nodes.emplace_back(n.at("id").get<NodeId>(), n.at("bw").get<double>());
        for (const auto& e : j.at("edges"))
            d.edges.push_back({e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(),
                               e.at("cached_bw").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dump schema error: ") + e.what());
    }
    return d;
}

/// Bit streams are reconstructed from the ids, so a dump needs no seeds.
inline oracle::LegalityReport dump_legality(const WorldDump& d) {
    std::vector<oracle::NodeInfo> infos;
    infos.reserve(d.nodes.size());
    for (const auto& [id, bw] : d.nodes) infos.push_back({id, BitStream(seed_from_id(id)), bw});
    return oracle::check_legality(oracle::GlobalView(std::move(infos)), d.edges);
}

/// Prints the legality diff for a dumped world; exit 0 iff legal.
inline int oracle_check(const std::string& dump_path, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    WorldDump d;
    try {
        d = load_world_dump(dump_path);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return 2;
    }
    const auto report = dump_legality(d);
    for (const std::string& line : report.diff_lines()) out << line << '\n';
    return report.legal() ? 0 : 1;
}

inline std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("HSKIP_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError("HSKIP_SEED is not a valid integer");
    }
}

}  // namespace hskip
