// Command-line front end for the hskip simulator: single-scenario runs,
// campaign files, and the oracle legality checker for world dumps.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hskip/hskip.hpp"

namespace {

struct ScenarioOpts {
    int n = 16;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int repeats = 1;
    int max_rounds = 0;
    std::string dist = "pareto(1.5,1.0)";
    std::string out;
    std::string trace;
    double fraction = 0.0;
};

void add_common_flags(CLI::App* cmd, ScenarioOpts& o) {
    cmd->add_option("--n", o.n, "network size")->check(CLI::Range(2, 1 << 20));
    cmd->add_option("--seed", o.seed, "base seed (repeats use seed, seed+1, ...)")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--repeats", o.repeats, "independent runs")->check(CLI::PositiveNumber);
    cmd->add_option("--max-rounds", o.max_rounds,
                    "round budget per run (default 50*ceil(log2 n))");
    cmd->add_option("--dist", o.dist,
                    "bandwidths: uniform(lo,hi) | pareto(alpha,scale) | empirical(file)");
    cmd->add_option("--out", o.out, "CSV output path (default: stdout)");
    cmd->add_option("--trace", o.trace, "write the message log to this file");
}

std::uint64_t resolve_seed(const ScenarioOpts& o) {
    if (o.seed_set) return o.seed;
    if (auto env = hskip::env_seed()) return *env;
    return 1;
}

int run_single(const std::string& name, const ScenarioOpts& o) {
    hskip::ScenarioConfig cfg;
    cfg.kind = hskip::ScenarioConfig::parse_kind(name, &cfg.mode);
    cfg.n = o.n;
    cfg.repeats = o.repeats;
    cfg.max_rounds = o.max_rounds;
    cfg.dist = hskip::BandwidthDist::parse(o.dist);
    cfg.fraction = o.fraction;
    cfg.seed = resolve_seed(o);
    cfg.validate();

    hskip::Campaign campaign;
    campaign.base_seed = cfg.seed;
    campaign.entries.push_back(cfg);
    campaign.entry_has_seed.push_back(true);

    hskip::CampaignOverrides ov;
    if (!o.out.empty()) ov.out = o.out;
    if (!o.trace.empty()) ov.trace = o.trace;
    return hskip::execute_campaign(campaign, ov);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hskip: self-stabilizing bandwidth-ordered overlay simulator"};
    app.require_subcommand(1);

    std::map<std::string, ScenarioOpts> opts;
    for (const std::string name :
         {"converge", "join", "leave", "change", "crash", "attack", "flow"}) {
        CLI::App* cmd = app.add_subcommand(
            name, name == "converge" ? "stabilize random trees and measure rounds/messages"
                  : name == "crash"  ? "random simultaneous failures plus fresh joins"
                  : name == "attack" ? "contiguous bandwidth-block failures plus fresh joins"
                  : name == "flow"   ? "all-pairs flow problem on a stabilized network"
                                     : "apply one " + name + " to a stabilized network");
        ScenarioOpts& o = opts[name];
        add_common_flags(cmd, o);
        if (name == "crash" || name == "attack")
            cmd->add_option("--fraction", o.fraction, "fraction of nodes to remove")
                ->required()
                ->check(CLI::Range(0.0, 0.999));
    }

    std::string campaign_path;
    ScenarioOpts campaign_opts;
    CLI::App* campaign_cmd = app.add_subcommand("campaign", "run every scenario in a JSON config");
    campaign_cmd->add_option("config", campaign_path, "campaign JSON file")->required();
    campaign_cmd->add_option("--seed", campaign_opts.seed, "override the global seed")
        ->each([&](const std::string&) { campaign_opts.seed_set = true; });
    campaign_cmd->add_option("--out", campaign_opts.out, "override the CSV output path");
    campaign_cmd->add_option("--trace", campaign_opts.trace, "write the message log to this file");

    std::string dump_path;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle-check", "print the legality diff of a world dump");
    oracle_cmd->add_option("dump", dump_path, "world dump JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (campaign_cmd->parsed()) {
            hskip::CampaignOverrides ov;
            if (campaign_opts.seed_set)
                ov.seed = campaign_opts.seed;
            else if (auto env = hskip::env_seed())
                ov.seed = *env;
            if (!campaign_opts.out.empty()) ov.out = campaign_opts.out;
            if (!campaign_opts.trace.empty()) ov.trace = campaign_opts.trace;
            return hskip::run_campaign(campaign_path, ov);
        }
        if (oracle_cmd->parsed()) return hskip::oracle_check(dump_path);
        for (auto& [name, o] : opts)
            if (app.get_subcommand(name)->parsed()) return run_single(name, o);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const hskip::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const hskip::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const hskip::IoError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const hskip::Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}
