#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "epibb/tree.hpp"
#include "epibb/worker.hpp"

namespace epibb {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                       const char* ctx) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ScenarioError(std::string("unknown key '") + key + "' in " + ctx);
        }
    }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ScenarioError(std::string("bad value for '") + key + "'");
    }
}

}  // namespace detail

struct TreeSource {
    std::string file;  // mutually exclusive with `random`
    bool random = false;
    std::uint64_t seed = 1;
    std::size_t nodes = 1;
    RandomTreeParams params;
};

struct NetworkParams {
    double base_latency_ms = 1.5;
    double per_byte_ms = 0.005;
    double loss_prob = 0.0;

    double latency_s(std::size_t bytes) const {
        return (base_latency_ms + per_byte_ms * static_cast<double>(bytes)) / 1000.0;
    }
};

struct CrashEvent {
    int process = 0;
    double time_s = 0.0;
};

struct PartitionEvent {
    double time_s = 0.0;
    std::vector<std::vector<int>> groups;
};

struct JoinEvent {
    double time_s = 0.0;
};

/// Fully determines a run: workload, process set, network, fault schedules
/// and all protocol parameters.
struct Scenario {
    std::uint64_t seed = 1;
    int processes = 1;
    TreeSource tree;
    double granularity = 1.0;
    NetworkParams network;
    std::vector<CrashEvent> crashes;
    std::vector<PartitionEvent> partitions;
    std::vector<JoinEvent> joins;
    ProtocolParams protocol;
    MembershipParams membership;
    double max_sim_time_s = 0.0;  // 0: defaults to 100x the workload's total time
    bool audit = false;
    std::string trace_path;
    std::optional<double> expect_optimum;

    int total_processes() const { return processes + static_cast<int>(joins.size()); }

    void validate() const {
        if (processes < 1) {
            throw ScenarioError("processes must be >= 1");
        }
        if (tree.file.empty() == !tree.random) {
            throw ScenarioError("tree must name exactly one of 'file' or 'random'");
        }
        if (!(granularity > 0.0)) {
            throw ScenarioError("granularity must be > 0");
        }
        if (network.loss_prob < 0.0 || network.loss_prob > 1.0) {
            throw ScenarioError("loss_prob must be in [0, 1]");
        }
        if (!(network.base_latency_ms > 0.0) || network.per_byte_ms < 0.0) {
            throw ScenarioError("base latency must be positive");
        }
        const int total = total_processes();
        for (const auto& c : crashes) {
            if (c.process < 0 || c.process >= total || c.time_s < 0.0) {
                throw ScenarioError("crash schedule entry out of range");
            }
        }
        if (!joins.empty() && !membership.enabled) {
            throw ScenarioError("joins require membership to be enabled");
        }
        if (membership.enabled) {
            if (membership.servers.empty()) {
                throw ScenarioError("membership requires at least one gossip server");
            }
            std::set<int> crashed;
            for (const auto& c : crashes) {
                crashed.insert(c.process);
            }
            bool reliable = false;
            for (int s : membership.servers) {
                if (s < 0 || s >= processes) {
                    throw ScenarioError("gossip server id out of range");
                }
                reliable = reliable || crashed.count(s) == 0;
            }
            if (!reliable) {
                throw ScenarioError("crash schedule kills every gossip server");
            }
        }
        for (const auto& p : partitions) {
            std::set<int> seen;
            for (const auto& g : p.groups) {
                for (int m : g) {
                    if (m < 0 || m >= total || !seen.insert(m).second) {
                        throw ScenarioError("partition groups must list each process exactly once");
                    }
                }
            }
            if (static_cast<int>(seen.size()) != total) {
                throw ScenarioError("partition groups must cover all processes");
            }
        }
        if (protocol.report_batch < 1 || protocol.report_fanout < 0 ||
            protocol.fail_threshold < 1 || protocol.min_grant_pool < 0 ||
            !(protocol.report_timeout_s > 0.0) || !(protocol.table_gossip_s > 0.0) ||
            protocol.contraction_cost_s < 0.0) {
            throw ScenarioError("bad protocol parameter");
        }
    }

    static Scenario from_json(const nlohmann::json& j) {
        using detail::check_keys;
        using detail::get_or;
        if (!j.is_object()) {
            throw ScenarioError("scenario must be a JSON object");
        }
        check_keys(j,
                   {"seed", "processes", "tree", "granularity", "network", "crashes", "partitions",
                    "joins", "protocol", "membership", "max_sim_time_s", "audit", "trace",
                    "expect_optimum"},
                   "scenario");
        Scenario sc;
        sc.seed = get_or<std::uint64_t>(j, "seed", 1);
        sc.processes = get_or<int>(j, "processes", 1);
        if (!j.contains("tree")) {
            throw ScenarioError("scenario needs a 'tree'");
        }
        const auto& jt = j.at("tree");
        check_keys(jt, {"file", "random"}, "tree");
        if (jt.contains("file")) {
            sc.tree.file = jt.at("file").get<std::string>();
        }
        if (jt.contains("random")) {
            const auto& jr = jt.at("random");
            check_keys(jr,
                       {"seed", "nodes", "expand_prob", "min_depth", "time_median_s", "time_sigma",
                        "value_lo", "value_hi", "slack_lo", "slack_hi"},
                       "tree.random");
            sc.tree.random = true;
            sc.tree.seed = get_or<std::uint64_t>(jr, "seed", 1);
            sc.tree.nodes = get_or<std::size_t>(jr, "nodes", 1);
            auto& p = sc.tree.params;
            p.expand_prob = get_or<double>(jr, "expand_prob", p.expand_prob);
            p.min_forced_depth = get_or<int>(jr, "min_depth", p.min_forced_depth);
            p.time_median_s = get_or<double>(jr, "time_median_s", p.time_median_s);
            p.time_sigma = get_or<double>(jr, "time_sigma", p.time_sigma);
            p.value_lo = get_or<double>(jr, "value_lo", p.value_lo);
            p.value_hi = get_or<double>(jr, "value_hi", p.value_hi);
            p.slack_lo = get_or<double>(jr, "slack_lo", p.slack_lo);
            p.slack_hi = get_or<double>(jr, "slack_hi", p.slack_hi);
        }
        sc.granularity = get_or<double>(j, "granularity", 1.0);
        if (j.contains("network")) {
            const auto& jn = j.at("network");
            check_keys(jn, {"base_latency_ms", "per_byte_ms", "loss_prob"}, "network");
            sc.network.base_latency_ms = get_or<double>(jn, "base_latency_ms", sc.network.base_latency_ms);
            sc.network.per_byte_ms = get_or<double>(jn, "per_byte_ms", sc.network.per_byte_ms);
            sc.network.loss_prob = get_or<double>(jn, "loss_prob", sc.network.loss_prob);
        }
        for (const auto& jc : get_or<nlohmann::json>(j, "crashes", nlohmann::json::array())) {
            check_keys(jc, {"process", "time_s"}, "crashes[]");
            sc.crashes.push_back({get_or<int>(jc, "process", -1), get_or<double>(jc, "time_s", 0.0)});
        }
        for (const auto& jp : get_or<nlohmann::json>(j, "partitions", nlohmann::json::array())) {
            check_keys(jp, {"time_s", "groups"}, "partitions[]");
            PartitionEvent pe;
            pe.time_s = get_or<double>(jp, "time_s", 0.0);
            for (const auto& g : get_or<nlohmann::json>(jp, "groups", nlohmann::json::array())) {
                pe.groups.push_back(g.get<std::vector<int>>());
            }
            sc.partitions.push_back(std::move(pe));
        }
        for (const auto& jj : get_or<nlohmann::json>(j, "joins", nlohmann::json::array())) {
            check_keys(jj, {"time_s"}, "joins[]");
            sc.joins.push_back({get_or<double>(jj, "time_s", 0.0)});
        }
        if (j.contains("protocol")) {
            const auto& jp = j.at("protocol");
            check_keys(jp,
                       {"selection", "pruning", "report_batch", "report_fanout", "report_timeout_s",
                        "table_gossip", "table_gossip_s", "request_timeout_s", "fail_threshold",
                        "min_grant_pool", "contraction_cost_us"},
                       "protocol");
            auto& p = sc.protocol;
            const std::string rule = get_or<std::string>(jp, "selection", "depth-first");
            if (rule == "depth-first") {
                p.selection = SelectionRule::DepthFirst;
            } else if (rule == "best-first") {
                p.selection = SelectionRule::BestFirst;
            } else {
                throw ScenarioError("selection must be 'depth-first' or 'best-first'");
            }
            p.pruning = get_or<bool>(jp, "pruning", p.pruning);
            p.report_batch = get_or<int>(jp, "report_batch", p.report_batch);
            p.report_fanout = get_or<int>(jp, "report_fanout", p.report_fanout);
            p.report_timeout_s = get_or<double>(jp, "report_timeout_s", p.report_timeout_s);
            p.table_gossip = get_or<bool>(jp, "table_gossip", p.table_gossip);
            p.table_gossip_s = get_or<double>(jp, "table_gossip_s", p.table_gossip_s);
            p.request_timeout_s = get_or<double>(jp, "request_timeout_s", p.request_timeout_s);
            p.fail_threshold = get_or<int>(jp, "fail_threshold", p.fail_threshold);
            p.min_grant_pool = get_or<int>(jp, "min_grant_pool", p.min_grant_pool);
            p.contraction_cost_s = get_or<double>(jp, "contraction_cost_us", 10.0) * 1e-6;
        }
        if (j.contains("membership")) {
            const auto& jm = j.at("membership");
            check_keys(jm, {"enabled", "gossip_s", "fail_timeout_s", "servers", "join_retry_s"},
                       "membership");
            auto& m = sc.membership;
            m.enabled = get_or<bool>(jm, "enabled", m.enabled);
            m.gossip_s = get_or<double>(jm, "gossip_s", m.gossip_s);
            m.fail_timeout_s = get_or<double>(jm, "fail_timeout_s", m.fail_timeout_s);
            m.servers = get_or<std::vector<int>>(jm, "servers", m.servers);
            m.join_retry_s = get_or<double>(jm, "join_retry_s", m.join_retry_s);
        }
        sc.max_sim_time_s = get_or<double>(j, "max_sim_time_s", 0.0);
        sc.audit = get_or<bool>(j, "audit", false);
        sc.trace_path = get_or<std::string>(j, "trace", "");
        if (j.contains("expect_optimum") && !j.at("expect_optimum").is_null()) {
            sc.expect_optimum = j.at("expect_optimum").get<double>();
        }
        sc.validate();
        return sc;
    }

    static Scenario load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw ScenarioError("cannot open scenario file: " + path);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ScenarioError(path + ": " + e.what());
        }
        try {
            return from_json(j);
        } catch (const ScenarioError& e) {
            throw ScenarioError(path + ": " + e.what());
        }
    }

    /// Resolved parameter echo: every field, defaults included.
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["processes"] = processes;
        nlohmann::json jt;
        if (!tree.file.empty()) {
            jt["file"] = tree.file;
        } else {
            nlohmann::json jr;
            jr["seed"] = tree.seed;
            jr["nodes"] = tree.nodes;
            jr["expand_prob"] = tree.params.expand_prob;
            jr["min_depth"] = tree.params.min_forced_depth;
            jr["time_median_s"] = tree.params.time_median_s;
            jr["time_sigma"] = tree.params.time_sigma;
            jr["value_lo"] = tree.params.value_lo;
            jr["value_hi"] = tree.params.value_hi;
            jr["slack_lo"] = tree.params.slack_lo;
            jr["slack_hi"] = tree.params.slack_hi;
            jt["random"] = std::move(jr);
        }
        j["tree"] = std::move(jt);
        j["granularity"] = granularity;
        j["network"] = {{"base_latency_ms", network.base_latency_ms},
                        {"per_byte_ms", network.per_byte_ms},
                        {"loss_prob", network.loss_prob}};
        nlohmann::json jc = nlohmann::json::array();
        for (const auto& c : crashes) {
            jc.push_back({{"process", c.process}, {"time_s", c.time_s}});
        }
        j["crashes"] = std::move(jc);
        nlohmann::json jp = nlohmann::json::array();
        for (const auto& p : partitions) {
            jp.push_back({{"time_s", p.time_s}, {"groups", p.groups}});
        }
        j["partitions"] = std::move(jp);
        nlohmann::json jj = nlohmann::json::array();
        for (const auto& jn : joins) {
            jj.push_back({{"time_s", jn.time_s}});
        }
        j["joins"] = std::move(jj);
        j["protocol"] = {{"selection", to_string(protocol.selection)},
                         {"pruning", protocol.pruning},
                         {"report_batch", protocol.report_batch},
                         {"report_fanout", protocol.report_fanout},
                         {"report_timeout_s", protocol.report_timeout_s},
                         {"table_gossip", protocol.table_gossip},
                         {"table_gossip_s", protocol.table_gossip_s},
                         {"request_timeout_s", protocol.request_timeout_s},
                         {"fail_threshold", protocol.fail_threshold},
                         {"min_grant_pool", protocol.min_grant_pool},
                         {"contraction_cost_us", protocol.contraction_cost_s * 1e6}};
        j["membership"] = {{"enabled", membership.enabled},
                           {"gossip_s", membership.gossip_s},
                           {"fail_timeout_s", membership.fail_timeout_s},
                           {"servers", membership.servers},
                           {"join_retry_s", membership.join_retry_s}};
        j["max_sim_time_s"] = max_sim_time_s;
        j["audit"] = audit;
        j["trace"] = trace_path;
        if (expect_optimum.has_value()) {
            j["expect_optimum"] = *expect_optimum;
        } else {
            j["expect_optimum"] = nullptr;
        }
        return j;
    }
};

/// Materializes the scenario's workload (file or generator + granularity).
inline BasicTree build_scenario_tree(const Scenario& sc) {
    BasicTree tree = sc.tree.random ? gen_random_tree(sc.tree.seed, sc.tree.nodes, sc.tree.params)
                                    : load_basic_tree(sc.tree.file);
    if (sc.granularity != 1.0) {
        tree.scale_time(sc.granularity);
    }
    return tree;
}

}  // namespace epibb
