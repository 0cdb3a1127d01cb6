// Command-line front end: generate workload trees, run the sequential
// oracle, execute scenarios, sweep process counts, render report tables.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "epibb/metrics.hpp"
#include "epibb/scenario.hpp"
#include "epibb/simkernel.hpp"

namespace {

using namespace epibb;

// Exit codes: 0 success, 1 input errors, 2 usage/invalid scenario,
// 3 total failure, 4 timeout, 5 wrong optimum.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitTotalFailure = 3;
constexpr int kExitTimeout = 4;
constexpr int kExitWrongOptimum = 5;

int cmd_gen_tree(std::uint64_t seed, std::size_t nodes, const RandomTreeParams& params,
                 const std::string& out_path) {
    const BasicTree tree = gen_random_tree(seed, nodes, params);
    save_basic_tree(tree, out_path);
    std::printf("wrote %s\n", out_path.c_str());
    std::printf("nodes %zu\nleaves %u\nmax_depth %d\ntotal_time_s %.6f\nmean_time_s %.6f\n",
                tree.size(), tree.leaf_count(), tree.max_depth(), tree.total_time(),
                tree.mean_time());
    return kExitOk;
}

int cmd_oracle(const std::string& tree_path, SelectionRule rule, bool pruning) {
    const BasicTree tree = load_basic_tree(tree_path);
    const SeqResult res = sequential_solve(tree, rule, pruning);
    if (res.optimum.has_value()) {
        std::printf("optimum %.17g\n", *res.optimum);
    } else {
        std::printf("optimum none\n");
    }
    std::printf("expanded %llu\ntotal_time_s %.6f\n",
                static_cast<unsigned long long>(res.expanded), res.total_time);
    return kExitOk;
}

void print_summary(const RunResult& res) {
    std::printf("outcome %s\n", to_string(res.outcome));
    if (res.optimum.has_value()) {
        std::printf("optimum %.17g\n", *res.optimum);
    } else {
        std::printf("optimum none\n");
    }
    std::printf("execution_hours %.6f\nevents %llu\nnodes_expanded %llu\n",
                res.execution_hours, static_cast<unsigned long long>(res.events_processed),
                static_cast<unsigned long long>(res.aggregate.nodes_expanded));
    std::printf("comm_mb %.3f\nstorage_peak_mb %.3f\nredundant_work_s %.3f\nrecoveries %llu\n",
                static_cast<double>(res.aggregate.comm_bytes_sent) / 1e6, res.storage_total_mb,
                res.aggregate.redundant_work_time,
                static_cast<unsigned long long>(res.aggregate.recoveries));
}

int outcome_exit_code(const RunResult& res, const std::optional<double>& expected) {
    switch (res.outcome) {
        case Outcome::TotalFailure:
            return kExitTotalFailure;
        case Outcome::Timeout:
            return kExitTimeout;
        case Outcome::Terminated:
            break;
    }
    if (expected.has_value() && res.optimum != expected) {
        return kExitWrongOptimum;
    }
    return kExitOk;
}

int cmd_run(const std::string& scenario_path, const std::string& trace_path, bool audit,
            bool table, std::optional<double> expect, std::size_t oracle_budget) {
    Scenario sc = Scenario::load(scenario_path);
    if (!trace_path.empty()) {
        sc.trace_path = trace_path;
    }
    if (audit) {
        sc.audit = true;
    }
    if (expect.has_value()) {
        sc.expect_optimum = expect;
    }
    std::printf("scenario seed=%llu processes=%d\n", static_cast<unsigned long long>(sc.seed),
                sc.processes);
    std::printf("params %s\n", sc.to_json().dump().c_str());

    const BasicTree tree = build_scenario_tree(sc);
    std::optional<double> expected = sc.expect_optimum;
    if (!expected.has_value() && tree.size() <= oracle_budget) {
        expected = sequential_solve(tree, sc.protocol.selection, sc.protocol.pruning).optimum;
    }
    const RunResult res = run_scenario(sc, tree);
    print_summary(res);
    if (expected.has_value()) {
        std::printf("oracle_optimum %.17g\n", *expected);
    }
    if (table) {
        std::fputs(render_table(std::vector<RunResult>{res}).c_str(), stdout);
    }
    return outcome_exit_code(res, expected);
}

struct SweepCell {
    int processes = 0;
    std::uint64_t seed = 0;
    std::optional<RunResult> result;
    std::string error;
};

int cmd_sweep(const std::string& scenario_path, std::vector<int> processors,
              std::vector<std::uint64_t> seeds, const std::string& out_path, bool table,
              unsigned jobs) {
    const Scenario base = Scenario::load(scenario_path);
    if (processors.empty()) {
        processors.push_back(base.processes);
    }
    if (seeds.empty()) {
        seeds.push_back(base.seed);
    }
    std::printf("scenario seed=%llu base_processes=%d\n",
                static_cast<unsigned long long>(base.seed), base.processes);
    std::printf("params %s\n", base.to_json().dump().c_str());

    const BasicTree tree = build_scenario_tree(base);
    std::vector<SweepCell> cells;
    for (int p : processors) {
        for (std::uint64_t s : seeds) {
            cells.push_back({p, s, std::nullopt, ""});
        }
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            auto& cell = cells[i];
            try {
                Scenario sc = base;
                sc.processes = cell.processes;
                sc.seed = cell.seed;
                sc.trace_path.clear();
                sc.validate();
                cell.result = run_scenario(sc, tree);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) {
        pool.emplace_back(work);
    }
    work();
    for (auto& th : pool) {
        th.join();
    }

    nlohmann::json out;
    out["base"] = base.to_json();
    nlohmann::json jcells = nlohmann::json::array();
    for (const auto& cell : cells) {
        nlohmann::json jc;
        jc["processes"] = cell.processes;
        jc["seed"] = cell.seed;
        if (cell.result.has_value()) {
            jc["result"] = cell.result->to_json();
        } else {
            jc["error"] = cell.error;
        }
        jcells.push_back(std::move(jc));
    }
    out["cells"] = std::move(jcells);
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::trunc);
        if (!f) {
            std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
            return kExitError;
        }
        f << out.dump(2) << '\n';
        std::printf("wrote %s\n", out_path.c_str());
    }

    // One row per processor count, averaged over seeds.
    std::vector<TableRow> rows;
    bool any_failed = false;
    for (int p : processors) {
        TableRow row;
        row.processors = p;
        int n = 0;
        for (const auto& cell : cells) {
            if (cell.processes != p) {
                continue;
            }
            if (!cell.result.has_value()) {
                any_failed = true;
                continue;
            }
            const auto r = to_table_row(*cell.result);
            row.execution_hours += r.execution_hours;
            row.bnb_pct += r.bnb_pct;
            row.contraction_pct += r.contraction_pct;
            row.storage_total_mb += r.storage_total_mb;
            row.storage_redundant_mb += r.storage_redundant_mb;
            row.comm_rate += r.comm_rate;
            ++n;
        }
        if (n > 0) {
            row.execution_hours /= n;
            row.bnb_pct /= n;
            row.contraction_pct /= n;
            row.storage_total_mb /= n;
            row.storage_redundant_mb /= n;
            row.comm_rate /= n;
        }
        rows.push_back(row);
    }
    if (table || out_path.empty()) {
        std::fputs(render_table(rows).c_str(), stdout);
    }
    for (const auto& cell : cells) {
        if (!cell.error.empty()) {
            std::fprintf(stderr, "cell processes=%d seed=%llu failed: %s\n", cell.processes,
                         static_cast<unsigned long long>(cell.seed), cell.error.c_str());
        }
    }
    return any_failed ? kExitError : kExitOk;
}

int cmd_report(const std::string& results_path) {
    std::ifstream in(results_path);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", results_path.c_str());
        return kExitError;
    }
    nlohmann::json j;
    in >> j;
    std::vector<TableRow> rows;
    std::map<int, std::pair<TableRow, int>> by_procs;
    std::vector<int> order;
    for (const auto& cell : j.at("cells")) {
        if (!cell.contains("result")) {
            continue;
        }
        const auto& r = cell.at("result");
        const auto& d = r.at("derived");
        TableRow row;
        row.processors = cell.at("processes").get<int>();
        row.execution_hours = r.at("execution_hours").get<double>();
        row.bnb_pct = d.at("bnb_pct").get<double>();
        row.contraction_pct = d.at("contraction_pct").get<double>();
        row.storage_total_mb = d.at("storage_total_mb").get<double>();
        row.storage_redundant_mb = d.at("storage_redundant_mb").get<double>();
        row.comm_rate = d.at("comm_mb_per_hour_per_processor").get<double>();
        auto [it, fresh] = by_procs.try_emplace(row.processors, row, 1);
        if (fresh) {
            order.push_back(row.processors);
        } else {
            auto& [acc, n] = it->second;
            acc.execution_hours += row.execution_hours;
            acc.bnb_pct += row.bnb_pct;
            acc.contraction_pct += row.contraction_pct;
            acc.storage_total_mb += row.storage_total_mb;
            acc.storage_redundant_mb += row.storage_redundant_mb;
            acc.comm_rate += row.comm_rate;
            ++n;
        }
    }
    for (int p : order) {
        auto [acc, n] = by_procs.at(p);
        acc.execution_hours /= n;
        acc.bnb_pct /= n;
        acc.contraction_pct /= n;
        acc.storage_total_mb /= n;
        acc.storage_redundant_mb /= n;
        acc.comm_rate /= n;
        rows.push_back(acc);
    }
    std::fputs(render_table(rows).c_str(), stdout);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"epibb: simulator for decentralized fault-tolerant branch and bound"};
    app.require_subcommand(1);

    // gen-tree
    auto* gen = app.add_subcommand("gen-tree", "generate a random workload tree");
    std::uint64_t gen_seed = 1;
    std::size_t gen_nodes = 1;
    RandomTreeParams gen_params;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--nodes", gen_nodes, "target node count")->required();
    gen->add_option("--expand-prob", gen_params.expand_prob, "expansion probability");
    gen->add_option("--min-depth", gen_params.min_forced_depth, "forced expansion depth");
    gen->add_option("--time-median", gen_params.time_median_s, "median node cost (s)");
    gen->add_option("--time-sigma", gen_params.time_sigma, "node cost log-sigma");
    gen->add_option("--out", gen_out, "output path")->required();

    // oracle
    auto* oracle = app.add_subcommand("oracle", "solve a tree with the sequential reference solver");
    std::string oracle_tree;
    std::string oracle_rule = "depth-first";
    std::string oracle_pruning = "on";
    oracle->add_option("tree", oracle_tree, "bbtree file")->required();
    oracle->add_option("--rule", oracle_rule, "depth-first | best-first")
        ->check(CLI::IsMember({"depth-first", "best-first"}));
    oracle->add_option("--pruning", oracle_pruning, "on | off")->check(CLI::IsMember({"on", "off"}));

    // run
    auto* run = app.add_subcommand("run", "execute one scenario");
    std::string run_scenario_path;
    std::string run_trace;
    bool run_audit = false;
    bool run_table = false;
    double run_expect = std::numeric_limits<double>::quiet_NaN();
    std::size_t run_oracle_budget = 1000000;
    run->add_option("scenario", run_scenario_path, "scenario file")->required();
    run->add_option("--trace", run_trace, "write an .ndtrace event log");
    run->add_flag("--audit", run_audit, "enable per-event global audits");
    run->add_flag("--table", run_table, "print the report table row");
    run->add_option("--expect-optimum", run_expect, "expected optimum for exit-code checking");
    run->add_option("--oracle-budget", run_oracle_budget,
                    "max tree size for the automatic sequential oracle");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run a scenario over processor counts and seeds");
    std::string sweep_scenario_path;
    std::vector<int> sweep_procs;
    std::vector<std::uint64_t> sweep_seeds;
    std::string sweep_out;
    bool sweep_table = false;
    unsigned sweep_jobs = 2;
    sweep->add_option("scenario", sweep_scenario_path, "base scenario file")->required();
    sweep->add_option("--processors", sweep_procs, "processor counts")->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "seeds")->delimiter(',');
    sweep->add_option("--out", sweep_out, "results file (JSON)");
    sweep->add_flag("--table", sweep_table, "print the aggregated table");
    sweep->add_option("--jobs", sweep_jobs, "parallel scenario workers");

    // report
    auto* report = app.add_subcommand("report", "render the table from sweep results");
    std::string report_path;
    report->add_option("results", report_path, "sweep results file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_tree(gen_seed, gen_nodes, gen_params, gen_out);
        }
        if (oracle->parsed()) {
            const auto rule = oracle_rule == "best-first" ? SelectionRule::BestFirst
                                                          : SelectionRule::DepthFirst;
            return cmd_oracle(oracle_tree, rule, oracle_pruning == "on");
        }
        if (run->parsed()) {
            std::optional<double> expect;
            if (!std::isnan(run_expect)) {
                expect = run_expect;
            }
            return cmd_run(run_scenario_path, run_trace, run_audit, run_table, expect,
                           run_oracle_budget);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_scenario_path, sweep_procs, sweep_seeds, sweep_out, sweep_table,
                             sweep_jobs);
        }
        if (report->parsed()) {
            return cmd_report(report_path);
        }
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return gen->parsed() ? kExitUsage : kExitError;
    }
    return kExitUsage;
}
