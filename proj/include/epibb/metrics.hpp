#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epibb/message.hpp"

namespace epibb {

/// Per-process cost and volume counters (aggregated again at run end).
struct MetricCounters {
    double bnb_time = 0.0;          // seconds spent bounding/expanding nodes
    double contraction_time = 0.0;  // seconds charged for table contraction
    double idle_time = 0.0;         // seconds with an empty pool
    std::uint64_t comm_bytes_sent = 0;
    std::array<std::uint64_t, kMsgKindCount> messages_sent{};
    std::uint64_t messages_dropped = 0;
    std::uint64_t storage_peak_bytes = 0;      // table + report list, serialized
    std::uint64_t redundant_storage_bytes = 0;  // aggregate only: overlap across processes at peak
    double redundant_work_time = 0.0;          // re-expansions of nodes expanded elsewhere
    std::uint64_t nodes_expanded = 0;
    std::uint64_t recoveries = 0;              // sibling-complement insertions
    std::uint64_t interrupted_pool_codes = 0;  // pool entries cancelled by incoming reports

    void add(const MetricCounters& o) {
        bnb_time += o.bnb_time;
        contraction_time += o.contraction_time;
        idle_time += o.idle_time;
        comm_bytes_sent += o.comm_bytes_sent;
        for (int i = 0; i < kMsgKindCount; ++i) {
            messages_sent[i] += o.messages_sent[i];
        }
        messages_dropped += o.messages_dropped;
        storage_peak_bytes += o.storage_peak_bytes;
        redundant_work_time += o.redundant_work_time;
        nodes_expanded += o.nodes_expanded;
        recoveries += o.recoveries;
        interrupted_pool_codes += o.interrupted_pool_codes;
    }

    nlohmann::json to_json() const {
        nlohmann::json m;
        m["bnb_time_s"] = bnb_time;
        m["contraction_time_s"] = contraction_time;
        m["idle_time_s"] = idle_time;
        m["comm_bytes_sent"] = comm_bytes_sent;
        nlohmann::json kinds;
        for (int i = 0; i < kMsgKindCount; ++i) {
            kinds[to_string(static_cast<MsgKind>(i))] = messages_sent[i];
        }
        m["messages_sent"] = kinds;
        m["messages_dropped"] = messages_dropped;
        m["storage_peak_bytes"] = storage_peak_bytes;
        m["redundant_storage_bytes"] = redundant_storage_bytes;
        m["redundant_work_time_s"] = redundant_work_time;
        m["nodes_expanded"] = nodes_expanded;
        m["recoveries"] = recoveries;
        m["interrupted_pool_codes"] = interrupted_pool_codes;
        return m;
    }
};

enum class Outcome { Terminated, TotalFailure, Timeout };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Terminated: return "terminated";
        case Outcome::TotalFailure: return "total-failure";
        case Outcome::Timeout: return "timeout";
    }
    return "?";
}

struct ProcessStats {
    int id = 0;
    std::string status;
    double started_at_s = 0.0;
    double ended_at_s = 0.0;
    double best = 0.0;  // +inf rendered as null
    MetricCounters counters;
};

struct RunResult {
    Outcome outcome = Outcome::Timeout;
    std::optional<double> optimum;
    double execution_hours = 0.0;
    int process_count = 0;
    std::uint64_t events_processed = 0;
    std::uint64_t trace_records = 0;

    MetricCounters aggregate;
    std::vector<ProcessStats> per_process;

    // Derived report columns. The communication rate is always
    // total MB / execution hours / process count.
    double bnb_pct = 0.0;
    double contraction_pct = 0.0;
    double storage_total_mb = 0.0;
    double storage_redundant_mb = 0.0;
    double comm_mb_per_hour_per_processor = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["outcome"] = to_string(outcome);
        if (optimum.has_value()) {
            j["optimum"] = *optimum;
        } else {
            j["optimum"] = nullptr;
        }
        j["execution_hours"] = execution_hours;
        j["process_count"] = process_count;
        j["events_processed"] = events_processed;
        j["trace_records"] = trace_records;
        j["aggregate"] = aggregate.to_json();
        nlohmann::json procs = nlohmann::json::array();
        for (const auto& p : per_process) {
            nlohmann::json pj;
            pj["id"] = p.id;
            pj["status"] = p.status;
            pj["started_at_s"] = p.started_at_s;
            pj["ended_at_s"] = p.ended_at_s;
            if (p.best == std::numeric_limits<double>::infinity()) {
                pj["best"] = nullptr;
            } else {
                pj["best"] = p.best;
            }
            pj["counters"] = p.counters.to_json();
            procs.push_back(std::move(pj));
        }
        j["per_process"] = std::move(procs);
        nlohmann::json d;
        d["bnb_pct"] = bnb_pct;
        d["contraction_pct"] = contraction_pct;
        d["storage_total_mb"] = storage_total_mb;
        d["storage_redundant_mb"] = storage_redundant_mb;
        d["comm_mb_per_hour_per_processor"] = comm_mb_per_hour_per_processor;
        j["derived"] = std::move(d);
        return j;
    }
};

/// One report row in the layout of the simulation summary table.
struct TableRow {
    int processors = 0;
    double execution_hours = 0.0;
    double bnb_pct = 0.0;
    double contraction_pct = 0.0;
    double storage_total_mb = 0.0;
    double storage_redundant_mb = 0.0;
    double comm_rate = 0.0;
};

inline TableRow to_table_row(const RunResult& r) {
    return {r.process_count, r.execution_hours,        r.bnb_pct,
            r.contraction_pct, r.storage_total_mb,     r.storage_redundant_mb,
            r.comm_mb_per_hour_per_processor};
}

inline std::string render_table(const std::vector<TableRow>& rows) {
    std::string out =
        "Processors | Exec (h) | B&B % | Contraction % | Storage (MB) | Redundant (MB) | Comm (MB/h/proc)\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d | %.2f | %.2f%% | %.2f%% | %.2f | %.2f | %.2f\n",
                      r.processors, r.execution_hours, r.bnb_pct, r.contraction_pct,
                      r.storage_total_mb, r.storage_redundant_mb, r.comm_rate);
        out += buf;
    }
    return out;
}

inline std::string render_table(const std::vector<RunResult>& results) {
    std::vector<TableRow> rows;
    rows.reserve(results.size());
    for (const auto& r : results) {
        rows.push_back(to_table_row(r));
    }
    return render_table(rows);
}

}  // namespace epibb
