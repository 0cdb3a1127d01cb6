#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string cli() { return EPIBB_CLI_PATH; }

int run_cmd(const std::string& args, std::string* output = nullptr) {
    const std::string cmd = cli() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return -1;
    }
    std::string out;
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) {
        out += buf;
    }
    const int status = pclose(pipe);
    if (output != nullptr) {
        *output = out;
    }
    return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc);
    f << content;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, GenTreeThenOracle) {
    std::string out;
    ASSERT_EQ(run_cmd("gen-tree --seed 2 --nodes 1000 --out /tmp/epibb_cli_tree.bbtree", &out), 0)
        << out;
    EXPECT_NE(out.find("nodes 100"), std::string::npos) << out;  // 1000 or 1001

    std::string pruned;
    ASSERT_EQ(run_cmd("oracle /tmp/epibb_cli_tree.bbtree", &pruned), 0) << pruned;
    std::string full;
    ASSERT_EQ(run_cmd("oracle /tmp/epibb_cli_tree.bbtree --pruning off", &full), 0) << full;
    // Same optimum line in both modes; exhaustive expands every node.
    const auto opt_line = pruned.substr(0, pruned.find('\n'));
    EXPECT_NE(full.find(opt_line), std::string::npos) << full;
    EXPECT_NE(full.find("expanded 1001"), std::string::npos) << full;
}

TEST(Cli, GenTreeSingleNode) {
    std::string out;
    ASSERT_EQ(run_cmd("gen-tree --seed 1 --nodes 1 --out /tmp/epibb_cli_one.bbtree", &out), 0);
    EXPECT_NE(out.find("nodes 1\n"), std::string::npos) << out;
    const std::string text = slurp("/tmp/epibb_cli_one.bbtree");
    EXPECT_NE(text.find("bbtree v1"), std::string::npos);
}

TEST(Cli, GenTreeMissingOutIsUsageError) {
    std::string out;
    EXPECT_EQ(run_cmd("gen-tree --seed 1 --nodes 10", &out), 2) << out;
}

TEST(Cli, OracleOnMissingFileFails) {
    std::string out;
    EXPECT_EQ(run_cmd("oracle /tmp/epibb_no_such_file.bbtree", &out), 1) << out;
}

TEST(Cli, RunFaultFreeScenario) {
    write_file("/tmp/epibb_cli_sc.json", R"({
        "seed": 3,
        "processes": 3,
        "tree": {"random": {"seed": 2, "nodes": 301}},
        "audit": true
    })");
    std::string out;
    ASSERT_EQ(run_cmd("run /tmp/epibb_cli_sc.json --table", &out), 0) << out;
    EXPECT_NE(out.find("scenario seed=3"), std::string::npos) << out;  // repro header
    EXPECT_NE(out.find("outcome terminated"), std::string::npos) << out;
    EXPECT_NE(out.find("Processors | "), std::string::npos) << out;
}

TEST(Cli, RunCrashAllExitsThree) {
    write_file("/tmp/epibb_cli_crash.json", R"({
        "seed": 3,
        "processes": 2,
        "tree": {"random": {"seed": 2, "nodes": 301}},
        "crashes": [{"process": 0, "time_s": 0.5}, {"process": 1, "time_s": 0.5}]
    })");
    std::string out;
    EXPECT_EQ(run_cmd("run /tmp/epibb_cli_crash.json", &out), 3) << out;
    EXPECT_NE(out.find("outcome total-failure"), std::string::npos) << out;
}

TEST(Cli, RunWrongExpectedOptimumExitsFive) {
    write_file("/tmp/epibb_cli_sc5.json", R"({
        "seed": 3,
        "processes": 2,
        "tree": {"random": {"seed": 2, "nodes": 101}}
    })");
    std::string out;
    EXPECT_EQ(run_cmd("run /tmp/epibb_cli_sc5.json --expect-optimum -12345.0", &out), 5) << out;
}

TEST(Cli, RunInvalidScenarioExitsTwo) {
    write_file("/tmp/epibb_cli_bad.json", R"({"processes": 2, "tree": {"random": {"seed": 1, "nodes": 10}}, "mystery": 1})");
    std::string out;
    EXPECT_EQ(run_cmd("run /tmp/epibb_cli_bad.json", &out), 2) << out;
    EXPECT_NE(out.find("mystery"), std::string::npos) << out;
}

TEST(Cli, RunWritesTrace) {
    write_file("/tmp/epibb_cli_sc_t.json", R"({
        "seed": 3,
        "processes": 2,
        "tree": {"random": {"seed": 2, "nodes": 101}}
    })");
    std::string out;
    ASSERT_EQ(run_cmd("run /tmp/epibb_cli_sc_t.json --trace /tmp/epibb_cli.ndtrace", &out), 0) << out;
    const std::string trace = slurp("/tmp/epibb_cli.ndtrace");
    EXPECT_NE(trace.find("\"ev\":\"send\""), std::string::npos);
    std::remove("/tmp/epibb_cli.ndtrace");
}

TEST(Cli, SweepWritesDeterministicResultsAndReportRendersThem) {
    write_file("/tmp/epibb_cli_sweep.json", R"({
        "seed": 5,
        "processes": 2,
        "tree": {"random": {"seed": 7, "nodes": 301}}
    })");
    std::string out;
    ASSERT_EQ(run_cmd("sweep /tmp/epibb_cli_sweep.json --processors 2,4 --seeds 5,6 "
                      "--out /tmp/epibb_cli_results.json --table",
                      &out),
              0)
        << out;
    EXPECT_NE(out.find("Processors | "), std::string::npos) << out;
    const std::string first = slurp("/tmp/epibb_cli_results.json");
    ASSERT_EQ(run_cmd("sweep /tmp/epibb_cli_sweep.json --processors 2,4 --seeds 5,6 "
                      "--out /tmp/epibb_cli_results.json",
                      &out),
              0)
        << out;
    EXPECT_EQ(slurp("/tmp/epibb_cli_results.json"), first);  // rerun is byte-identical

    std::string report;
    ASSERT_EQ(run_cmd("report /tmp/epibb_cli_results.json", &report), 0) << report;
    EXPECT_NE(report.find("Processors | "), std::string::npos) << report;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    std::string out;
    EXPECT_EQ(run_cmd("frobnicate", &out), 2) << out;
}
