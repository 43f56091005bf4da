// Drives the command-line tool as a subprocess and checks exit codes and outputs.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "imdpbound/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "imdpbound_cli_test";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static Result run(const std::string& args) {
        const auto log = dir_ / "stdout.txt";
        const std::string cmd = std::string(IMDPBOUND_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(log);
        return r;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    static std::string path(const std::string& name) { return (dir_ / name).string(); }

    static void ensure_imdps() {
        if (fs::exists(dir_ / "imdp_d0.05.txt")) return;
        ASSERT_EQ(run("induce -w 0.1,0.05 -o " + dir_.string()).code, 0);
    }

    static inline fs::path dir_;
};

} // namespace

TEST_F(Cli, NoSubcommandIsUsageError) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("induce").code, 1); // -w is required
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, InduceWritesOneFilePerWidth) {
    ensure_imdps();
    EXPECT_TRUE(fs::exists(dir_ / "imdp_d0.1.txt"));
    EXPECT_TRUE(fs::exists(dir_ / "imdp_d0.05.txt"));
    const auto doc = imdpbound::load_imdp(path("imdp_d0.05.txt"));
    EXPECT_EQ(doc.imdp.num_states(), 576u);
}

TEST_F(Cli, InduceErrors) {
    EXPECT_EQ(run("induce -w 0.07 -o " + path("bad")).code, 2);
    EXPECT_EQ(run("induce -w 0.1,0.04 -o " + path("bad")).code, 2);
    EXPECT_EQ(run("induce -w 0.1 -m /nonexistent/model.json -o " + path("bad")).code, 4);
}

TEST_F(Cli, ValueIteration) {
    ensure_imdps();
    const auto out = path("vi");
    const auto r = run("vi " + path("imdp_d0.1.txt") + " -o " + out);
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"values_min.csv", "values_max.csv", "strategy_min.csv", "adversary_max.txt",
                          "report_max.json"})
        EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
    EXPECT_EQ(run("vi " + path("imdp_d0.1.txt") + " --max-iter 3 -o " + out).code, 3);
    EXPECT_EQ(run("vi /nonexistent/imdp.txt").code, 4);
}

TEST_F(Cli, MalformedImdpIsModelError) {
    {
        std::ofstream f(path("broken.txt"));
        f << "imdpbound-imdp 1\nactions 1 go\nstates two\n";
    }
    const auto r = run("vi " + path("broken.txt") + " -o " + path("vi_broken"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
}

TEST_F(Cli, StrategyRoundTripsThroughCompare) {
    ensure_imdps();
    const auto out = path("st");
    ASSERT_EQ(run("strategy " + path("imdp_d0.1.txt") + " --mode max -o " + out).code, 0);
    const auto boxes = (fs::path(out) / "strategy_boxes_max.csv").string();
    ASSERT_TRUE(fs::exists(boxes));
    const auto r = run("compare " + path("imdp_d0.1.txt") + " --external " + boxes + " -o " + out);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_FALSE(j.dump().empty());
    EXPECT_TRUE(fs::exists(fs::path(out) / "agreement_external.csv"));
}

TEST_F(Cli, Section) {
    ensure_imdps();
    const auto out = path("sec");
    ASSERT_EQ(run("section " + path("imdp_d0.1.txt") + " --dim 1 --value 0.7 -o " + out).code, 0);
    const auto csv = slurp(fs::path(out) / "section_x1_0.7.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
    EXPECT_TRUE(fs::exists(fs::path(out) / "section_x1_0.7.gp"));
    EXPECT_EQ(run("section " + path("imdp_d0.1.txt") + " --value 3 -o " + out).code, 2);
}

TEST_F(Cli, RefineCheck) {
    ensure_imdps();
    const auto r = run("refine-check " + path("imdp_d0.1.txt") + " " + path("imdp_d0.05.txt"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("0 violations"), std::string::npos) << r.out;
    // Reversed order: the fine cells are not nested inside the coarse ones.
    EXPECT_EQ(run("refine-check " + path("imdp_d0.05.txt") + " " + path("imdp_d0.1.txt")).code, 2);
}

TEST_F(Cli, MonteCarloIsSeedDeterministic) {
    ensure_imdps();
    const std::string args = "mc --start 0.1,0.1 --imdp " + path("imdp_d0.1.txt") + " --runs 300 --seed 5";
    const auto a = run(args), b = run(args + " --threads 2");
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    const auto j = nlohmann::json::parse(a.out);
    EXPECT_GT(j["mean"].get<double>(), 0.0);
    EXPECT_EQ(run("mc --start 0.1,0.1 --action slow --runs 100").code, 0);
    EXPECT_EQ(run("mc --start 0.1,0.1 --action hover --runs 100").code, 2);
}

TEST_F(Cli, ExperimentOutputDirectory) {
    {
        std::ofstream f(path("cfg.json"));
        f << R"({"widths": [0.1, 0.05], "mc": {"runs": 200, "probes": 3}, "output": "from_config"})";
    }
    ASSERT_EQ(run("experiment -c " + path("cfg.json") + " -o " + path("from_flag")).code, 0);
    EXPECT_TRUE(fs::exists(dir_ / "from_flag" / "summary.json"));
    // Without -o the config's output is used, relative to the working directory.
    const auto prev = fs::current_path();
    fs::current_path(dir_);
    const auto r = run("experiment -c cfg.json");
    fs::current_path(prev);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "from_config" / "summary.json"));
    EXPECT_EQ(run("experiment -c " + path("missing.json")).code, 4);
}
