#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "calib/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("calib_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name), std::ios::binary) << text;
    }

    CliResult run(const std::string& args) const {
        const auto out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = std::string("\"") + CALIB_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                                err.string() + "\"";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    fs::path dir_;
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_F(Cli, MeasureWritesRequestedMetrics) {
    write("d.csv", "v,y\n0.2,0\n0.2,1\n0.8,1\n0.8,1\n");
    const auto r = run("measure --input " + path("d.csv").string() + " --metrics ece,smce --output " + path("r.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(slurp(path("r.json")));
    EXPECT_EQ(j["metrics"].size(), 2U);
    EXPECT_TRUE(j["metrics"]["ece"]["value"].is_number());
    EXPECT_TRUE(j["metrics"]["smce"]["value"].is_number());
    EXPECT_EQ(j["n"], 4);
    EXPECT_EQ(j["tool_version"], "0.1.0");
    EXPECT_EQ(j["input_digest"], "fnv1a64:" + calib::fnv1a_hex(slurp(path("d.csv"))));
    EXPECT_NEAR(j["metrics"]["ece"]["value"].get<double>(), 0.25, 1e-12);
}

TEST_F(Cli, KernelSubsampleIsReproducible) {
    std::string text = "v,y\n";
    for (int i = 0; i < 200; ++i) text += std::to_string((i * 37 % 100) / 100.0) + "," + std::to_string(i % 3 == 0) + "\n";
    write("d.csv", text);
    const std::string args = "measure --input " + path("d.csv").string() +
                             " --metrics kce-laplace --kce-mode subsample --kce-terms 100000 --seed 7";
    const auto a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    const auto j = json::parse(a.out);
    const auto& m = j["metrics"]["kce-laplace"];
    EXPECT_EQ(m["seed"], 7);
    EXPECT_EQ(m["config"]["terms_m"], 100000);
    EXPECT_TRUE(m["squared"].is_number());
    EXPECT_TRUE(m["squared_raw"].is_number());
}

TEST_F(Cli, CalibratedExtremesAllMetrics) {
    write("d.csv", "v,y\n0,0\n1,1\n");
    const auto r = run("measure --input " + path("d.csv").string() + " --metrics all");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    const std::vector<std::string> names{"ece",  "binned-ece", "binned-ece-w", "sintce",
                                         "smce", "ldce",       "kce-laplace",  "kce-gaussian"};
    EXPECT_EQ(j["metrics"].size(), names.size());
    for (const auto& n : names) {
        ASSERT_TRUE(j["metrics"].contains(n)) << n;
        if (n == "binned-ece-w") continue;  // carries the 0.05 width term
        EXPECT_LE(j["metrics"][n]["value"].get<double>(), 0.004) << n;
    }
    EXPECT_EQ(j["metrics"]["ece"]["value"].get<double>(), 0.0);
    EXPECT_NEAR(j["metrics"]["binned-ece-w"]["value"].get<double>(), 0.05, 1e-12);
}

TEST_F(Cli, MeasureIsByteIdentical) {
    write("d.csv", "v,y\n0.1,0\n0.35,1\n0.5,1\n0.9,1\n0.95,0\n");
    const std::string args = "measure --input " + path("d.csv").string() + " --metrics all --seed 3 --eps 0.1";
    EXPECT_EQ(run(args).out, run(args).out);
}

TEST_F(Cli, MeasureExitCodes) {
    write("bad.csv", "v,y\n0.5,1\n1.5,0\n");
    const auto bad = run("measure --input " + path("bad.csv").string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;

    const auto missing = run("measure --input " + path("none.csv").string());
    EXPECT_EQ(missing.code, 2);

    write("d.csv", "v,y\n0.5,1\n");
    const auto unknown = run("measure --input " + path("d.csv").string() + " --metrics foo");
    EXPECT_EQ(unknown.code, 1);
    EXPECT_NE(unknown.err.find("--metrics"), std::string::npos);

    const auto mode = run("measure --input " + path("d.csv").string() + " --kce-mode magic");
    EXPECT_EQ(mode.code, 1);
    EXPECT_NE(mode.err.find("--kce-mode"), std::string::npos);

    const auto bins = run("measure --input " + path("d.csv").string() + " --bins 0");
    EXPECT_EQ(bins.code, 1);
    EXPECT_NE(bins.err.find("--bins"), std::string::npos);

    EXPECT_EQ(run("measure").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
}

TEST_F(Cli, GenerateDbeta) {
    const auto r = run("generate --family dbeta --beta 1 --n 10000 --seed 1 --output " + path("d.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(slurp(path("d.csv")));
    EXPECT_EQ(rows.size(), 10001U);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"v", "y"}));
    EXPECT_NE(r.out.find("dbeta"), std::string::npos);
}

TEST_F(Cli, GeneratePaGap) {
    const auto r = run("generate --family pa-gap --alpha 0.25 --which 1 --n 1000 --seed 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 1001U);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_TRUE(rows[i][0] == "0.25" || rows[i][0] == "0.75") << rows[i][0];
    EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, GenerateGaussGap) {
    const auto r = run("generate --family gauss-gap --eps 0.05 --n 100000 --seed 3 --output " + path("g.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(path("g.csv"));
    const auto s = calib::parse_samples_csv(in);
    EXPECT_EQ(s.size(), 100000U);
    for (const auto& x : s) {
        ASSERT_GE(x.v, 0.25);
        ASSERT_LE(x.v, 0.75);
    }
}

TEST_F(Cli, GenerateOtherFamilies) {
    for (const std::string fam : {"quad-gap --alpha 0.2", "discontinuity --eps 0.01 --which 2", "f-eps --eps 0.01"}) {
        const auto r = run("generate --family " + fam + " --n 50 --seed 4");
        EXPECT_EQ(r.code, 0) << fam << r.err;
        EXPECT_EQ(csv_rows(r.out).size(), 51U);
    }
}

TEST_F(Cli, GenerateRejectsBadParameters) {
    EXPECT_EQ(run("generate --family nope --n 10").code, 1);
    EXPECT_EQ(run("generate --family pa-gap --alpha 0.9 --n 10").code, 1);
    EXPECT_EQ(run("generate --family pa-gap --which 3 --n 10").code, 1);
    EXPECT_EQ(run("generate --family gauss-gap --eps 0.3 --n 10").code, 1);
    EXPECT_EQ(run("generate --family dbeta --beta -1 --n 10").code, 1);
}

TEST_F(Cli, SweepRowCount) {
    const auto r = run("sweep --beta-grid 1 --trials 2 --n 100 --metrics ece --seed 5");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"beta", "trial", "metric", "value"}));
    EXPECT_EQ(rows[1][2], "ece");
    EXPECT_EQ(run("sweep --beta-grid 1 --trials 2 --n 100 --metrics ece --seed 5").out, r.out);
}

TEST_F(Cli, SweepRejectsMalformedGrid) {
    const auto r = run("sweep --beta-grid a,b --trials 1 --n 10");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--beta-grid"), std::string::npos);
    EXPECT_EQ(run("sweep --beta-grid 1,-2 --trials 1 --n 10").code, 1);
}

TEST_F(Cli, SweepShowsTemperatureTrend) {
    const auto r = run("sweep --beta-grid 0.01,1,100 --n 10000 --trials 5 --metrics smce,binned-ece --seed 11");
    ASSERT_EQ(r.code, 0) << r.err;
    std::map<std::pair<std::string, std::string>, double> sum;
    for (const auto& row : csv_rows(r.out)) {
        if (row[0] == "beta") continue;
        sum[{row[0], row[2]}] += std::stod(row[3]) / 5.0;
    }
    EXPECT_LE((sum[{"1", "smce"}]), 0.05);
    EXPECT_LE((sum[{"1", "binned-ece"}]), 0.05);
    EXPECT_GE((sum[{"0.01", "binned-ece"}]), (3.0 * sum[{"0.01", "smce"}]));
}

TEST_F(Cli, ReliabilityRows) {
    write("d.csv", "v,y\n0.1,0\n0.9,1\n");
    const auto r = run("reliability --input " + path("d.csv").string() + " --bins 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"lo", "hi", "count", "mean_v", "mean_y"}));
    EXPECT_EQ(std::stoi(rows[1][2]) + std::stoi(rows[2][2]), 2);
    EXPECT_EQ(run("reliability --input " + path("d.csv").string() + " --bins 0").code, 1);
    write("bad.csv", "v,y\n0.1,x\n");
    EXPECT_EQ(run("reliability --input " + path("bad.csv").string()).code, 2);
}

TEST_F(Cli, ReliabilityOnCalibratedData) {
    ASSERT_EQ(run("generate --family dbeta --beta 1 --n 10000 --seed 8 --output " + path("d.csv").string()).code, 0);
    const auto r = run("reliability --input " + path("d.csv").string() + " --bins 20");
    ASSERT_EQ(r.code, 0);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 21U);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (std::stoi(rows[i][2]) < 100) continue;
        EXPECT_LE(std::abs(std::stod(rows[i][3]) - std::stod(rows[i][4])), 0.05);
    }
}

TEST_F(Cli, ReliabilityEmptyBinsLeaveMeansBlank) {
    write("d.csv", "v,y\n0.9,1\n");
    const auto rows = csv_rows(run("reliability --input " + path("d.csv").string() + " --bins 2").out);
    ASSERT_EQ(rows.size(), 3U);
    ASSERT_EQ(rows[1].size(), 5U);
    EXPECT_EQ(rows[1][2], "0");
    EXPECT_EQ(rows[1][3], "");
    EXPECT_EQ(rows[1][4], "");
}
