#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "roughlab/cli.hpp"

namespace fs = std::filesystem;
using roughlab::cli::run;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("roughlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string config(const std::string& text) {
        const fs::path p = root_ / ("cfg" + std::to_string(n_++) + ".ini");
        std::ofstream(p) << text;
        return p.string();
    }

    int call(std::vector<std::string> args) {
        args.insert(args.begin(), "roughlab");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    // Directory named on the "output: " line.
    fs::path output_dir() const {
        const std::string text = out_.str();
        const auto at = text.find("output: ");
        if (at == std::string::npos) return {};
        return text.substr(at + 8, text.find('\n', at) - at - 8);
    }

    fs::path root_;
    std::ostringstream out_, err_;
    int n_ = 0;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

std::map<std::string, double> summary(const fs::path& p) {
    std::map<std::string, double> m;
    std::istringstream is(slurp(p));
    std::string key, eq;
    double v;
    while (is >> key >> eq >> v) m[key] = v;
    return m;
}

} // namespace

TEST_F(Cli, InvalidInputsExitTwo) {
    const std::string out = (root_ / "res").string();
    EXPECT_EQ(call({"solve-rough", "--config", config("[problem]\np = 1.5\n"), "--out", out}), 2);
    EXPECT_NE(err_.str().find("p"), std::string::npos);

    EXPECT_EQ(call({"solve-rough", "--config", config("[functions]\nh = wobble\n"), "--out", out}), 2);
    EXPECT_NE(err_.str().find("constant, sine, cosine_x"), std::string::npos) << err_.str();

    EXPECT_EQ(call({"solve-limit", "--config", config("[problem\np = 2\n"), "--out", out}), 2);
    EXPECT_EQ(call({"verify", "nonsense", "--config", config(""), "--out", out}), 2);
    EXPECT_NE(err_.str().find("concentration"), std::string::npos);
    EXPECT_EQ(call({"solve-rough", "--config", config("[problem]\nepsilon = 0.4\n"), "--out", out}), 2);
    EXPECT_EQ(call({"sweep", "--config", config(""), "--eps-list", "0.1,0.2", "--out", out}), 2);
    EXPECT_EQ(call({"solve-rough", "--config", (root_ / "missing.ini").string(), "--out", out}), 2);
    EXPECT_EQ(call({"solve-rough", "--out", out}), 2);
    EXPECT_EQ(call({}), 2);
    // Nothing ran, so nothing was written.
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, ZeroLoadSolveRough) {
    const std::string cfg = config("[problem]\nepsilon = 0.2\n[functions]\nf = zero\n[mesh]\ntarget_edge = 0.0625\n");
    ASSERT_EQ(call({"solve-rough", "--config", cfg, "--out", (root_ / "res").string()}), 0) << err_.str();
    const fs::path dir = output_dir();
    for (const char* name : {"manifest.ini", "solution.vtk", "diagnostics.csv", "summary.txt"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    const auto s = summary(dir / "summary.txt");
    EXPECT_EQ(s.at("max_abs_u"), 0.0);
    EXPECT_EQ(s.at("norm_W1p"), 0.0);
    EXPECT_EQ(s.at("newton_iterations"), 0.0);
}

TEST_F(Cli, ManufacturedSolveLimit) {
    const std::string cfg = config("[functions]\nh = constant\nh_constant = 1\nf = one\n[mesh]\ncylinder_resolution = 64\n");
    ASSERT_EQ(call({"solve-limit", "--config", cfg, "--out", (root_ / "res").string()}), 0) << err_.str();
    const fs::path dir = output_dir();
    const auto s = summary(dir / "summary.txt");
    EXPECT_NEAR(s.at("trace_max"), 1.0 / std::tanh(1.0), 1e-3);
    EXPECT_LE(s.at("gamma_residual"), 1e-8);
    EXPECT_TRUE(fs::exists(dir / "mu.csv"));
}

TEST_F(Cli, VerifyMuAndConcentration) {
    const std::string res = (root_ / "res").string();
    ASSERT_EQ(call({"verify", "mu", "--config", config("[functions]\nh = cosine_x\n"), "--out", res}), 0) << err_.str();
    EXPECT_NE(out_.str().find("max |mu - mu_exact|"), std::string::npos);
    EXPECT_TRUE(fs::exists(output_dir() / "mu.csv"));

    const std::string cfg = config("[functions]\nh = constant\n[verify]\nu = one\nphi = one\n");
    ASSERT_EQ(call({"verify", "concentration", "--config", cfg, "--eps-list", "0.1,0.05", "--out", res}), 0)
        << err_.str();
    const std::string csv = slurp(output_dir() / "concentration.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        double v[5];
        char comma;
        std::istringstream fields(line);
        fields >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3];
        EXPECT_NEAR(v[2], 1.0, 1e-13);
        EXPECT_LE(v[3], 1e-13) << line;
    }
}

TEST_F(Cli, SweepSingleEpsAndDeterminism) {
    const std::string cfg = config("[problem]\np = 2\n[functions]\nh = constant\nf = one\n"
                                   "[mesh]\ntarget_edge = 0.0625\ncylinder_resolution = 16\n");
    const std::string a = (root_ / "a").string(), b = (root_ / "b").string();
    ASSERT_EQ(call({"sweep", "--config", cfg, "--eps-list", "0.1", "--out", a}), 0) << err_.str();
    const fs::path da = output_dir();
    const std::string report = slurp(da / "report.csv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);
    for (const char* name : {"timing.csv", "error_vs_eps.dat", "summary.txt", "manifest.ini"})
        EXPECT_TRUE(fs::exists(da / name)) << name;

    ASSERT_EQ(call({"sweep", "--config", cfg, "--eps-list", "0.1", "--threads", "2", "--out", b}), 0);
    // Thread count is part of the config hash but not of the numbers.
    EXPECT_EQ(slurp(output_dir() / "report.csv"), report);
    ASSERT_EQ(call({"sweep", "--config", cfg, "--eps-list", "0.1", "--out", a}), 0);
    EXPECT_EQ(output_dir(), da);
    EXPECT_EQ(slurp(da / "report.csv"), report);
}

TEST_F(Cli, SolverFailureExitsThree) {
    const std::string cfg = config("[problem]\np = 4\nepsilon = 0.2\n[functions]\nf = tanh_shifted\n"
                                   "[mesh]\ntarget_edge = 0.0625\n[solver]\nmax_iterations = 1\npicard_fallback = false\n");
    EXPECT_EQ(call({"solve-rough", "--config", cfg, "--out", (root_ / "res").string()}), 3);
    EXPECT_NE(err_.str().find("solver failure"), std::string::npos) << err_.str();
    EXPECT_TRUE(fs::exists(output_dir() / "diagnostics.csv"));
    EXPECT_TRUE(fs::exists(output_dir() / "best_iterate.vtk"));
}

TEST_F(Cli, HelpAndVersion) {
    EXPECT_EQ(call({"--help"}), 0);
    EXPECT_NE(out_.str().find("solve-rough"), std::string::npos);
    EXPECT_EQ(call({"--version"}), 0);
    EXPECT_EQ(out_.str(), std::string(ROUGHLAB_VERSION) + "\n");
}

TEST(CliCodes, Values) {
    using namespace roughlab::cli;
    EXPECT_EQ(Ok, 0);
    EXPECT_EQ(Failure, 1);
    EXPECT_EQ(InvalidConfig, 2);
    EXPECT_EQ(SolverFailed, 3);
}
