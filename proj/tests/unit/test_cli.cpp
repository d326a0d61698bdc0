#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    json out;
};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mwld_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

CliRun mwld(const std::string& args) {
    const fs::path out = scratch("out.json");
    fs::remove(out);
    const std::string cmd = std::string(MWLD_CLI) + " " + args + " --out " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(out)) r.out = json::parse(std::ifstream(out));
    return r;
}

}  // namespace

TEST(Cli, RateFnTimescale) {
    const CliRun r = mwld("ratefn --b 3,1 --t 10 --lambda 0.2 --mu 0.01");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out["t_star"], 2);
    EXPECT_EQ(r.out["J"]["t_star"], 2);
    EXPECT_EQ(r.out["config"]["source.lambda"], "0.2");
    EXPECT_EQ(r.out["config_digest"].get<std::string>().size(), 64u);
}

TEST(Cli, RateFnAtMean) {
    const CliRun r = mwld("ratefn --b mean --t 3");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(r.out["value"].get<double>(), 0.0, 1e-15);
}

TEST(Cli, MalformedConfigWritesNothing) {
    const fs::path cfg = scratch("bad.cfg");
    std::ofstream(cfg) << "source.lambda = 0.2\nnot a key value line\n";
    const CliRun r = mwld("ratefn --config " + cfg.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.is_null());
    EXPECT_EQ(mwld("ratefn --lambda abc").code, 2);
    EXPECT_EQ(mwld("ratefn --method simplex").code, 2);
    EXPECT_EQ(mwld("ratefn --unknown-flag 3").code, 2);
}

TEST(Cli, ConfigFileAndDigestRoundTrip) {
    const fs::path cfg = scratch("good.cfg");
    std::ofstream(cfg) << "source.lambda = 0.3\nrun.b = 2,1\n";
    const CliRun a = mwld("i2 --config " + cfg.string());
    ASSERT_EQ(a.code, 0);
    // Re-running from the emitted configuration gives the same digest.
    const fs::path echo = scratch("echo.cfg");
    {
        std::ofstream o(echo);
        for (const auto& [k, v] : a.out["config"].items()) o << k << " = " << v.get<std::string>() << "\n";
    }
    const CliRun b = mwld("i2 --config " + echo.string());
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out["config_digest"], b.out["config_digest"]);
    EXPECT_EQ(a.out["value"], b.out["value"]);
}

TEST(Cli, ResourceErrorExitCode) {
    EXPECT_EQ(mwld("oracle --b 3,3 --t 3 --oracle-delta 0.01").code, 3);
    EXPECT_EQ(mwld("ratefn --method grid-dp --delta 0.001 --t 3 --b 4,4").code, 3);
}

TEST(Cli, Bounds) {
    const CliRun r = mwld("bounds --b 3,1 --t 10 --lambda 0.1 --mu 0.01");
    ASSERT_EQ(r.code, 0);
    const double lo = r.out["lower"], hi = r.out["upper"];
    EXPECT_LE(lo, hi);
    EXPECT_LT((hi - lo) / hi, 0.01);
}

TEST(Cli, CompareCsv) {
    const fs::path csv = scratch("fig5.csv");
    const CliRun r = mwld("compare --grid 0:5:0.25 --t 2 --lambda 0.3 --csv " + csv.string());
    ASSERT_EQ(r.code, 0);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "b1,b2,mw,gps,prio");
    int rows = 0;
    bool far_cell_ok = false;
    while (std::getline(in, line)) {
        ++rows;
        double b1, b2, mw, gps, prio;
        ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &b1, &b2, &mw, &gps, &prio), 5);
        if (b1 == 5 && b2 == 0) far_cell_ok = mw >= gps - 1e-9;
    }
    EXPECT_EQ(rows, 21 * 21);
    EXPECT_TRUE(far_cell_ok);
}

TEST(Cli, MonteCarlo) {
    const CliRun r = mwld("mc --L 10 --B 0,0 --replicates 200");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out["estimates"][0]["p_hat"], 1.0);
    const fs::path csv = scratch("mc.csv");
    ASSERT_EQ(mwld("mc --L 5,10 --B 0.5 --source expinc --nu 2 --capacities 1 --replicates 500 --csv " +
                   csv.string())
                  .code,
              0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "L,T,B1,replicates,p_hat,ci_lo,ci_hi,decay");
}

TEST(Cli, Trajectory) {
    const CliRun r = mwld("trajectory --arrivals \"2.5,1;2.5,1\"");
    ASSERT_EQ(r.code, 0);
    const auto& w = r.out["workloads"];
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[2][0], 4.0);
    EXPECT_EQ(w[2][1], 2.0);
}

TEST(Cli, Oracle) {
    const CliRun r = mwld("oracle --b 4,2 --t 2 --lambda 0.3");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out["delta"], 0.02);
    EXPECT_EQ(r.out["argmin_path"].size(), 2u);
}

TEST(Cli, PolicyAndCapacities) {
    const CliRun g = mwld("ratefn --policy gps --gps-weights 2,1 --b 2,1 --t 3 --lambda 0.3");
    ASSERT_EQ(g.code, 0);
    EXPECT_TRUE(g.out["value"].get<double>() > 0);
    const CliRun c = mwld("ratefn --capacities 2,2 --b 4,2 --t 2 --source expinc --nu 1");
    ASSERT_EQ(c.code, 0);
    // Path comes back in physical units and reaches b.
    const auto& path = c.out["path"];
    EXPECT_EQ(path.size(), 2u);
}
