#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "mwld/oracle.hpp"
#include "mwld/ratefn.hpp"

using namespace mwld;
namespace fs = std::filesystem;

namespace {

SourceModel cpe(double lambda, double mu = 0.01) {
    return SourceModel::identical(QueueSource(CompoundPoissonExp{lambda, mu}), 2);
}

Vec to_vec(const nlohmann::json& a) {
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

std::vector<fs::path> golden_files() {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(MWLD_GOLDEN_DIR)) {
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Oracle, GoldenFilesReproduceAndMatchExactEngine) {
    const auto files = golden_files();
    ASSERT_GE(files.size(), 16u);
    for (const fs::path& f : files) {
        SCOPED_TRACE(f.filename().string());
        const auto g = nlohmann::json::parse(std::ifstream(f));
        const SourceModel m = cpe(g["source"]["lambda"].get<double>(), g["source"]["mu"].get<double>());
        const Vec b = to_vec(g["instance"]["b"]);
        const auto t = g["instance"]["t"].get<Eigen::Index>();
        OracleConfig oc;
        oc.delta = g["delta"].get<double>();
        const OracleResult r = brute_force_it(m, b, t, oc);
        const double frozen = g["value"].get<double>();
        EXPECT_NEAR(r.value, frozen, 1e-15);
        // The stored argmin path reaches b under the policy and costs the stored value.
        Mat path(2, t);
        const auto& slots = g["argmin_path"];
        for (Eigen::Index s = 0; s < t; ++s) path.col(t - 1 - s) = to_vec(slots[static_cast<std::size_t>(s)]);
        EXPECT_NEAR(path_cost(m, ArrivalPath(path)), frozen, 1e-12);
        const double exact = it_exact(m, b, t).value;
        EXPECT_LE(std::abs(exact - frozen), oracle_slack(m, b, t, oc));
        // Grid paths are feasible up to the terminal tolerance only, so the
        // oracle may undercut the exact value by at most the slack.
        EXPECT_LE(exact, frozen + oracle_slack(m, b, t, oc));
    }
}

TEST(Oracle, SingleSlotMatchesOneSlotCost) {
    const SourceModel m = cpe(0.3);
    OracleConfig oc;
    for (const Vec& b : {make_vec({0.31, 0.77}), make_vec({2, 1})}) {
        const OracleResult r = brute_force_it(m, b, 1, oc);
        EXPECT_NEAR(r.value, one_slot_cost(m, b), oracle_slack(m, b, 1, oc));
    }
}

TEST(Oracle, UnreachableTargetIsInfinite) {
    OracleConfig oc;
    oc.max_coordinate = 1.0;
    EXPECT_EQ(brute_force_it(cpe(0.2), make_vec({3, 0}), 1, oc).value, kInf);
}

TEST(Oracle, Budget) {
    OracleConfig oc;
    oc.delta = 0.01;
    EXPECT_THROW(brute_force_it(cpe(0.2), make_vec({3, 3}), 3, oc), ResourceError);
    EXPECT_THROW(brute_force_it(cpe(0.2), make_vec({1, 1}), 4, oc), DomainError);
}

TEST(Oracle, HalvingStepStaysWithinSlack) {
    const SourceModel m = cpe(0.3);
    const Vec b = make_vec({2, 1});
    OracleConfig coarse, fine;
    coarse.delta = 0.1;
    fine.delta = 0.05;
    const double vc = brute_force_it(m, b, 2, coarse).value;
    const double vf = brute_force_it(m, b, 2, fine).value;
    EXPECT_LE(vf, vc + oracle_slack(m, b, 2, coarse));
}

TEST(Oracle, GridProjection) {
    const RateRegion unit = RateRegion::unit_simplex(2);
    Vec p = brute_force_projection(unit, make_vec({0.9, 0.5}), 0.001);
    EXPECT_NEAR(p[0], 0.7, 1e-9);
    EXPECT_NEAR(p[1], 0.3, 1e-9);
    p = brute_force_projection(unit, make_vec({2, 2}), 0.001);
    EXPECT_NEAR(p[0], 0.5, 1e-9);
    EXPECT_NEAR(p[1], 0.5, 1e-9);
    p = brute_force_projection(unit, make_vec({0.3, 0.2}), 0.1);
    EXPECT_NEAR(p[0], 0.3, 1e-9);
    EXPECT_NEAR(p[1], 0.2, 1e-9);
}
