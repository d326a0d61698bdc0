#include <gtest/gtest.h>

#include "mwld/oracle.hpp"
#include "mwld/region.hpp"

using namespace mwld;

namespace {

bool has(const std::vector<Vec>& set, const Vec& v) {
    for (const Vec& s : set) {
        if ((s - v).cwiseAbs().maxCoeff() < 1e-12) return true;
    }
    return false;
}

}  // namespace

TEST(Region, ContainsSimplex) {
    const RateRegion unit = RateRegion::unit_simplex(2);
    EXPECT_TRUE(contains(unit, make_vec({0.5, 0.5})));
    EXPECT_FALSE(contains(unit, make_vec({2, 1})));
    EXPECT_TRUE(contains(RateRegion::simplex(make_vec({1, 2})), make_vec({0.5, 1.0})));
    EXPECT_FALSE(contains(unit, make_vec({-0.1, 0.2})));
    EXPECT_THROW(contains(unit, make_vec({0.1, 0.1, 0.1})), DimensionError);
}

TEST(Region, NormalizedSum) {
    EXPECT_DOUBLE_EQ(normalized_sum(RateRegion::unit_simplex(2), make_vec({3, 1})), 4.0);
    EXPECT_DOUBLE_EQ(normalized_sum(RateRegion::simplex(make_vec({2, 4})), make_vec({1, 2})), 1.0);
    EXPECT_DOUBLE_EQ(normalized_sum(RateRegion::unit_simplex(2), make_vec({0, 0})), 0.0);
    const RateRegion poly = RateRegion::polytope({make_vec({1, 0}), make_vec({0, 1}), make_vec({0.7, 0.7})});
    EXPECT_THROW(normalized_sum(poly, make_vec({1, 1})), UnsupportedRegion);
}

TEST(Region, BadRegions) {
    EXPECT_THROW(RateRegion::simplex(make_vec({1, 0})), DomainError);
    EXPECT_THROW(RateRegion::simplex(make_vec({1, -2})), DomainError);
    EXPECT_THROW(RateRegion::polytope({}), DimensionError);
    EXPECT_THROW(RateRegion::polytope({make_vec({1, 0}), make_vec({1})}), DimensionError);
}

TEST(Region, ProjectionInsideIsIdentity) {
    const Vec p = project(RateRegion::unit_simplex(2), make_vec({0.3, 0.2}));
    EXPECT_NEAR(p[0], 0.3, 1e-15);
    EXPECT_NEAR(p[1], 0.2, 1e-15);
    // Sum below one, so already inside.
    const Vec q = project(RateRegion::unit_simplex(2), make_vec({0.95, 0.01}));
    EXPECT_NEAR(q[0], 0.95, 1e-15);
    EXPECT_NEAR(q[1], 0.01, 1e-15);
}

// Grid-search values frozen from brute_force_projection at delta = 0.001.
TEST(Region, ProjectionMatchesGridSearch) {
    const RateRegion unit = RateRegion::unit_simplex(2);
    struct Case {
        Vec w, expected;
    };
    const std::vector<Case> cases = {{make_vec({0.9, 0.5}), make_vec({0.7, 0.3})},
                                     {make_vec({2, 2}), make_vec({0.5, 0.5})},
                                     {make_vec({0.95, 0.01}), make_vec({0.95, 0.01})},
                                     {make_vec({3, 0.2}), make_vec({1.0, 0.0})}};
    for (const Case& c : cases) {
        const Vec p = project(unit, c.w);
        EXPECT_NEAR(p[0], c.expected[0], 1e-12);
        EXPECT_NEAR(p[1], c.expected[1], 1e-12);
    }
}

TEST(Region, ProjectionAgreesWithGridOnRandomPoints) {
    const RateRegion r = RateRegion::simplex(make_vec({1, 2}));
    for (const Vec& w : {make_vec({0.8, 1.9}), make_vec({1.5, 0.3}), make_vec({0.1, 2.6})}) {
        const Vec p = project(r, w);
        const Vec g = brute_force_projection(r, w, 0.002);
        EXPECT_LE((p - g).cwiseAbs().maxCoeff(), 0.004);
        EXPECT_LE((p - w).norm(), (g - w).norm() + 1e-12);
    }
}

TEST(Region, PolytopeProjection) {
    const RateRegion poly = RateRegion::polytope({make_vec({1, 0}), make_vec({0, 1}), make_vec({0.7, 0.7})});
    EXPECT_TRUE(contains(poly, make_vec({0.6, 0.6})));
    EXPECT_FALSE(contains(poly, make_vec({0.8, 0.8})));
    const Vec p = project(poly, make_vec({2, 2}));
    EXPECT_NEAR(p[0], 0.7, 1e-6);
    EXPECT_NEAR(p[1], 0.7, 1e-6);
}

TEST(Region, MaxWeightSet) {
    const RateRegion unit = RateRegion::unit_simplex(2);
    auto s = max_weight_set(unit, make_vec({2, 1}));
    ASSERT_EQ(s.size(), 1u);
    EXPECT_TRUE(has(s, make_vec({1, 0})));

    s = max_weight_set(unit, make_vec({1, 1}));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_TRUE(has(s, make_vec({1, 0})));
    EXPECT_TRUE(has(s, make_vec({0, 1})));

    s = max_weight_set(RateRegion::simplex(make_vec({1, 2})), make_vec({2, 1}));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_TRUE(has(s, make_vec({1, 0})));
    EXPECT_TRUE(has(s, make_vec({0, 2})));
}
