// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "distsched/cost.hpp"

using namespace distsched;

TEST(Cost, FormulaValues) {
    EXPECT_EQ(cost(CostKind::ResourceBound, 100, 200), 40000.0);
    EXPECT_EQ(cost(CostKind::OutputOnly, 5000, 10), 10.0);
    EXPECT_EQ(cost(CostModel{CostKind::WeightedSum, 1, 2}, 100, 50), 200.0);
    EXPECT_EQ(cost(CostKind::ResourceBound, 7, 0), 0.0);
    EXPECT_EQ(cost(CostKind::OutputOnly, 7, 0), 0.0);
}

TEST(Cost, RejectsNegativeInputs) {
    EXPECT_THROW(cost(CostKind::ResourceBound, 0, 5), PreconditionError);
    EXPECT_THROW(cost(CostKind::ResourceBound, 5, -1), PreconditionError);
}

TEST(Cost, RemainingValues) {
    const CostModel rb{CostKind::ResourceBound};
    EXPECT_EQ(remaining_cost(rb, 100, 200, 200), 0.0);
    EXPECT_EQ(remaining_cost(rb, 100, 200, 0), 40000.0);
    EXPECT_EQ(remaining_cost(rb, 100, 200, 100), 25000.0);
    EXPECT_THROW(remaining_cost(rb, 100, 200, 201), PreconditionError);
}

TEST(Cost, RemainingVersusDiscreteSum) {
    // Closed form differs from the discrete sum of l over (I+o, I+O] by O(O).
    double discrete = 0.0;
    for (int l = 201; l <= 300; ++l) discrete += l;
    EXPECT_NEAR(remaining_cost(CostModel{}, 100, 200, 100), discrete, 100.0);
}

TEST(Cost, RemainingPlusAttainedIsExact) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> in(1, 8000), out(0, 4000);
    for (auto kind : {CostKind::ResourceBound, CostKind::OutputOnly, CostKind::WeightedSum}) {
        const CostModel m{kind};
        for (int t = 0; t < 10000; ++t) {
            const double i = in(rng);
            const double o_total = out(rng);
            const double o = std::uniform_int_distribution<int>(0, static_cast<int>(o_total))(rng);
            EXPECT_EQ(remaining_cost(m, i, o_total, o) + cost(m, i, o), cost(m, i, o_total));
        }
    }
}

TEST(Cost, StrictlyIncreasingInOutput) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> in(1, 8000), out(0, 4000);
    for (auto kind : {CostKind::ResourceBound, CostKind::OutputOnly, CostKind::WeightedSum}) {
        for (int t = 0; t < 2000; ++t) {
            const double i = in(rng);
            const double o = out(rng);
            EXPECT_LT(cost(kind, i, o), cost(kind, i, o + 1));
        }
    }
}

TEST(Cost, OrderInversionUnderResourceBound) {
    EXPECT_LT(cost(CostKind::OutputOnly, 5000, 10), cost(CostKind::OutputOnly, 10, 50));
    EXPECT_EQ(cost(CostKind::ResourceBound, 5000, 10), 50050.0);
    EXPECT_EQ(cost(CostKind::ResourceBound, 10, 50), 1750.0);
}

TEST(CostDistribution, Pushforward) {
    auto d = cost_distribution(CostModel{}, 100, DiscreteDistribution({100, 300}, {0.5, 0.5}));
    EXPECT_EQ(d, DiscreteDistribution({15000, 75000}, {0.5, 0.5}));
    EXPECT_EQ(cost_distribution(CostModel{}, 3, DiscreteDistribution::point(4)).size(), 1u);
    auto lens = DiscreteDistribution({1, 5, 9}, {0.2, 0.3, 0.5});
    auto oo = cost_distribution(CostModel{CostKind::OutputOnly}, 50, lens);
    EXPECT_EQ(oo, lens);
    EXPECT_NEAR(oo.total_mass(), 1.0, 1e-9);
}

TEST(Cost, KindNamesRoundTrip) {
    for (auto k : {CostKind::ResourceBound, CostKind::OutputOnly, CostKind::WeightedSum}) {
        EXPECT_EQ(parse_cost_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_cost_kind("bogus"), ConfigError);
    EXPECT_THROW(validate(CostModel{CostKind::WeightedSum, 0, 2}), ConfigError);
}
