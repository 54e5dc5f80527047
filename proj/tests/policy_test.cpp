// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "distsched/policy.hpp"

using namespace distsched;

namespace {

Request req(std::uint64_t id, double arrival, std::int64_t input, std::int64_t out) {
    Request r;
    r.id = id;
    r.arrival_time = arrival;
    r.prompt_tokens.assign(static_cast<std::size_t>(input), 1);
    r.input_len = input;
    r.true_output_len = out;
    return r;
}

// Reference MLFQ: level from total served tokens by cumulative quanta.
int reference_level(const MlfqConfig& cfg, std::int64_t served) {
    std::int64_t boundary = 0;
    std::int64_t q = cfg.q0;
    for (int level = 0; level < cfg.n_levels - 1; ++level) {
        boundary += q;
        if (served < boundary) return level;
        q *= cfg.demotion_factor;
    }
    return cfg.n_levels - 1;
}

}  // namespace

TEST(Policy, FcfsOrdersByArrival) {
    PolicyConfig cfg{PolicyKind::FCFS, {}};
    auto a = priority(cfg, req(1, 1.0, 5, 5), {}, nullptr, CostModel{});
    auto b = priority(cfg, req(0, 2.0, 5, 5), {}, nullptr, CostModel{});
    EXPECT_LT(a, b);
}

TEST(Policy, GittinsPrefersBimodalMeanTies) {
    const CostModel oo{CostKind::OutputOnly};
    GittinsConfig g;
    auto bimodal = make_prediction_state(oo, g, 1, DiscreteDistribution({1, 9}, {0.5, 0.5}));
    auto fixed = make_prediction_state(oo, g, 1, DiscreteDistribution::point(5));
    const auto r1 = req(1, 1.0, 1, 9);
    const auto r0 = req(0, 0.5, 1, 5);
    PolicyConfig gittins{PolicyKind::Gittins, {}};
    auto pb = priority(gittins, r1, {}, &bimodal, oo);
    auto pf = priority(gittins, r0, {}, &fixed, oo);
    EXPECT_EQ(pb.primary, 2.0);
    EXPECT_EQ(pf.primary, 5.0);
    EXPECT_LT(pb, pf);
    PolicyConfig mean{PolicyKind::Mean, {}};
    auto mb = priority(mean, r1, {}, &bimodal, oo);
    auto mf = priority(mean, r0, {}, &fixed, oo);
    EXPECT_EQ(mb.primary, mf.primary);
    EXPECT_LT(mf, mb);  // tie broken by arrival
}

TEST(Policy, MlfqDemotion) {
    MlfqConfig cfg;
    MlfqState s;
    for (int i = 0; i < 63; ++i) s = mlfq_on_token(cfg, s);
    EXPECT_EQ(s.level, 0);
    s = mlfq_on_token(cfg, s);
    EXPECT_EQ(s.level, 1);
    EXPECT_EQ(mlfq_quantum(cfg, 1), 128);
}

TEST(Policy, MlfqMatchesReference) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        MlfqConfig cfg{std::uniform_int_distribution<std::int64_t>(1, 20)(rng), std::uniform_int_distribution<int>(2, 6)(rng),
                       std::uniform_int_distribution<std::int64_t>(2, 4)(rng)};
        MlfqState s;
        for (std::int64_t served = 1; served < 5000; ++served) {
            s = mlfq_on_token(cfg, s);
            ASSERT_EQ(s.level, reference_level(cfg, served));
        }
    }
}

TEST(Policy, MissingPredictionIsSchedulingError) {
    for (auto k : {PolicyKind::SJFPoint, PolicyKind::Mean, PolicyKind::Gittins, PolicyKind::GittinsNoRefresh}) {
        try {
            priority(PolicyConfig{k, {}}, req(42, 0, 3, 3), {}, nullptr, CostModel{});
            FAIL();
        } catch (const SchedulingError& e) {
            EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
        }
    }
}

TEST(Policy, OneShotGittinsEqualsSrptOnPointPredictions) {
    std::mt19937_64 rng(4);
    const CostModel rb{};
    GittinsConfig g;
    for (int t = 0; t < 500; ++t) {
        const std::int64_t in = std::uniform_int_distribution<std::int64_t>(1, 500)(rng);
        const std::int64_t out = std::uniform_int_distribution<std::int64_t>(1, 1000)(rng);
        const std::int64_t served = std::uniform_int_distribution<std::int64_t>(0, out - 1)(rng);
        const auto r = req(1, 0, in, out);
        auto pred = make_prediction_state(rb, g, static_cast<double>(in), DiscreteDistribution::point(static_cast<double>(out)));
        ServiceProgress prog{served, attained_cost(rb, static_cast<double>(in), static_cast<double>(served)), bucket_of(served, 200)};
        const double gi = priority(PolicyConfig{PolicyKind::Gittins, {}}, r, prog, &pred, rb).primary;
        const double srpt = priority(PolicyConfig{PolicyKind::SRPTOracle, {}}, r, prog, &pred, rb).primary;
        EXPECT_NEAR(gi, srpt, 1e-9 * srpt);
    }
}

TEST(Policy, ScaleInvariantOrder) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::pair<double, double>> a, b;
        for (int k = 0; k < 4; ++k) {
            a.emplace_back(std::uniform_int_distribution<int>(1, 1000)(rng), 1.0);
            b.emplace_back(std::uniform_int_distribution<int>(1, 1000)(rng), 1.0);
        }
        auto da = DiscreteDistribution::from_weights(a);
        auto db = DiscreteDistribution::from_weights(b);
        const bool before = gittins_index(da) < gittins_index(db);
        const bool after = gittins_index(da.scaled(37.5)) < gittins_index(db.scaled(37.5));
        EXPECT_EQ(before, after);
    }
}

TEST(Policy, NamesRoundTripAndValidation) {
    for (auto k : {PolicyKind::FCFS, PolicyKind::MLFQ, PolicyKind::SJFPoint, PolicyKind::Mean, PolicyKind::Gittins,
                   PolicyKind::GittinsNoRefresh, PolicyKind::SRPTOracle}) {
        EXPECT_EQ(parse_policy_kind(to_string(k)), k);
    }
    PolicyConfig cfg;
    cfg.mlfq.n_levels = 1;
    EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(PredictionState, LargeLawsAreStoredAsCoarsenedCost) {
    const CostModel rb{};
    GittinsConfig small;
    small.max_support_points = 64;
    GittinsConfig large;
    auto lengths = DiscreteDistribution::uniform_integers(1, 1000);
    const auto coarse = make_prediction_state(rb, small, 50, lengths);
    const auto full = make_prediction_state(rb, large, 50, lengths);
    EXPECT_TRUE(coarse.cost_units);
    EXPECT_FALSE(full.cost_units);
    EXPECT_EQ(coarse.law.size(), 64u);
    EXPECT_EQ(full.cost_law(rb, 50), cost_distribution(rb, 50, lengths));
    const auto coarse_law = coarsen(cost_distribution(rb, 50, lengths), 64);
    EXPECT_EQ(coarse.law, coarse_law);
    for (std::int64_t g : {0, 100, 500, 990}) {
        const auto r = remaining_cost_distribution(rb, 50, g, coarse_law, coarse.bucket_size_tokens);
        EXPECT_NEAR(remaining_gittins(rb, 50, g, coarse), gittins_index(r), 1e-9 * r.mean());
        EXPECT_NEAR(remaining_mean(rb, 50, g, coarse), r.mean(), 1e-9 * r.mean());
    }
}
