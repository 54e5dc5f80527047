// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "distsched/overhead.hpp"

using namespace distsched;

TEST(Overhead, StatsAreFilled) {
    OverheadConfig cfg;
    cfg.queue_len = 50;
    cfg.dist_points = 300;
    cfg.passes = 3;
    cfg.window_size = 2000;
    cfg.policy.kind = PolicyKind::Gittins;
    const auto s = measure_overhead(cfg);
    EXPECT_EQ(s.queue_len, 50);
    EXPECT_EQ(s.dist_points, 300);
    EXPECT_EQ(s.passes, 3);
    EXPECT_GT(s.mean_pass_ms, 0.0);
    EXPECT_GE(s.p99_pass_ms, s.mean_pass_ms * 0.999);
    EXPECT_NEAR(s.mean_per_request_us, s.mean_pass_ms * 1000.0 / 50.0, 1e-9);
    EXPECT_GT(s.mean_support_points, 100.0);
    EXPECT_LE(s.mean_support_points, 300.0);
}

TEST(Overhead, RejectsBadConfig) {
    OverheadConfig cfg;
    cfg.queue_len = 0;
    EXPECT_THROW(measure_overhead(cfg), PreconditionError);
    cfg.queue_len = 1;
    cfg.passes = 0;
    EXPECT_THROW(measure_overhead(cfg), PreconditionError);
    cfg.passes = 1;
    cfg.dist_points = 0;
    EXPECT_THROW(measure_overhead(cfg), PreconditionError);
}
