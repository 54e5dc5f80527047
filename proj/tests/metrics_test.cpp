// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "distsched/metrics.hpp"

using namespace distsched;

namespace {

MetricsRow row(std::uint64_t seed, std::uint64_t id, double arrival, double ttft, double ttlt, std::int64_t out) {
    MetricsRow r;
    r.seed = seed;
    r.id = id;
    r.arrival = arrival;
    r.ttft = ttft;
    r.ttlt = ttlt;
    r.input_len = 10;
    r.output_len = out;
    return r;
}

std::vector<MetricsRow> random_rows(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<MetricsRow> rows;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t += u(rng);
        const double ttft = u(rng);
        auto r = row(seed, i, t, ttft, ttft + 5.0 * u(rng), 1 + static_cast<std::int64_t>(rng() % 500));
        r.preemptions = static_cast<std::int64_t>(rng() % 3);
        r.fallback_used = rng() % 4 == 0;
        r.prediction_tv = u(rng);
        if (i % 17 == 5) r.ttft = r.ttlt = std::numeric_limits<double>::quiet_NaN();
        if (i % 11 == 0) r.cluster_id = static_cast<std::int32_t>(i % 3);
        rows.push_back(r);
    }
    return rows;
}

// Independent order-statistic oracle: nearest ranks blended linearly.
double oracle_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const double lo = v[static_cast<std::size_t>(h)];
    const double hi = v[std::min(v.size() - 1, static_cast<std::size_t>(h) + 1)];
    return lo + (h - std::floor(h)) * (hi - lo);
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) / 3.0;
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_TRUE(std::isnan(parse_double("nan")));
    EXPECT_EQ(parse_double("inf"), std::numeric_limits<double>::infinity());
    EXPECT_THROW(parse_double("1.5x"), FormatError);
}

TEST(Aggregate, HandValues) {
    std::vector<MetricsRow> rows{row(1, 0, 0.0, 1.0, 2.0, 4), row(1, 1, 1.0, 1.0, 4.0, 2), row(1, 2, 2.0, 2.0, 6.0, 3)};
    rows[1].preemptions = 2;
    rows[2].fallback_used = true;
    const auto a = aggregate(rows);
    EXPECT_EQ(a.requests, 3);
    EXPECT_EQ(a.completed, 3);
    EXPECT_DOUBLE_EQ(a.mean_ttlt, 4.0);
    EXPECT_DOUBLE_EQ(a.median_ttlt, 4.0);
    EXPECT_DOUBLE_EQ(a.mean_ttft, 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(a.mean_tpot, (0.5 + 2.0 + 2.0) / 3.0);
    EXPECT_DOUBLE_EQ(a.throughput, 3.0 / 8.0);  // last completion at 2 + 6
    EXPECT_EQ(a.preemptions, 2);
    EXPECT_DOUBLE_EQ(a.fallback_rate, 1.0 / 3.0);
    EXPECT_TRUE(std::isnan(a.mean_prediction_tv));
}

TEST(Aggregate, IncompleteRowsAreCountedButNotTimed) {
    std::vector<MetricsRow> rows{row(1, 0, 0.0, 1.0, 3.0, 4), row(1, 1, 0.5, std::nan(""), std::nan(""), 2)};
    const auto a = aggregate(rows);
    EXPECT_EQ(a.requests, 2);
    EXPECT_EQ(a.completed, 1);
    EXPECT_DOUBLE_EQ(a.mean_ttlt, 3.0);
}

TEST(Aggregate, PooledEqualsIndependentRecomputation) {
    std::vector<MetricsRow> pooled;
    double span_total = 0.0;
    for (std::uint64_t seed : {3, 4, 5}) {
        auto rows = random_rows(seed, 300);
        double first = rows.front().arrival, last = first;
        for (const auto& r : rows) {
            first = std::min(first, r.arrival);
            if (!std::isnan(r.ttlt)) last = std::max(last, r.arrival + r.ttlt);
        }
        span_total += last - first;
        pooled.insert(pooled.end(), rows.begin(), rows.end());
    }
    std::vector<double> ttft, ttlt;
    double tv = 0.0, tpot = 0.0;
    std::int64_t pre = 0, fb = 0;
    for (const auto& r : pooled) {
        pre += r.preemptions;
        fb += r.fallback_used;
        tv += r.prediction_tv;
        if (std::isnan(r.ttlt)) continue;
        ttft.push_back(r.ttft);
        ttlt.push_back(r.ttlt);
        tpot += r.ttlt / static_cast<double>(r.output_len);
    }
    const auto a = aggregate(pooled);
    const double n = static_cast<double>(ttlt.size());
    EXPECT_EQ(a.completed, static_cast<std::int64_t>(ttlt.size()));
    double s = 0.0;
    for (double v : ttlt) s += v;
    EXPECT_NEAR(a.mean_ttlt, s / n, 1e-12);
    EXPECT_NEAR(a.mean_tpot, tpot / n, 1e-12);
    for (double q : {0.5, 0.95, 0.99}) EXPECT_NEAR(percentile(ttlt, q), oracle_percentile(ttlt, q), 1e-12);
    EXPECT_NEAR(a.p95_ttft, oracle_percentile(ttft, 0.95), 1e-12);
    EXPECT_NEAR(a.p99_ttlt, oracle_percentile(ttlt, 0.99), 1e-12);
    EXPECT_NEAR(a.throughput, n / span_total, 1e-12);
    EXPECT_EQ(a.preemptions, pre);
    EXPECT_NEAR(a.fallback_rate, static_cast<double>(fb) / 900.0, 1e-15);
    EXPECT_NEAR(a.mean_prediction_tv, tv / 900.0, 1e-12);
    for (const auto& r : pooled) {
        if (r.completed()) EXPECT_LE(r.ttft, r.ttlt);
    }
}

TEST(RowsCsv, RoundTripsExactly) {
    const auto rows = random_rows(9, 200);
    std::ostringstream out;
    write_rows_csv(out, {{"scenario", "x"}, {"seed", "9"}}, rows);
    const std::string text = out.str();
    EXPECT_EQ(text.rfind("# distsched schema=", 0), 0u);
    EXPECT_NE(text.find("# scenario = x\n"), std::string::npos);
    std::istringstream in(text);
    const auto back = read_rows_csv(in);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].id, rows[i].id);
        EXPECT_EQ(back[i].cluster_id, rows[i].cluster_id);
        EXPECT_EQ(back[i].arrival, rows[i].arrival);
        EXPECT_EQ(back[i].completed(), rows[i].completed());
        if (rows[i].completed()) EXPECT_EQ(back[i].ttlt, rows[i].ttlt);
        EXPECT_EQ(back[i].output_len, rows[i].output_len);
        EXPECT_EQ(back[i].fallback_used, rows[i].fallback_used);
        EXPECT_EQ(back[i].prediction_tv, rows[i].prediction_tv);
    }
    std::ostringstream again;
    write_rows_csv(again, {{"scenario", "x"}, {"seed", "9"}}, back);
    EXPECT_EQ(again.str(), text);
}

TEST(RowsCsv, RejectsMalformed) {
    std::istringstream bad_header("a,b,c\n");
    EXPECT_THROW(read_rows_csv(bad_header), FormatError);
    std::istringstream short_row(std::string(kRowColumns) + "\n1,2,3\n");
    try {
        read_rows_csv(short_row);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(SignTest, BinomialTail) {
    std::vector<double> a(20, 1.0), b(20, 2.0);
    EXPECT_NEAR(sign_test_less(a, b).p_value, std::ldexp(1.0, -20), 1e-18);
    for (int i = 0; i < 5; ++i) a[static_cast<std::size_t>(i)] = 3.0;
    const auto t = sign_test_less(a, b);
    EXPECT_EQ(t.wins, 15);
    EXPECT_EQ(t.losses, 5);
    EXPECT_NEAR(t.p_value, 21700.0 / 1048576.0, 1e-12);  // sum_{k>=15} C(20,k) / 2^20
    a[0] = 2.0;
    EXPECT_EQ(sign_test_less(a, b).ties, 1);
}
