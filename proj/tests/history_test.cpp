// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <deque>
#include <filesystem>
#include <random>
#include <set>

#include "distsched/history.hpp"

using namespace distsched;

namespace {

Embedding random_embedding(std::mt19937_64& rng, std::size_t len, std::size_t dim = 256) {
    std::uniform_int_distribution<Token> tok(1, 50000);
    std::vector<Token> p(len);
    for (auto& t : p) t = tok(rng);
    EmbeddingConfig cfg;
    cfg.dim = dim;
    return embed(p, cfg);
}

// Clustered embeddings so that thresholds in (0, 1) select nontrivial sets.
std::vector<Embedding> clustered(std::mt19937_64& rng, std::size_t n, std::size_t dim = 256) {
    std::uniform_int_distribution<Token> tok(1, 50000);
    std::vector<std::vector<Token>> templates(8);
    for (auto& t : templates) {
        t.resize(30);
        for (auto& x : t) x = tok(rng);
    }
    std::vector<Embedding> out;
    EmbeddingConfig cfg;
    cfg.dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        auto p = templates[i % templates.size()];
        const std::size_t noise = 1 + i % 20;
        for (std::size_t k = 0; k < noise; ++k) p.push_back(tok(rng));
        out.push_back(embed(p, cfg));
    }
    return out;
}

}  // namespace

TEST(History, FifoEviction) {
    std::mt19937_64 rng(1);
    HistoryWindow w(2);
    w.push(random_embedding(rng, 5), 5, 1);
    w.push(random_embedding(rng, 5), 5, 2);
    w.push(random_embedding(rng, 5), 5, 3);
    auto recs = w.records();
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].realized_output_len, 2);
    EXPECT_EQ(recs[1].realized_output_len, 3);
}

TEST(History, PushToEmpty) {
    std::mt19937_64 rng(2);
    HistoryWindow w;
    w.push(random_embedding(rng, 3), 3, 7);
    EXPECT_EQ(w.size(), 1u);
}

TEST(History, DefaultCapacityTenThousand) {
    std::mt19937_64 rng(3);
    HistoryWindow w;
    const auto e = random_embedding(rng, 4);
    for (int i = 0; i < 10001; ++i) w.push(e, 4, 1 + i);
    EXPECT_EQ(w.size(), 10000u);
    EXPECT_EQ(w.length_counts().count(1), 0u);
    EXPECT_EQ(w.records().front().insertion_seq, 1u);
}

TEST(History, MatchesReferenceRingModel) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> cap(1, 40);
    std::uniform_int_distribution<int> len(1, 30);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = cap(rng);
        HistoryWindow w(c, 32);
        std::deque<std::pair<std::uint64_t, std::int64_t>> model;
        const int pushes = static_cast<int>(c) * 3 + trial;
        for (int i = 0; i < pushes; ++i) {
            const int out = len(rng);
            const auto seq = w.push(random_embedding(rng, 3, 32), 3, out);
            model.emplace_back(seq, out);
            if (model.size() > c) model.pop_front();
            auto recs = w.records();
            ASSERT_EQ(recs.size(), model.size());
            for (std::size_t k = 0; k < recs.size(); ++k) {
                EXPECT_EQ(recs[k].insertion_seq, model[k].first);
                EXPECT_EQ(recs[k].realized_output_len, model[k].second);
            }
        }
        std::map<std::int64_t, std::int64_t> counts;
        for (auto& [s, o] : model) ++counts[o];
        EXPECT_EQ(w.length_counts(), counts);
    }
}

TEST(History, RejectsInvalidRecords) {
    std::mt19937_64 rng(5);
    HistoryWindow w(4);
    EXPECT_THROW(w.push(random_embedding(rng, 3), 3, 0), PreconditionError);
    EXPECT_THROW(w.push(Embedding(std::vector<std::int8_t>(256, 0)), 3, 1), PreconditionError);
    EXPECT_THROW(w.push(random_embedding(rng, 3, 64), 3, 1), PreconditionError);
    w.push(HistoryRecord{random_embedding(rng, 3), 3, 1, 10});
    EXPECT_THROW(w.push(HistoryRecord{random_embedding(rng, 3), 3, 1, 10}), PreconditionError);
}

TEST(History, SelfIsFirstMatch) {
    std::mt19937_64 rng(6);
    HistoryWindow w;
    for (int i = 0; i < 50; ++i) w.push(random_embedding(rng, 20), 20, 5);
    const auto q = random_embedding(rng, 20);
    const auto seq = w.push(q, 20, 9);
    auto res = w.query_similar(q, 0.8);
    ASSERT_FALSE(res.empty());
    EXPECT_EQ(res[0].record->insertion_seq, seq);
    EXPECT_NEAR(res[0].similarity, 1.0, 1e-12);
}

TEST(History, ThresholdOutOfRange) {
    std::mt19937_64 rng(7);
    HistoryWindow w;
    const auto q = random_embedding(rng, 5);
    EXPECT_THROW(w.query_similar(q, 1.0 + 1e-9), PreconditionError);
    EXPECT_THROW(w.query_similar(q, -1.0 - 1e-9), PreconditionError);
    EXPECT_THROW(w.query_similar(Embedding(std::vector<std::int8_t>(256, 0)), 2.0), PreconditionError);
}

TEST(History, DegenerateQueryIsFlagged) {
    std::mt19937_64 rng(8);
    HistoryWindow w;
    w.push(random_embedding(rng, 5), 5, 1);
    RunLog log;
    EXPECT_TRUE(w.query_similar(Embedding(std::vector<std::int8_t>(256, 0)), 0.5, &log).empty());
    EXPECT_EQ(log.degenerate_queries, 1u);
}

TEST(History, ThetaMinusOneReturnsAll) {
    std::mt19937_64 rng(9);
    HistoryWindow w(100);
    for (int i = 0; i < 250; ++i) w.push(random_embedding(rng, 10), 10, 1 + i);
    EXPECT_EQ(w.query_similar(random_embedding(rng, 10), -1.0).size(), 100u);
}

TEST(History, MatchesBruteForceAndPortableKernel) {
    std::mt19937_64 rng(10);
    for (std::size_t dim : {256u, 64u, 30u}) {
        HistoryWindow w(777, dim);
        auto embs = clustered(rng, 1500, dim);
        for (std::size_t i = 0; i < 1000; ++i) w.push(embs[i], 10, 1 + static_cast<std::int64_t>(i % 50));
        std::vector<const Embedding*> qs;
        for (std::size_t i = 1000; i < 1013; ++i) qs.push_back(&embs[i]);
        for (double theta : {-0.2, 0.0, 0.3, 0.6, 0.8, 0.95}) {
            std::vector<std::set<std::uint64_t>> fast(qs.size()), slow(qs.size()), brute(qs.size());
            w.scan_similar(qs, theta, [&](std::size_t qi, const HistoryRecord& r, double) { fast[qi].insert(r.insertion_seq); });
            w.scan_similar_portable(qs, theta,
                                    [&](std::size_t qi, const HistoryRecord& r, double) { slow[qi].insert(r.insertion_seq); });
            w.for_each([&](const HistoryRecord& r) {
                for (std::size_t qi = 0; qi < qs.size(); ++qi) {
                    if (cosine(*qs[qi], r.embedding) >= theta) brute[qi].insert(r.insertion_seq);
                }
            });
            EXPECT_EQ(fast, brute) << "dim " << dim << " theta " << theta;
            EXPECT_EQ(slow, brute) << "dim " << dim << " theta " << theta;
        }
    }
}

TEST(History, OrderingDescendingThenNewer) {
    std::mt19937_64 rng(11);
    HistoryWindow w;
    const auto a = random_embedding(rng, 8);
    auto embs = clustered(rng, 200);
    w.push(a, 8, 1);
    for (auto& e : embs) w.push(e, 8, 2);
    w.push(a, 8, 3);
    auto res = w.query_similar(a, -1.0);
    ASSERT_GE(res.size(), 2u);
    EXPECT_EQ(res[0].record->realized_output_len, 3);
    EXPECT_EQ(res[1].record->realized_output_len, 1);
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_GE(res[i - 1].similarity, res[i].similarity);
}

TEST(History, FullWindowQueryIsFast) {
    std::mt19937_64 rng(12);
    HistoryWindow w;
    for (auto& e : clustered(rng, 10000)) w.push(e, 30, 10);
    const auto q = random_embedding(rng, 40);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 20; ++i) (void)w.query_similar(q, 0.8);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 20;
    EXPECT_LT(ms, 1.0);
}

TEST(History, InputLengthScan) {
    std::mt19937_64 rng(13);
    HistoryWindow w;
    for (int len : {90, 100, 110, 111, 89}) w.push(random_embedding(rng, 5), len, 1);
    int hits = 0;
    w.scan_input_length(100, 0.1, [&](const HistoryRecord&) { ++hits; });
    EXPECT_EQ(hits, 3);
}

TEST(History, SnapshotRoundTrip) {
    std::mt19937_64 rng(14);
    HistoryWindow w(5);
    for (int i = 0; i < 8; ++i) w.push(random_embedding(rng, 6), 6 + i, 1 + i);
    const auto path = std::filesystem::temp_directory_path() / "distsched_snapshot.jsonl";
    save_snapshot(w, path);
    auto back = load_snapshot(path, 5, 256);
    auto a = w.records();
    auto b = back.records();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].embedding, b[i].embedding);
        EXPECT_EQ(a[i].insertion_seq, b[i].insertion_seq);
        EXPECT_EQ(a[i].input_len, b[i].input_len);
        EXPECT_EQ(a[i].realized_output_len, b[i].realized_output_len);
    }
    std::filesystem::remove(path);
}
