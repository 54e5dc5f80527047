// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "distsched/embedding.hpp"
#include "distsched/history.hpp"
#include "distsched/policy.hpp"
#include "distsched/predictor.hpp"
#include "distsched/stats.hpp"
#include "distsched/workload.hpp"

namespace distsched {

struct OverheadConfig {
    std::int64_t queue_len = 1000;
    std::int64_t dist_points = 4096;
    int passes = 10;
    std::uint64_t seed = 1;
    std::size_t window_size = HistoryWindow::kDefaultCapacity;
    PredictorConfig predictor;
    PolicyConfig policy;
    CostModel cost;
    GittinsConfig gittins;
    EmbeddingConfig embedding;
};

struct OverheadStats {
    std::int64_t queue_len = 0;
    std::int64_t dist_points = 0;
    int passes = 0;
    double mean_pass_ms = 0.0;
    double p99_pass_ms = 0.0;
    double mean_per_request_us = 0.0;
    double mean_support_points = 0.0;  // of the predicted length laws
};

/// Times full scheduling passes (embed, predict, priority) over `queue_len`
/// pending requests against a full history window whose realized lengths are
/// uniform on 1..dist_points, so predictions carry up to dist_points points.
inline OverheadStats measure_overhead(const OverheadConfig& cfg) {
    if (cfg.queue_len < 1) throw PreconditionError("measure_overhead: queue_len must be >= 1");
    if (cfg.dist_points < 1) throw PreconditionError("measure_overhead: dist_points must be >= 1");
    if (cfg.passes < 1) throw PreconditionError("measure_overhead: passes must be >= 1");
    std::mt19937_64 rng(cfg.seed);
    const auto family = random_tokens(cfg.seed, 60, 50000);
    auto prompt = [&] {
        auto p = family;
        for (auto t : random_tokens(rng(), 4, 50000)) p.push_back(t);
        return p;
    };
    HistoryWindow window(cfg.window_size, cfg.embedding.dim);
    std::uniform_int_distribution<std::int64_t> len(1, cfg.dist_points);
    for (std::size_t i = 0; i < cfg.window_size; ++i) {
        auto p = prompt();
        window.push(embed(p, cfg.embedding), static_cast<std::int64_t>(p.size()), len(rng));
    }
    const auto fallback = window.empirical_lengths();

    std::vector<Request> queue(static_cast<std::size_t>(cfg.queue_len));
    for (std::size_t i = 0; i < queue.size(); ++i) {
        auto& r = queue[i];
        r.id = i;
        r.prompt_tokens = prompt();
        r.input_len = static_cast<std::int64_t>(r.prompt_tokens.size());
        r.true_output_len = 1;
    }
    std::vector<const Request*> reqs;
    for (const auto& r : queue) reqs.push_back(&r);

    OverheadStats stats;
    stats.queue_len = cfg.queue_len;
    stats.dist_points = cfg.dist_points;
    stats.passes = cfg.passes;
    std::vector<double> pass_ms;
    double support = 0.0;
    double sink = 0.0;
    std::vector<PredictionState> states(queue.size());
    // Pass -1 warms caches and the allocator and is not timed.
    for (int pass = -1; pass < cfg.passes; ++pass) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<Embedding> embs;
        embs.reserve(queue.size());
        std::vector<const Embedding*> eptr;
        for (const auto& r : queue) {
            embs.push_back(embed(r.prompt_tokens, cfg.embedding));
            eptr.push_back(&embs.back());
        }
        // Predict one scan group at a time and rank it while its laws are hot.
        PredictionContext ctx{&window, &fallback, {}, nullptr};
        const std::span<const Request* const> all_reqs(reqs);
        const std::span<const Embedding* const> all_embs(eptr);
        for (std::size_t base = 0; base < queue.size(); base += HistoryWindow::kScanGroup) {
            const std::size_t m = std::min(HistoryWindow::kScanGroup, queue.size() - base);
            auto preds = predict_batch(cfg.predictor, all_reqs.subspan(base, m), all_embs.subspan(base, m), ctx);
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = base + k;
                if (pass == 0) support += static_cast<double>(preds[k].lengths.size());
                states[i] = make_prediction_state(cfg.cost, cfg.gittins, static_cast<double>(queue[i].input_len),
                                                  std::move(preds[k].lengths));
                sink += priority(cfg.policy, queue[i], ServiceProgress{}, &states[i], cfg.cost).primary;
            }
        }
        if (pass >= 0) {
            pass_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
    }
    stats.mean_pass_ms = mean(pass_ms);
    stats.p99_pass_ms = percentile(pass_ms, 0.99);
    stats.mean_per_request_us = stats.mean_pass_ms * 1000.0 / static_cast<double>(cfg.queue_len);
    stats.mean_support_points = support / static_cast<double>(cfg.queue_len);
    if (sink < 0.0) stats.mean_support_points = -1.0;  // keeps the work observable
    return stats;
}

}  // namespace distsched
