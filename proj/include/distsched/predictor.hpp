// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#ifdef __AVX512F__
#include <immintrin.h>
#endif

#include "distsched/distribution.hpp"
#include "distsched/embedding.hpp"
#include "distsched/error.hpp"
#include "distsched/history.hpp"
#include "distsched/run_log.hpp"
#include "distsched/workload.hpp"

namespace distsched {

enum class PredictorKind {
    SemanticHistory,     // empirical pmf of prompt-similar history records
    LengthHistory,       // empirical pmf of records with similar input length
    OracleDistribution,  // the request's true cluster law
    OraclePoint,         // mass 1 at the realized output length
    PointMean,           // SemanticHistory collapsed to its rounded mean
};

struct PredictorConfig {
    PredictorKind kind = PredictorKind::SemanticHistory;
    double threshold = 0.8;
    std::int64_t min_matches = 20;
    double rel_tol = 0.1;
};

inline std::string to_string(PredictorKind k) {
    switch (k) {
        case PredictorKind::SemanticHistory: return "semantic-history";
        case PredictorKind::LengthHistory: return "length-history";
        case PredictorKind::OracleDistribution: return "oracle-distribution";
        case PredictorKind::OraclePoint: return "oracle-point";
        case PredictorKind::PointMean: return "point-mean";
    }
    return "?";
}

inline PredictorKind parse_predictor_kind(const std::string& s) {
    for (auto k : {PredictorKind::SemanticHistory, PredictorKind::LengthHistory, PredictorKind::OracleDistribution,
                   PredictorKind::OraclePoint, PredictorKind::PointMean}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("predictor.kind", "unknown predictor '" + s + "'");
}

inline void validate(const PredictorConfig& cfg) {
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw ConfigError("predictor.threshold", "must lie in [0, 1]");
    if (cfg.min_matches < 1) throw ConfigError("predictor.min_matches", "must be >= 1");
    if (!(cfg.rel_tol > 0.0)) throw ConfigError("predictor.rel_tol", "must be > 0");
}

inline bool needs_embedding(PredictorKind k) {
    return k == PredictorKind::SemanticHistory || k == PredictorKind::PointMean;
}

struct Prediction {
    DiscreteDistribution lengths;
    bool fallback_used = false;
    std::size_t matches = 0;
};

/// What a prediction may consult besides the request itself.
struct PredictionContext {
    const HistoryWindow* window = nullptr;
    /// Whole-window (or warm-start) length pmf used when matches are scarce.
    const DiscreteDistribution* fallback = nullptr;
    /// Ground-truth law per cluster id, for the oracle kinds.
    std::span<const DiscreteDistribution> cluster_laws;
    RunLog* log = nullptr;
};

namespace detail {

inline DiscreteDistribution empirical_pmf(std::vector<std::int64_t>& lengths) {
    const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
    const std::int64_t min = *lo;
    const std::int64_t max = *hi;
    std::vector<std::pair<std::int64_t, std::int64_t>> counts;
    if (max - min < (1 << 16)) {
        std::vector<std::int64_t> dense(static_cast<std::size_t>(max - min + 1), 0);
        for (auto v : lengths) ++dense[static_cast<std::size_t>(v - min)];
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (dense[i]) counts.emplace_back(min + static_cast<std::int64_t>(i), dense[i]);
        }
    } else {
        std::sort(lengths.begin(), lengths.end());
        for (auto v : lengths) {
            if (!counts.empty() && counts.back().first == v) {
                ++counts.back().second;
            } else {
                counts.emplace_back(v, 1);
            }
        }
    }
    return DiscreteDistribution::from_counts(counts);
}

inline Prediction from_matches(std::vector<std::int64_t>& lengths, const PredictorConfig& cfg,
                               const PredictionContext& ctx) {
    Prediction p;
    p.matches = lengths.size();
    if (static_cast<std::int64_t>(lengths.size()) >= cfg.min_matches) {
        p.lengths = empirical_pmf(lengths);
        return p;
    }
    if (!ctx.fallback || ctx.fallback->empty()) throw ColdStartError();
    p.lengths = *ctx.fallback;
    p.fallback_used = true;
    if (ctx.log) ++ctx.log->fallback_events;
    return p;
}

/// Empirical pmf from a dense histogram indexed by length.
inline DiscreteDistribution pmf_from_histogram(std::span<const std::uint32_t> hist, std::size_t total) {
    const double inv = 1.0 / static_cast<double>(total);
    // Compacted into reused scratch first so the result vectors are written once.
    thread_local std::vector<double> s;
    thread_local std::vector<double> w;
    if (s.size() < hist.size()) {
        s.resize(hist.size());
        w.resize(hist.size());
    }
    std::size_t v = 0;
    std::size_t j = 0;
#ifdef __AVX512F__
    const __m512d step = _mm512_set1_pd(8.0);
    __m512d value = _mm512_setr_pd(0, 1, 2, 3, 4, 5, 6, 7);
    const __m512d scale = _mm512_set1_pd(inv);
    for (; v + 8 <= hist.size(); v += 8) {
        const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hist.data() + v));
        const __mmask8 nz = _mm256_test_epi32_mask(c, c);
        const __m512d cd = _mm512_cvtepu32_pd(c);
        _mm512_mask_compressstoreu_pd(s.data() + j, nz, value);
        _mm512_mask_compressstoreu_pd(w.data() + j, nz, _mm512_mul_pd(cd, scale));
        j += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(nz)));
        value = _mm512_add_pd(value, step);
    }
#endif
    for (; v < hist.size(); ++v) {
        if (!hist[v]) continue;
        s[j] = static_cast<double>(v);
        w[j] = static_cast<double>(hist[v]) * inv;
        ++j;
    }
    const auto n = static_cast<std::ptrdiff_t>(j);
    return DiscreteDistribution::normalized_unchecked(std::vector<double>(s.begin(), s.begin() + n),
                                                      std::vector<double>(w.begin(), w.begin() + n));
}

inline Prediction from_histogram(std::span<const std::uint32_t> hist, std::size_t total, const PredictorConfig& cfg,
                                 const PredictionContext& ctx) {
    if (static_cast<std::int64_t>(total) >= cfg.min_matches) {
        Prediction p;
        p.matches = total;
        p.lengths = pmf_from_histogram(hist, total);
        return p;
    }
    std::vector<std::int64_t> none;
    auto p = from_matches(none, cfg, ctx);
    p.matches = total;
    return p;
}

inline Prediction collapse_to_mean(Prediction p) {
    const double m = std::max(1.0, std::round(p.lengths.mean()));
    p.lengths = DiscreteDistribution::point(m);
    return p;
}

inline Prediction oracle_distribution(const Request& r, const PredictionContext& ctx) {
    if (!r.cluster_id || *r.cluster_id < 0 || static_cast<std::size_t>(*r.cluster_id) >= ctx.cluster_laws.size()) {
        throw PreconditionError("oracle-distribution: no ground-truth law for request " + std::to_string(r.id));
    }
    return Prediction{ctx.cluster_laws[static_cast<std::size_t>(*r.cluster_id)], false, 0};
}

}  // namespace detail

/// Output-length distributions for a batch of requests. `embeddings[i]` is
/// required for the embedding-based kinds and ignored otherwise. Batching
/// only amortizes the history scan; results equal per-request predict().
inline std::vector<Prediction> predict_batch(const PredictorConfig& cfg, std::span<const Request* const> requests,
                                             std::span<const Embedding* const> embeddings,
                                             const PredictionContext& ctx) {
    std::vector<Prediction> out(requests.size());
    switch (cfg.kind) {
        case PredictorKind::OraclePoint:
            for (std::size_t i = 0; i < requests.size(); ++i) {
                out[i].lengths = DiscreteDistribution::point(static_cast<double>(requests[i]->true_output_len));
            }
            return out;
        case PredictorKind::OracleDistribution:
            for (std::size_t i = 0; i < requests.size(); ++i) out[i] = detail::oracle_distribution(*requests[i], ctx);
            return out;
        case PredictorKind::LengthHistory:
            for (std::size_t i = 0; i < requests.size(); ++i) {
                std::vector<std::int64_t> lengths;
                if (ctx.window) {
                    ctx.window->scan_input_length(requests[i]->input_len, cfg.rel_tol, [&](const HistoryRecord& r) {
                        lengths.push_back(r.realized_output_len);
                    });
                }
                out[i] = detail::from_matches(lengths, cfg, ctx);
            }
            return out;
        case PredictorKind::SemanticHistory:
        case PredictorKind::PointMean: {
            if (embeddings.size() != requests.size()) {
                throw PreconditionError("predict: embedding-based predictor needs one embedding per request");
            }
            const bool have_window = ctx.window && !ctx.window->empty();
            const auto dense = have_window ? ctx.window->dense_length_counts() : std::span<const std::uint32_t>{};
            if (!dense.empty()) {
                // Match masks for a chunk of queries, then one histogram per query. When
                // most of the window matches, start from the window histogram and
                // subtract the misses instead.
                constexpr std::size_t kChunk = HistoryWindow::kScanGroup;
                const HistoryWindow& w = *ctx.window;
                const std::size_t blocks = w.block_count();
                const auto lens = w.slot_output_lengths();
                std::vector<std::uint32_t> masks(kChunk * blocks);
                std::vector<std::uint32_t> hist(dense.size());
                for (std::size_t base = 0; base < requests.size(); base += kChunk) {
                    const std::size_t m = std::min(kChunk, requests.size() - base);
                    std::fill(masks.begin(), masks.begin() + static_cast<std::ptrdiff_t>(m * blocks), 0u);
                    w.scan_similar_masks(embeddings.subspan(base, m), cfg.threshold,
                                         [&](std::size_t q, std::size_t blk, std::uint32_t mask) {
                                             masks[q * blocks + blk] |= mask;
                                         });
                    for (std::size_t q = 0; q < m; ++q) {
                        const std::uint32_t* qm = masks.data() + q * blocks;
                        std::size_t total = 0;
                        for (std::size_t blk = 0; blk < blocks; ++blk) total += static_cast<std::size_t>(std::popcount(qm[blk]));
                        const bool subtract = 2 * total > w.size();
                        if (subtract) {
                            std::copy(dense.begin(), dense.end(), hist.begin());
                        } else {
                            std::fill(hist.begin(), hist.end(), 0u);
                        }
                        for (std::size_t blk = 0; blk < blocks; ++blk) {
                            std::uint32_t bits = subtract ? ~qm[blk] & w.occupied_mask(blk) : qm[blk];
                            const std::int64_t* len = lens.data() + blk * HistoryWindow::kLanes;
                            while (bits) {
                                const auto lane = static_cast<std::size_t>(std::countr_zero(bits));
                                bits &= bits - 1;
                                auto& c = hist[static_cast<std::size_t>(len[lane])];
                                c = subtract ? c - 1 : c + 1;
                            }
                        }
                        out[base + q] = detail::from_histogram(hist, total, cfg, ctx);
                    }
                }
            } else {
                std::vector<std::vector<std::int64_t>> lengths(requests.size());
                if (have_window) {
                    ctx.window->scan_similar(embeddings, cfg.threshold,
                                             [&](std::size_t q, const HistoryRecord& r, double) {
                                                 lengths[q].push_back(r.realized_output_len);
                                             });
                }
                for (std::size_t i = 0; i < requests.size(); ++i) out[i] = detail::from_matches(lengths[i], cfg, ctx);
            }
            for (std::size_t i = 0; i < requests.size(); ++i) {
                if (embeddings[i]->degenerate() && ctx.log) ++ctx.log->degenerate_queries;
                if (cfg.kind == PredictorKind::PointMean) out[i] = detail::collapse_to_mean(std::move(out[i]));
            }
            return out;
        }
    }
    return out;
}

inline Prediction predict(const PredictorConfig& cfg, const Request& request, const Embedding* embedding,
                          const PredictionContext& ctx) {
    const Request* rs[] = {&request};
    std::vector<const Embedding*> es;
    if (needs_embedding(cfg.kind)) {
        if (!embedding) throw PreconditionError("predict: embedding required for " + to_string(cfg.kind));
        es.push_back(embedding);
    }
    return std::move(predict_batch(cfg, rs, es, ctx).front());
}

/// Mixes in a uniform law over 1..o_max at weight 1:4 (0.2 uniform, 0.8 d).
inline DiscreteDistribution inject_noise(const DiscreteDistribution& d, std::int64_t o_max) {
    if (o_max < 1) throw PreconditionError("inject_noise: o_max must be >= 1");
    if (d.min() < 1.0 || d.max() > static_cast<double>(o_max)) {
        throw PreconditionError("inject_noise: support must lie within [1, o_max]");
    }
    for (double v : d.support()) {
        if (v != std::floor(v)) throw PreconditionError("inject_noise: support must be integral");
    }
    constexpr double kNoiseWeight = 0.2;
    const double base = kNoiseWeight / static_cast<double>(o_max);
    std::vector<double> support(static_cast<std::size_t>(o_max));
    std::vector<double> masses(static_cast<std::size_t>(o_max), base);
    for (std::int64_t k = 1; k <= o_max; ++k) support[static_cast<std::size_t>(k - 1)] = static_cast<double>(k);
    const auto ds = d.support();
    const auto dm = d.masses();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        masses[static_cast<std::size_t>(ds[i]) - 1] = base + (1.0 - kNoiseWeight) * dm[i];
    }
    return DiscreteDistribution(std::move(support), std::move(masses));
}

}  // namespace distsched
