// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#if defined(__AVX512VNNI__) && defined(__AVX512BW__) && defined(__AVX512F__)
#include <immintrin.h>
#define DISTSCHED_VNNI_SCAN 1
#endif

#include <nlohmann/json.hpp>

#include "distsched/distribution.hpp"
#include "distsched/embedding.hpp"
#include "distsched/error.hpp"
#include "distsched/run_log.hpp"

namespace distsched {

struct HistoryRecord {
    Embedding embedding;
    std::int64_t input_len = 0;
    std::int64_t realized_output_len = 0;
    std::uint64_t insertion_seq = 0;
};

struct SimilarRecord {
    const HistoryRecord* record = nullptr;
    double similarity = 0.0;
};

/// Bounded FIFO of completed requests with exact cosine retrieval.
///
/// Besides the record ring, embeddings are mirrored into a record-interleaved
/// int8 matrix: 16 records per block, 4 consecutive dimensions per 32-bit
/// lane. One VNNI multiply-accumulate then advances 16 dot products at once
/// and no horizontal reductions are needed. Results are exact integer dot
/// products either way; the SIMD path only changes speed.
class HistoryWindow {
public:
    /// Queries scanned together per pass over the window.
    static constexpr std::size_t kScanGroup = 16;

    static constexpr std::size_t kDefaultCapacity = 10000;
    static constexpr std::size_t kLanes = 16;

    explicit HistoryWindow(std::size_t capacity = kDefaultCapacity, std::size_t dim = 256)
        : capacity_(capacity), dim_(dim), groups_((dim + 3) / 4) {
        if (capacity_ < 1) throw ConfigError("history.capacity", "must be >= 1");
        if (dim_ < 1) throw ConfigError("embedding.dim", "must be >= 1");
        const std::size_t blocks = (capacity_ + kLanes - 1) / kLanes;
        matrix_.assign(blocks * groups_ * kLanes * 4, 128);
        norm_.assign(blocks * kLanes, 0.0);
        norm_f_.assign(blocks * kLanes, 0.0f);
        input_len_.assign(blocks * kLanes, 0);
        output_len_.assign(blocks * kLanes, 0);
        records_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    /// Incremented on every push; lets callers cache derived data.
    std::uint64_t version() const noexcept { return version_; }

    /// Appends a record, evicting the oldest when full. Returns its sequence number.
    std::uint64_t push(Embedding embedding, std::int64_t input_len, std::int64_t realized_output_len) {
        HistoryRecord rec{std::move(embedding), input_len, realized_output_len, next_seq_};
        push(std::move(rec));
        return next_seq_ - 1;
    }

    /// Appends a record carrying its own sequence number, which must exceed
    /// every sequence number pushed before.
    void push(HistoryRecord rec) {
        if (rec.realized_output_len < 1) throw PreconditionError("history: realized_output_len must be >= 1");
        if (rec.input_len < 0) throw PreconditionError("history: input_len must be >= 0");
        if (rec.embedding.dim() != dim_) throw PreconditionError("history: embedding dimension mismatch");
        if (rec.embedding.degenerate()) throw PreconditionError("history: degenerate embedding");
        if (rec.insertion_seq < next_seq_) throw PreconditionError("history: insertion_seq must increase");
        next_seq_ = rec.insertion_seq + 1;

        std::size_t slot;
        if (records_.size() < capacity_) {
            slot = records_.size();
            records_.push_back(std::move(rec));
        } else {
            slot = head_;
            forget_length(records_[slot].realized_output_len);
            records_[slot] = std::move(rec);
            head_ = (head_ + 1) % capacity_;
        }
        const std::int64_t len = records_[slot].realized_output_len;
        ++length_counts_[len];
        if (len <= kDenseLengthLimit) {
            if (dense_counts_.size() <= static_cast<std::size_t>(len)) {
                dense_counts_.resize(static_cast<std::size_t>(len) + 1, 0);
            }
            ++dense_counts_[static_cast<std::size_t>(len)];
        }
        write_slot(slot);
        ++version_;
    }

    /// Visits records oldest first.
    template <class F>
    void for_each(F&& f) const {
        const std::size_t n = records_.size();
        for (std::size_t i = 0; i < n; ++i) f(records_[(head_ + i) % n]);
    }

    std::vector<HistoryRecord> records() const {
        std::vector<HistoryRecord> out;
        out.reserve(records_.size());
        for_each([&](const HistoryRecord& r) { out.push_back(r); });
        return out;
    }

    /// Largest realized output length in the window; 0 when empty.
    std::int64_t max_output_len() const { return length_counts_.empty() ? 0 : length_counts_.rbegin()->first; }

    /// Realized output length -> number of records in the window.
    const std::map<std::int64_t, std::int64_t>& length_counts() const noexcept { return length_counts_; }

    /// Empirical pmf of realized output lengths over the whole window.
    DiscreteDistribution empirical_lengths() const {
        if (empty()) throw ColdStartError();
        std::vector<std::pair<std::int64_t, std::int64_t>> v(length_counts_.begin(), length_counts_.end());
        return DiscreteDistribution::from_counts(v);
    }

    /// Calls visit(query_index, record, cosine) for every (query, record)
    /// pair with cosine >= theta. Order is unspecified. Degenerate queries
    /// match nothing.
    template <class Visit>
    void scan_similar(std::span<const Embedding* const> queries, double theta, Visit&& visit) const {
        scan_similar_impl(queries, theta, visit, false);
    }

    /// Same contract as scan_similar, always on the portable kernel.
    template <class Visit>
    void scan_similar_portable(std::span<const Embedding* const> queries, double theta, Visit&& visit) const {
        scan_similar_impl(queries, theta, visit, true);
    }

    /// Like scan_similar, but reports matches per block of kLanes slots:
    /// visit(query_index, block, mask) with bit i of mask set when slot
    /// block * kLanes + i matches. Skipping the similarity value lets clear
    /// matches bypass the exact recheck. Blocks without matches are skipped.
    template <class Visit>
    void scan_similar_masks(std::span<const Embedding* const> queries, double theta, Visit&& visit) const {
        MaskSink<Visit> sink{visit};
        scan_similar_impl(queries, theta, sink, false);
    }

    std::size_t block_count() const noexcept { return (records_.size() + kLanes - 1) / kLanes; }

    /// Realized output length per slot, padded to whole blocks.
    std::span<const std::int64_t> slot_output_lengths() const noexcept {
        return std::span<const std::int64_t>(output_len_).first(block_count() * kLanes);
    }

    /// Bit i set when slot block * kLanes + i holds a record.
    std::uint32_t occupied_mask(std::size_t block) const noexcept {
        const std::size_t valid = std::min(kLanes, records_.size() - block * kLanes);
        return valid == kLanes ? 0xffffu : (1u << valid) - 1u;
    }

    /// Largest length kept in the dense histogram.
    static constexpr std::int64_t kDenseLengthLimit = 1 << 20;

    /// Records per realized output length, indexed by length, covering
    /// 0..max_output_len(). Empty when some length exceeds kDenseLengthLimit.
    std::span<const std::uint32_t> dense_length_counts() const noexcept {
        const auto max = max_output_len();
        if (max > kDenseLengthLimit) return {};
        return std::span<const std::uint32_t>(dense_counts_).first(static_cast<std::size_t>(max) + 1);
    }

private:
    template <class Visit>
    struct MaskSink {
        static constexpr bool kLengthsOnly = true;
        Visit& visit;
        void operator()(std::size_t qi, std::size_t slot) const {
            visit(qi, slot / kLanes, std::uint32_t{1} << (slot % kLanes));
        }
        void block(std::size_t qi, std::size_t block, std::uint32_t mask) const { visit(qi, block, mask); }
    };

    template <class Visit>
    static constexpr bool lengths_only() {
        if constexpr (requires { Visit::kLengthsOnly; }) {
            return Visit::kLengthsOnly;
        } else {
            return false;
        }
    }

    template <class Visit>
    void scan_similar_impl(std::span<const Embedding* const> queries, double theta, Visit& visit,
                           bool portable) const {
        if (!(theta >= -1.0 && theta <= 1.0)) {
            throw PreconditionError("similarity threshold must lie in [-1, 1]");
        }
        for (const Embedding* q : queries) {
            if (q->dim() != dim_) throw PreconditionError("history: query dimension mismatch");
        }
        constexpr std::size_t kGroup = kScanGroup;
        for (std::size_t g0 = 0; g0 < queries.size(); g0 += kGroup) {
            const std::size_t g = std::min(kGroup, queries.size() - g0);
            scan_group(queries.subspan(g0, g), g0, theta, visit, portable);
        }
    }

public:
    /// Exact linear scan, sorted by descending similarity with ties broken
    /// toward the newer record.
    std::vector<SimilarRecord> query_similar(const Embedding& q, double theta, RunLog* log = nullptr) const {
        std::vector<SimilarRecord> out;
        if (q.degenerate()) {
            if (!(theta >= -1.0 && theta <= 1.0)) {
                throw PreconditionError("similarity threshold must lie in [-1, 1]");
            }
            if (log) ++log->degenerate_queries;
            return out;
        }
        const Embedding* qs[] = {&q};
        scan_similar(std::span<const Embedding* const>(qs), theta,
                     [&](std::size_t, const HistoryRecord& r, double cos) { out.push_back({&r, cos}); });
        std::sort(out.begin(), out.end(), [](const SimilarRecord& a, const SimilarRecord& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.record->insertion_seq > b.record->insertion_seq;
        });
        return out;
    }

    /// Records whose input length lies within rel_tol * input_len of `input_len`.
    template <class Visit>
    void scan_input_length(std::int64_t input_len, double rel_tol, Visit&& visit) const {
        const double tol = rel_tol * static_cast<double>(input_len);
        for (std::size_t s = 0; s < records_.size(); ++s) {
            if (std::abs(static_cast<double>(input_len_[s] - input_len)) <= tol) visit(records_[s]);
        }
    }

private:
    std::uint8_t* lane_ptr(std::size_t slot, std::size_t group) {
        const std::size_t block = slot / kLanes;
        const std::size_t lane = slot % kLanes;
        return matrix_.data() + ((block * groups_ + group) * kLanes + lane) * 4;
    }

    void write_slot(std::size_t slot) {
        const auto& rec = records_[slot];
        const auto counts = rec.embedding.counts();
        for (std::size_t g = 0; g < groups_; ++g) {
            std::uint8_t* p = lane_ptr(slot, g);
            for (std::size_t b = 0; b < 4; ++b) {
                const std::size_t k = g * 4 + b;
                p[b] = static_cast<std::uint8_t>((k < dim_ ? counts[k] : 0) + 128);
            }
        }
        norm_[slot] = rec.embedding.norm();
        norm_f_[slot] = static_cast<float>(norm_[slot]);
        input_len_[slot] = rec.input_len;
        output_len_[slot] = rec.realized_output_len;
    }

    void forget_length(std::int64_t len) {
        if (len <= kDenseLengthLimit) --dense_counts_[static_cast<std::size_t>(len)];
        auto it = length_counts_.find(len);
        if (--it->second == 0) length_counts_.erase(it);
    }

    // Window bytes are stored biased to unsigned (w + 128) for the u8 x s8
    // product; the query's bias 128 * sum(q) rides in the last word.
    std::vector<std::int32_t> pack_query(const Embedding& q) const {
        std::vector<std::int32_t> packed(groups_ + 1, 0);
        const auto counts = q.counts();
        std::int32_t sum = 0;
        for (std::size_t g = 0; g < groups_; ++g) {
            std::int8_t bytes[4];
            for (std::size_t b = 0; b < 4; ++b) {
                const std::size_t k = g * 4 + b;
                bytes[b] = k < dim_ ? counts[k] : 0;
                sum += bytes[b];
            }
            std::memcpy(&packed[g], bytes, 4);
        }
        packed[groups_] = 128 * sum;
        return packed;
    }

    template <class Visit>
    void emit_if_match(std::size_t qi, const Embedding& q, std::size_t slot, std::int64_t dotv, double theta,
                       Visit& visit) const {
        if (slot >= records_.size() || norm_[slot] == 0.0) return;
        const double cos = static_cast<double>(dotv) / (q.norm() * norm_[slot]);
        if (cos < theta) return;
        if constexpr (lengths_only<Visit>()) {
            visit(qi, slot);
        } else {
            visit(qi, records_[slot], cos);
        }
    }

    template <class Visit>
    void scan_group(std::span<const Embedding* const> group, std::size_t base, double theta, Visit& visit,
                    bool portable) const {
        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (!group[i]->degenerate()) live.push_back(i);
        }
        if (live.empty() || records_.empty()) return;
        std::vector<std::vector<std::int32_t>> packed;
        for (std::size_t i : live) packed.push_back(pack_query(*group[i]));
        const std::size_t blocks = (records_.size() + kLanes - 1) / kLanes;
#ifdef DISTSCHED_VNNI_SCAN
        if (!portable) {
            scan_vnni(group, live, packed, blocks, base, theta, visit);
            return;
        }
#endif
        (void)portable;
        scan_portable(group, live, packed, blocks, base, theta, visit);
    }

    template <class Visit>
    void scan_portable(std::span<const Embedding* const> group, const std::vector<std::size_t>& live,
                       const std::vector<std::vector<std::int32_t>>& packed, std::size_t blocks, std::size_t base,
                       double theta, Visit& visit) const {
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::uint8_t* wb = matrix_.data() + b * groups_ * kLanes * 4;
            for (std::size_t li = 0; li < live.size(); ++li) {
                std::int32_t acc[kLanes] = {};
                const auto& qp = packed[li];
                for (std::size_t g = 0; g < groups_; ++g) {
                    std::int8_t qb[4];
                    std::memcpy(qb, &qp[g], 4);
                    const std::uint8_t* w = wb + g * kLanes * 4;
                    for (std::size_t lane = 0; lane < kLanes; ++lane) {
                        acc[lane] += qb[0] * w[lane * 4 + 0] + qb[1] * w[lane * 4 + 1] + qb[2] * w[lane * 4 + 2] +
                                     qb[3] * w[lane * 4 + 3];
                    }
                }
                for (std::size_t lane = 0; lane < kLanes; ++lane) {
                    const std::size_t slot = b * kLanes + lane;
                    const std::int64_t d = static_cast<std::int64_t>(acc[lane]) - qp[groups_];
                    emit_if_match(base + live[li], *group[live[li]], slot, d, theta, visit);
                }
            }
        }
    }

#ifdef DISTSCHED_VNNI_SCAN
    /// Up to sixteen queries against one block of kLanes records;
    /// accumulators are named locals so they stay in registers.
    template <std::size_t NQ>
    static void dot16(const std::uint8_t* wb, std::size_t groups, const std::int32_t* const* qp, __m512i* out) {
        static_assert(NQ >= 1 && NQ <= 16);
        __m512i a0 = _mm512_setzero_si512(), a1 = a0, a2 = a0, a3 = a0, a4 = a0, a5 = a0, a6 = a0, a7 = a0, a8 = a0, a9 = a0, a10 = a0, a11 = a0, a12 = a0, a13 = a0, a14 = a0, a15 = a0;
        for (std::size_t g = 0; g < groups; ++g) {
            const __m512i w = _mm512_loadu_si512(wb + g * kLanes * 4);
            a0 = _mm512_dpbusd_epi32(a0, w, _mm512_set1_epi32(qp[0][g]));
            if constexpr (NQ > 1) a1 = _mm512_dpbusd_epi32(a1, w, _mm512_set1_epi32(qp[1][g]));
            if constexpr (NQ > 2) a2 = _mm512_dpbusd_epi32(a2, w, _mm512_set1_epi32(qp[2][g]));
            if constexpr (NQ > 3) a3 = _mm512_dpbusd_epi32(a3, w, _mm512_set1_epi32(qp[3][g]));
            if constexpr (NQ > 4) a4 = _mm512_dpbusd_epi32(a4, w, _mm512_set1_epi32(qp[4][g]));
            if constexpr (NQ > 5) a5 = _mm512_dpbusd_epi32(a5, w, _mm512_set1_epi32(qp[5][g]));
            if constexpr (NQ > 6) a6 = _mm512_dpbusd_epi32(a6, w, _mm512_set1_epi32(qp[6][g]));
            if constexpr (NQ > 7) a7 = _mm512_dpbusd_epi32(a7, w, _mm512_set1_epi32(qp[7][g]));
            if constexpr (NQ > 8) a8 = _mm512_dpbusd_epi32(a8, w, _mm512_set1_epi32(qp[8][g]));
            if constexpr (NQ > 9) a9 = _mm512_dpbusd_epi32(a9, w, _mm512_set1_epi32(qp[9][g]));
            if constexpr (NQ > 10) a10 = _mm512_dpbusd_epi32(a10, w, _mm512_set1_epi32(qp[10][g]));
            if constexpr (NQ > 11) a11 = _mm512_dpbusd_epi32(a11, w, _mm512_set1_epi32(qp[11][g]));
            if constexpr (NQ > 12) a12 = _mm512_dpbusd_epi32(a12, w, _mm512_set1_epi32(qp[12][g]));
            if constexpr (NQ > 13) a13 = _mm512_dpbusd_epi32(a13, w, _mm512_set1_epi32(qp[13][g]));
            if constexpr (NQ > 14) a14 = _mm512_dpbusd_epi32(a14, w, _mm512_set1_epi32(qp[14][g]));
            if constexpr (NQ > 15) a15 = _mm512_dpbusd_epi32(a15, w, _mm512_set1_epi32(qp[15][g]));
        }
        out[0] = a0;
        if constexpr (NQ > 1) out[1] = a1;
        if constexpr (NQ > 2) out[2] = a2;
        if constexpr (NQ > 3) out[3] = a3;
        if constexpr (NQ > 4) out[4] = a4;
        if constexpr (NQ > 5) out[5] = a5;
        if constexpr (NQ > 6) out[6] = a6;
        if constexpr (NQ > 7) out[7] = a7;
        if constexpr (NQ > 8) out[8] = a8;
        if constexpr (NQ > 9) out[9] = a9;
        if constexpr (NQ > 10) out[10] = a10;
        if constexpr (NQ > 11) out[11] = a11;
        if constexpr (NQ > 12) out[12] = a12;
        if constexpr (NQ > 13) out[13] = a13;
        if constexpr (NQ > 14) out[14] = a14;
        if constexpr (NQ > 15) out[15] = a15;
    }

    void dot_block(std::size_t b, std::size_t nq, const std::int32_t* const* qp, __m512i* out) const {
        const std::uint8_t* wb = matrix_.data() + b * groups_ * kLanes * 4;
        switch (nq) {
            case 16: dot16<16>(wb, groups_, qp, out); break;
            case 15: dot16<15>(wb, groups_, qp, out); break;
            case 14: dot16<14>(wb, groups_, qp, out); break;
            case 13: dot16<13>(wb, groups_, qp, out); break;
            case 12: dot16<12>(wb, groups_, qp, out); break;
            case 11: dot16<11>(wb, groups_, qp, out); break;
            case 10: dot16<10>(wb, groups_, qp, out); break;
            case 9: dot16<9>(wb, groups_, qp, out); break;
            case 8: dot16<8>(wb, groups_, qp, out); break;
            case 7: dot16<7>(wb, groups_, qp, out); break;
            case 6: dot16<6>(wb, groups_, qp, out); break;
            case 5: dot16<5>(wb, groups_, qp, out); break;
            case 4: dot16<4>(wb, groups_, qp, out); break;
            case 3: dot16<3>(wb, groups_, qp, out); break;
            case 2: dot16<2>(wb, groups_, qp, out); break;
            default: dot16<1>(wb, groups_, qp, out); break;
        }
    }

    template <class Visit>
    void scan_vnni(std::span<const Embedding* const> group, const std::vector<std::size_t>& live,
                   const std::vector<std::vector<std::int32_t>>& packed, std::size_t blocks, std::size_t base,
                   double theta, Visit& visit) const {
        const std::size_t nq = live.size();
        // Float bounds with a generous margin: below `lo` is a sure miss, above
        // `hi` a sure hit; anything between is re-checked exactly.
        float qlo[kScanGroup];
        float qhi[kScanGroup];
        for (std::size_t i = 0; i < nq; ++i) {
            const double qn = group[live[i]]->norm();
            qlo[i] = static_cast<float>((theta - 1e-3) * qn);
            qhi[i] = static_cast<float>((theta + 1e-3) * qn);
        }
        const std::int32_t* qp[kScanGroup] = {};
        for (std::size_t i = 0; i < nq; ++i) qp[i] = packed[i].data();
        for (std::size_t b = 0; b < blocks; ++b) {
            __m512i acc[kScanGroup];
            dot_block(b, nq, qp, acc);
            const __m512 wn = _mm512_loadu_ps(norm_f_.data() + b * kLanes);
            const std::size_t valid = std::min(kLanes, records_.size() - b * kLanes);
            const auto in_window = static_cast<__mmask16>(valid == kLanes ? 0xffffu : (1u << valid) - 1u);
            for (std::size_t i = 0; i < nq; ++i) {
                const __m512i d = _mm512_sub_epi32(acc[i], _mm512_set1_epi32(qp[i][groups_]));
                const __m512 df = _mm512_cvtepi32_ps(d);
                const __m512 lo = _mm512_sub_ps(_mm512_mul_ps(wn, _mm512_set1_ps(qlo[i])), _mm512_set1_ps(1.0f));
                __mmask16 m = _mm512_mask_cmp_ps_mask(in_window, df, lo, _CMP_GE_OQ);
                if (!m) continue;
                alignas(64) std::int32_t dots[kLanes];
                if constexpr (lengths_only<Visit>()) {
                    const __m512 hi = _mm512_add_ps(_mm512_mul_ps(wn, _mm512_set1_ps(qhi[i])), _mm512_set1_ps(1.0f));
                    const __mmask16 sure = _mm512_mask_cmp_ps_mask(m, df, hi, _CMP_GE_OQ);
                    m &= static_cast<__mmask16>(~sure);
                    std::uint32_t bits = sure;
                    if (m) {
                        _mm512_store_si512(dots, d);
                        const double qn = group[live[i]]->norm();
                        while (m) {
                            const unsigned lane = static_cast<unsigned>(__builtin_ctz(m));
                            m &= static_cast<__mmask16>(m - 1);
                            const std::size_t slot = b * kLanes + lane;
                            if (static_cast<double>(dots[lane]) / (qn * norm_[slot]) >= theta) bits |= 1u << lane;
                        }
                    }
                    if (bits) visit.block(base + live[i], b, bits);
                    continue;
                }
                _mm512_store_si512(dots, d);
                while (m) {
                    const unsigned lane = static_cast<unsigned>(__builtin_ctz(m));
                    m &= static_cast<__mmask16>(m - 1);
                    emit_if_match(base + live[i], *group[live[i]], b * kLanes + lane, dots[lane], theta, visit);
                }
            }
        }
    }
#endif

    std::size_t capacity_;
    std::size_t dim_;
    std::size_t groups_;
    std::vector<HistoryRecord> records_;
    std::size_t head_ = 0;  // slot of the oldest record once full
    std::uint64_t next_seq_ = 0;
    std::uint64_t version_ = 0;
    std::map<std::int64_t, std::int64_t> length_counts_;
    std::vector<std::uint32_t> dense_counts_;

    std::vector<std::uint8_t> matrix_;
    std::vector<double> norm_;
    std::vector<float> norm_f_;
    std::vector<std::int64_t> input_len_;
    std::vector<std::int64_t> output_len_;
};

// Window snapshots are JSON Lines:
//   {"seq":0,"input_len":12,"output_len":40,"embedding":[0,1,-2,...]}

inline void save_snapshot(const HistoryWindow& window, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    window.for_each([&](const HistoryRecord& r) {
        nlohmann::json j;
        j["seq"] = r.insertion_seq;
        j["input_len"] = r.input_len;
        j["output_len"] = r.realized_output_len;
        const auto c = r.embedding.counts();
        j["embedding"] = std::vector<int>(c.begin(), c.end());
        out << j.dump() << '\n';
    });
}

inline HistoryWindow load_snapshot(const std::filesystem::path& path, std::size_t capacity, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open snapshot " + path.string());
    HistoryWindow window(capacity, dim);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto raw = j.at("embedding").get<std::vector<int>>();
            if (raw.size() != dim) throw FormatError(line_no, "embedding dimension mismatch");
            std::vector<std::int8_t> counts;
            counts.reserve(raw.size());
            for (int v : raw) {
                if (v < -127 || v > 127) throw FormatError(line_no, "embedding component out of int8 range");
                counts.push_back(static_cast<std::int8_t>(v));
            }
            window.push(HistoryRecord{Embedding(std::move(counts)), j.at("input_len").get<std::int64_t>(),
                                      j.at("output_len").get<std::int64_t>(), j.at("seq").get<std::uint64_t>()});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(line_no, e.what());
        } catch (const PreconditionError& e) {
            throw FormatError(line_no, e.what());
        }
    }
    return window;
}

}  // namespace distsched
