// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "distsched/error.hpp"
#include "distsched/workload.hpp"

namespace distsched {

struct EmbeddingConfig {
    std::size_t dim = 256;
    std::uint64_t salt = 0x5eed5eed5eed5eedULL;
    int max_ngram = 2;
};

inline void validate(const EmbeddingConfig& cfg) {
    if (cfg.dim < 1 || cfg.dim > 65536) throw ConfigError("embedding.dim", "must lie in [1, 65536]");
    if (cfg.max_ngram < 1 || cfg.max_ngram > 8) throw ConfigError("embedding.ngram", "must lie in [1, 8]");
}

/// Feature-hashed prompt embedding.
///
/// Stored as signed bucket counts clamped to int8; the L2-normalized vector
/// is `counts / norm()`. Keeping the integer form makes every dot product
/// exact, so similarity results do not depend on summation order or SIMD width.
class Embedding {
public:
    Embedding() = default;

    explicit Embedding(std::vector<std::int8_t> counts) : counts_(std::move(counts)) {
        for (auto c : counts_) sq_norm_ += static_cast<std::int64_t>(c) * c;
    }

    std::size_t dim() const noexcept { return counts_.size(); }
    /// True for the zero vector (empty prompt).
    bool degenerate() const noexcept { return sq_norm_ == 0; }
    std::span<const std::int8_t> counts() const noexcept { return counts_; }
    std::int64_t squared_norm() const noexcept { return sq_norm_; }
    double norm() const noexcept { return std::sqrt(static_cast<double>(sq_norm_)); }

    double operator[](std::size_t i) const { return degenerate() ? 0.0 : counts_[i] / norm(); }

    std::vector<double> normalized() const {
        std::vector<double> v(counts_.size(), 0.0);
        if (degenerate()) return v;
        const double n = norm();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = counts_[i] / n;
        return v;
    }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    std::vector<std::int8_t> counts_;
    std::int64_t sq_norm_ = 0;
};

inline std::int64_t dot(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) throw PreconditionError("embedding dimensions differ");
    std::int64_t acc = 0;
    const auto ca = a.counts();
    const auto cb = b.counts();
    for (std::size_t i = 0; i < ca.size(); ++i) acc += static_cast<std::int64_t>(ca[i]) * cb[i];
    return acc;
}

/// Cosine similarity; zero when either side is degenerate.
inline double cosine(const Embedding& a, const Embedding& b) {
    if (a.degenerate() || b.degenerate()) return 0.0;
    return static_cast<double>(dot(a, b)) / (a.norm() * b.norm());
}

namespace detail {

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Hashes every token n-gram (n = 1..max_ngram) into `dim` buckets with a
/// salted hash, signed by a second hash.
inline Embedding embed(std::span<const Token> prompt, const EmbeddingConfig& cfg = {}) {
    validate(cfg);
    std::vector<std::int32_t> acc(cfg.dim, 0);
    const std::uint64_t sign_salt = detail::mix64(cfg.salt ^ 0xa5a5a5a5a5a5a5a5ULL);
    for (int n = 1; n <= cfg.max_ngram; ++n) {
        if (prompt.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= prompt.size(); ++start) {
            std::uint64_t h = detail::mix64(cfg.salt + static_cast<std::uint64_t>(n));
            for (int k = 0; k < n; ++k) {
                h = detail::mix64(h ^ static_cast<std::uint32_t>(prompt[start + static_cast<std::size_t>(k)]));
            }
            const auto bucket = static_cast<std::size_t>(h % cfg.dim);
            acc[bucket] += (detail::mix64(h ^ sign_salt) >> 63) ? -1 : 1;
        }
    }
    std::vector<std::int8_t> counts(cfg.dim);
    for (std::size_t i = 0; i < cfg.dim; ++i) counts[i] = static_cast<std::int8_t>(std::clamp(acc[i], -127, 127));
    return Embedding(std::move(counts));
}

}  // namespace distsched
