// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distsched/error.hpp"

namespace distsched {

/// Probability mass over a finite set of non-negative values.
///
/// Support is strictly increasing and every mass is strictly positive; the
/// masses sum to one within 1e-9. Used both for output lengths (tokens) and
/// for service costs (dimensionless cost units).
class DiscreteDistribution {
public:
    static constexpr double kMassTolerance = 1e-9;

    DiscreteDistribution() = default;

    /// Validating constructor. Zero-mass points are dropped; anything else that
    /// breaks the invariants throws PreconditionError.
    DiscreteDistribution(std::vector<double> support, std::vector<double> masses) {
        if (support.size() != masses.size()) {
            throw PreconditionError("distribution: support and masses differ in length");
        }
        std::vector<double> s;
        std::vector<double> m;
        s.reserve(support.size());
        m.reserve(masses.size());
        double total = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
            if (!(masses[i] >= 0.0) || !std::isfinite(masses[i])) {
                throw PreconditionError("distribution: masses must be finite and non-negative");
            }
            if (!std::isfinite(support[i]) || support[i] < 0.0) {
                throw PreconditionError("distribution: support values must be finite and non-negative");
            }
            if (masses[i] == 0.0) continue;
            if (!s.empty() && !(support[i] > s.back())) {
                throw PreconditionError("distribution: support must be strictly increasing");
            }
            s.push_back(support[i]);
            m.push_back(masses[i]);
            total += masses[i];
        }
        if (s.empty()) throw PreconditionError("distribution: no positive mass");
        if (std::abs(total - 1.0) > kMassTolerance) {
            throw PreconditionError("distribution: masses sum to " + std::to_string(total) + ", not 1");
        }
        support_ = std::move(s);
        masses_ = std::move(m);
    }

    static DiscreteDistribution point(double value) { return DiscreteDistribution({value}, {1.0}); }

    /// Builds a distribution from unnormalized (value, weight) pairs in any
    /// order; duplicate values are merged and the result is normalized.
    static DiscreteDistribution from_weights(std::vector<std::pair<double, double>> points) {
        std::sort(points.begin(), points.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> s;
        std::vector<double> w;
        double total = 0.0;
        for (const auto& [v, weight] : points) {
            if (!(weight >= 0.0) || !std::isfinite(weight)) {
                throw PreconditionError("distribution: weights must be finite and non-negative");
            }
            if (weight == 0.0) continue;
            if (!s.empty() && s.back() == v) {
                w.back() += weight;
            } else {
                s.push_back(v);
                w.push_back(weight);
            }
            total += weight;
        }
        if (s.empty()) throw PreconditionError("distribution: no positive weight");
        for (auto& x : w) x /= total;
        return normalized_unchecked(std::move(s), std::move(w));
    }

    /// Empirical pmf of integer observations given as (value, count) pairs
    /// sorted by value.
    static DiscreteDistribution from_counts(std::span<const std::pair<std::int64_t, std::int64_t>> counts) {
        std::vector<double> s;
        std::vector<double> w;
        double total = 0.0;
        for (const auto& [v, c] : counts) {
            if (c <= 0) continue;
            if (!s.empty() && !(static_cast<double>(v) > s.back())) {
                throw PreconditionError("distribution: counts must be sorted by value");
            }
            s.push_back(static_cast<double>(v));
            w.push_back(static_cast<double>(c));
            total += static_cast<double>(c);
        }
        if (s.empty()) throw PreconditionError("distribution: no observations");
        for (auto& x : w) x /= total;
        return normalized_unchecked(std::move(s), std::move(w));
    }

    /// Uniform over the integers lo..hi inclusive.
    static DiscreteDistribution uniform_integers(std::int64_t lo, std::int64_t hi) {
        if (hi < lo || lo < 0) throw PreconditionError("distribution: empty uniform range");
        const auto n = static_cast<std::size_t>(hi - lo + 1);
        std::vector<double> s(n);
        std::vector<double> m(n, 1.0 / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(lo + static_cast<std::int64_t>(i));
        return normalized_unchecked(std::move(s), std::move(m));
    }

    bool empty() const noexcept { return support_.empty(); }
    std::size_t size() const noexcept { return support_.size(); }
    std::span<const double> support() const noexcept { return support_; }
    std::span<const double> masses() const noexcept { return masses_; }
    double min() const { return support_.front(); }
    double max() const { return support_.back(); }

    double mean() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i) acc += support_[i] * masses_[i];
        return acc;
    }

    double total_mass() const { return std::accumulate(masses_.begin(), masses_.end(), 0.0); }

    /// Mass at exactly `value` (zero when off-support).
    double mass_at(double value) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), value);
        if (it == support_.end() || *it != value) return 0.0;
        return masses_[static_cast<std::size_t>(it - support_.begin())];
    }

    DiscreteDistribution scaled(double k) const {
        if (!(k > 0.0)) throw PreconditionError("distribution: scale factor must be positive");
        std::vector<double> s(support_);
        for (auto& v : s) v *= k;
        return normalized_unchecked(std::move(s), masses_);
    }

    friend bool operator==(const DiscreteDistribution&, const DiscreteDistribution&) = default;

    /// Skips validation; callers guarantee the invariants.
    static DiscreteDistribution normalized_unchecked(std::vector<double> support, std::vector<double> masses) {
        DiscreteDistribution d;
        d.support_ = std::move(support);
        d.masses_ = std::move(masses);
        return d;
    }

private:
    std::vector<double> support_;
    std::vector<double> masses_;
};

/// Total-variation distance: half the L1 distance over the union support.
inline double total_variation(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    const auto sa = a.support();
    const auto ma = a.masses();
    const auto sb = b.support();
    const auto mb = b.masses();
    std::size_t i = 0;
    std::size_t j = 0;
    double acc = 0.0;
    while (i < sa.size() || j < sb.size()) {
        if (j == sb.size() || (i < sa.size() && sa[i] < sb[j])) {
            acc += ma[i++];
        } else if (i == sa.size() || sb[j] < sa[i]) {
            acc += mb[j++];
        } else {
            acc += std::abs(ma[i++] - mb[j++]);
        }
    }
    return std::clamp(0.5 * acc, 0.0, 1.0);
}

}  // namespace distsched
