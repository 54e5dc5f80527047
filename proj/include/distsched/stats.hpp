// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "distsched/error.hpp"

namespace distsched {

/// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (!(q >= 0.0 && q <= 1.0)) throw PreconditionError("percentile: q must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double mean(std::span<const double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

struct SignTest {
    std::int64_t wins = 0;
    std::int64_t losses = 0;
    std::int64_t ties = 0;
    /// One-sided P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
    double p_value = 1.0;
};

inline double binomial_upper_tail(std::int64_t n, std::int64_t k) {
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    double acc = 0.0;
    for (std::int64_t i = k; i <= n; ++i) {
        const double log_term = std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(i + 1)) -
                                std::lgamma(static_cast<double>(n - i + 1)) - static_cast<double>(n) * std::log(2.0);
        acc += std::exp(log_term);
    }
    return std::min(1.0, acc);
}

/// Paired one-sided sign test of "a is smaller than b"; ties are dropped.
inline SignTest sign_test_less(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionError("sign test: samples must be paired");
    SignTest t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) {
            ++t.wins;
        } else if (a[i] > b[i]) {
            ++t.losses;
        } else {
            ++t.ties;
        }
    }
    t.p_value = binomial_upper_tail(t.wins + t.losses, t.wins);
    return t;
}

}  // namespace distsched
