// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "distsched/cost.hpp"
#include "distsched/distribution.hpp"
#include "distsched/error.hpp"

namespace distsched {

struct GittinsConfig {
    /// Refresh granularity in generated tokens.
    std::int64_t bucket_size_tokens = 200;
    /// When > 0, overrides bucket_size_tokens per request: the predicted
    /// length range is split into this many equal buckets.
    std::int64_t bucket_count = 0;
    /// Cost distributions larger than this are coarsened before indexing.
    std::size_t max_support_points = 4096;
};

inline void validate(const GittinsConfig& cfg) {
    if (cfg.bucket_size_tokens < 1) throw ConfigError("gittins.bucket_size", "must be >= 1");
    if (cfg.bucket_count < 0) throw ConfigError("gittins.bucket_count", "must be >= 0");
    if (cfg.max_support_points < 2) throw ConfigError("gittins.max_support_points", "must be >= 2");
}

struct ServiceProgress {
    std::int64_t tokens_generated = 0;
    double attained_cost = 0.0;
    std::int64_t current_bucket = 0;
};

/// The conditioned law is empty: every hypothesis has already completed.
class AlreadyComplete : public PreconditionError {
public:
    AlreadyComplete() : PreconditionError("already complete under every hypothesis: P(X > attained) = 0") {}
};

/// Gittins index inf_{D>0} E[min(X, D)] / P(X <= D).
///
/// Between consecutive support points the numerator grows linearly while the
/// denominator is constant, so the infimum is attained at a support point and
/// a single pass over the support suffices.
namespace detail {

/// Index of the law with points value(k) and masses ps[k] * scale for
/// k >= first, evaluated without materializing it. value must be increasing.
template <class Value>
double gittins_scan(std::span<const double> ps, std::size_t first, double scale, Value value) {
    const std::size_t n = ps.size();
    double best = std::numeric_limits<double>::infinity();
    // ratio at point k given E[X; X <= x_k] and P(X <= x_k); scaled masses sum
    // to one up to rounding and the last point sees exactly zero tail.
    auto ratio = [n](std::size_t k, double x, double served, double done) {
        const double tail = k + 1 == n ? 0.0 : std::max(0.0, 1.0 - done);
        return (served + x * tail) / done;
    };
    // Two interleaved prefix scans halve the loop-carried dependency chain; the
    // second starts from the first half's totals.
    const std::size_t half = (n - first) / 2;
    const std::size_t mid = first + half;
    double sv[4] = {0.0, 0.0, 0.0, 0.0};
    double dn[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t k0 = first;
    for (; k0 + 4 <= mid; k0 += 4) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double p = ps[k0 + j] * scale;
            sv[j] += p * value(k0 + j);
            dn[j] += p;
        }
    }
    for (; k0 < mid; ++k0) {
        const double p = ps[k0] * scale;
        sv[0] += p * value(k0);
        dn[0] += p;
    }
    double served_b = (sv[0] + sv[1]) + (sv[2] + sv[3]);
    double done_b = (dn[0] + dn[1]) + (dn[2] + dn[3]);
    double served_a = 0.0;
    double done_a = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t ka = first + i;
        const std::size_t kb = mid + i;
        const double pa = ps[ka] * scale;
        const double pb = ps[kb] * scale;
        const double xa = value(ka);
        const double xb = value(kb);
        served_a += pa * xa;
        done_a += pa;
        served_b += pb * xb;
        done_b += pb;
        best = std::min(best, std::min(ratio(ka, xa, served_a, done_a), ratio(kb, xb, served_b, done_b)));
    }
    for (std::size_t k = mid + half; k < n; ++k) {
        const double p = ps[k] * scale;
        const double x = value(k);
        served_b += p * x;
        done_b += p;
        best = std::min(best, ratio(k, x, served_b, done_b));
    }
    return best;
}

}  // namespace detail

inline double gittins_index(const DiscreteDistribution& d) {
    if (d.empty()) throw PreconditionError("gittins_index: empty distribution");
    if (d.min() <= 0.0) throw PreconditionError("gittins_index: support values must be > 0");
    const auto xs = d.support();
    // The threshold at the largest point gives the mean itself; taking it as
    // d.mean() keeps G(d) <= mean(d) exact under rounding.
    return std::min(d.mean(), detail::gittins_scan(d.masses(), 0, 1.0, [&](std::size_t k) { return xs[k]; }));
}

/// Law of X - a given X > a.
inline DiscreteDistribution condition_on_attained(const DiscreteDistribution& d, double attained) {
    if (!(attained >= 0.0)) throw PreconditionError("condition_on_attained: attained must be >= 0");
    if (attained == 0.0) return d;
    const auto xs = d.support();
    const auto ps = d.masses();
    const auto first = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), attained) - xs.begin());
    if (first == xs.size()) throw AlreadyComplete();
    double survive = 0.0;
    for (std::size_t k = first; k < xs.size(); ++k) survive += ps[k];
    std::vector<double> s;
    std::vector<double> m;
    s.reserve(xs.size() - first);
    m.reserve(xs.size() - first);
    for (std::size_t k = first; k < xs.size(); ++k) {
        s.push_back(xs[k] - attained);
        m.push_back(ps[k] / survive);
    }
    return DiscreteDistribution::normalized_unchecked(std::move(s), std::move(m));
}

inline std::int64_t bucket_of(std::int64_t tokens, std::int64_t bucket_size) { return tokens / bucket_size; }

/// True when moving from progress.tokens_generated to g_new crosses at least
/// one bucket boundary.
inline bool refresh_due(const ServiceProgress& progress, std::int64_t g_new, std::int64_t bucket_size_tokens) {
    if (g_new < progress.tokens_generated) throw PreconditionError("refresh_due: progress cannot go backwards");
    if (bucket_size_tokens < 1) throw PreconditionError("refresh_due: bucket size must be >= 1");
    return bucket_of(g_new, bucket_size_tokens) > progress.current_bucket;
}

/// Per-request bucket size in tokens, honoring bucket_count mode.
inline std::int64_t bucket_size_for(const GittinsConfig& cfg, const DiscreteDistribution& predicted_lengths) {
    if (cfg.bucket_count <= 0) return cfg.bucket_size_tokens;
    const auto range = static_cast<std::int64_t>(std::ceil(predicted_lengths.max()));
    return std::max<std::int64_t>(1, (range + cfg.bucket_count - 1) / cfg.bucket_count);
}

/// Merges adjacent support points into at most `max_points` equal-mass
/// quantile bins, each represented by its conditional mean. Total mass and
/// the overall mean are preserved.
inline DiscreteDistribution coarsen(DiscreteDistribution d, std::size_t max_points) {
    if (max_points < 2) throw PreconditionError("coarsen: max_points must be >= 2");
    if (d.size() <= max_points) return d;
    const auto xs = d.support();
    const auto ps = d.masses();
    const double m = static_cast<double>(max_points);
    std::vector<double> s;
    std::vector<double> w;
    s.reserve(max_points);
    w.reserve(max_points);
    double before = 0.0;
    std::size_t current_bin = std::numeric_limits<std::size_t>::max();
    double bin_mass = 0.0;
    double bin_moment = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto bin = std::min(static_cast<std::size_t>(before * m), max_points - 1);
        if (bin != current_bin && bin_mass > 0.0) {
            s.push_back(bin_moment / bin_mass);
            w.push_back(bin_mass);
            bin_mass = 0.0;
            bin_moment = 0.0;
        }
        current_bin = bin;
        bin_mass += ps[k];
        bin_moment += ps[k] * xs[k];
        before += ps[k];
    }
    s.push_back(bin_moment / bin_mass);
    w.push_back(bin_mass);
    return DiscreteDistribution::normalized_unchecked(std::move(s), std::move(w));
}

/// Remaining-cost law of a request that has generated `generated` tokens:
/// condition the cost law on the output exceeding `generated`, measured from
/// admission. When every hypothesis is already exceeded, fall back to one
/// bucket's worth of additional cost so the request stays schedulable.
inline DiscreteDistribution remaining_cost_distribution(const CostModel& model, double input_len, std::int64_t generated,
                                                        const DiscreteDistribution& cost_law,
                                                        std::int64_t bucket_size_tokens) {
    const double g = static_cast<double>(generated);
    const double threshold = cost(model, input_len, g);
    const double offset = cost(model, input_len, 0.0);
    if (generated == 0 && offset == 0.0) return cost_law;
    try {
        auto cond = condition_on_attained(cost_law, threshold);
        if (offset == 0.0) return cond;
        std::vector<double> s(cond.support().begin(), cond.support().end());
        for (auto& v : s) v += offset;
        return DiscreteDistribution::normalized_unchecked(std::move(s),
                                                          {cond.masses().begin(), cond.masses().end()});
    } catch (const AlreadyComplete&) {
        const double extra = remaining_cost(model, input_len, g + static_cast<double>(bucket_size_tokens), g);
        return DiscreteDistribution::point(extra);
    }
}

/// gittins_index(remaining_cost_distribution(...)) without building the law.
inline double remaining_cost_gittins(const CostModel& model, double input_len, std::int64_t generated,
                                     const DiscreteDistribution& cost_law, std::int64_t bucket_size_tokens) {
    const double g = static_cast<double>(generated);
    const double threshold = cost(model, input_len, g);
    const double offset = cost(model, input_len, 0.0);
    const auto xs = cost_law.support();
    const auto ps = cost_law.masses();
    const auto first = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), threshold) - xs.begin());
    if (generated == 0 && offset == 0.0) return gittins_index(cost_law);
    if (first == xs.size()) return remaining_cost(model, input_len, g + static_cast<double>(bucket_size_tokens), g);
    double survive = 0.0;
    for (std::size_t k = first; k < xs.size(); ++k) survive += ps[k];
    if (xs[first] - threshold + offset <= 0.0) throw PreconditionError("gittins_index: support values must be > 0");
    const double shift = offset - threshold;
    return detail::gittins_scan(ps, first, 1.0 / survive, [&](std::size_t k) { return xs[k] + shift; });
}

/// remaining_cost_distribution(...).mean() without building the law.
inline double remaining_cost_mean(const CostModel& model, double input_len, std::int64_t generated,
                                  const DiscreteDistribution& cost_law, std::int64_t bucket_size_tokens) {
    const double g = static_cast<double>(generated);
    const double threshold = cost(model, input_len, g);
    const double offset = cost(model, input_len, 0.0);
    if (generated == 0 && offset == 0.0) return cost_law.mean();
    const auto xs = cost_law.support();
    const auto ps = cost_law.masses();
    const auto first = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), threshold) - xs.begin());
    if (first == xs.size()) return remaining_cost(model, input_len, g + static_cast<double>(bucket_size_tokens), g);
    double survive = 0.0;
    double moment = 0.0;
    for (std::size_t k = first; k < xs.size(); ++k) {
        survive += ps[k];
        moment += ps[k] * (xs[k] - threshold + offset);
    }
    return moment / survive;
}

/// remaining_cost_gittins over the cost law induced by a length law, without
/// building it. Cost is increasing in output length, so conditioning on cost
/// above cost(generated) is conditioning on length above `generated`.
inline double remaining_cost_gittins_from_lengths(const CostModel& model, double input_len, std::int64_t generated,
                                                  const DiscreteDistribution& lengths,
                                                  std::int64_t bucket_size_tokens) {
    const double g = static_cast<double>(generated);
    const auto xs = lengths.support();
    const auto ps = lengths.masses();
    const auto first = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), g) - xs.begin());
    if (first == xs.size()) return remaining_cost(model, input_len, g + static_cast<double>(bucket_size_tokens), g);
    const double shift = cost(model, input_len, 0.0) - cost(model, input_len, g);
    if (cost(model, input_len, xs[first]) + shift <= 0.0) {
        throw PreconditionError("gittins_index: support values must be > 0");
    }
    double survive = 1.0;
    if (first > 0) {
        survive = 0.0;
        for (std::size_t k = first; k < xs.size(); ++k) survive += ps[k];
    }
    return with_cost_fn(model, input_len, [&](auto c) {
        return detail::gittins_scan(ps, first, 1.0 / survive, [&](std::size_t k) { return c(xs[k]) + shift; });
    });
}

/// remaining_cost_mean over the cost law induced by a length law.
inline double remaining_cost_mean_from_lengths(const CostModel& model, double input_len, std::int64_t generated,
                                               const DiscreteDistribution& lengths, std::int64_t bucket_size_tokens) {
    const double g = static_cast<double>(generated);
    const auto xs = lengths.support();
    const auto ps = lengths.masses();
    const auto first = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), g) - xs.begin());
    if (first == xs.size()) return remaining_cost(model, input_len, g + static_cast<double>(bucket_size_tokens), g);
    const double shift = cost(model, input_len, 0.0) - cost(model, input_len, g);
    return with_cost_fn(model, input_len, [&](auto c) {
        double survive = 0.0;
        double moment = 0.0;
        for (std::size_t k = first; k < xs.size(); ++k) {
            survive += ps[k];
            moment += ps[k] * (c(xs[k]) + shift);
        }
        return moment / survive;
    });
}

}  // namespace distsched
