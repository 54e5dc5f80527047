// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "distsched/distribution.hpp"
#include "distsched/error.hpp"

namespace distsched {

enum class CostKind {
    ResourceBound,  // O^2/2 + I*O: memory-time (or compute-time) of the decode phase
    OutputOnly,     // O
    WeightedSum,    // w_in*I + w_out*O
};

/// Scheduling cost is dimensionless; the memory-time and compute-time units
/// only scale it and live in the backend time model instead.
struct CostModel {
    CostKind kind = CostKind::ResourceBound;
    double w_in = 1.0;
    double w_out = 2.0;
};

inline std::string to_string(CostKind k) {
    switch (k) {
        case CostKind::ResourceBound: return "resource-bound";
        case CostKind::OutputOnly: return "output-only";
        case CostKind::WeightedSum: return "weighted-sum";
    }
    return "?";
}

inline CostKind parse_cost_kind(const std::string& s) {
    for (auto k : {CostKind::ResourceBound, CostKind::OutputOnly, CostKind::WeightedSum}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("cost.kind", "unknown cost model '" + s + "'");
}

inline void validate(const CostModel& m) {
    if (!(m.w_in > 0.0)) throw ConfigError("cost.w_in", "must be > 0");
    if (!(m.w_out > 0.0)) throw ConfigError("cost.w_out", "must be > 0");
}

inline double cost(const CostModel& m, double input_len, double output_len) {
    if (!(input_len >= 1.0)) throw PreconditionError("cost: input length must be >= 1");
    if (!(output_len >= 0.0)) throw PreconditionError("cost: output length must be >= 0");
    switch (m.kind) {
        case CostKind::ResourceBound: return output_len * output_len / 2.0 + input_len * output_len;
        case CostKind::OutputOnly: return output_len;
        case CostKind::WeightedSum: return m.w_in * input_len + m.w_out * output_len;
    }
    return 0.0;
}

inline double cost(CostKind kind, double input_len, double output_len) {
    return cost(CostModel{kind}, input_len, output_len);
}

/// Calls f with a check-free callable x -> cost(m, input_len, x), so loops
/// over many lengths pay for the dispatch once.
template <class F>
decltype(auto) with_cost_fn(const CostModel& m, double input_len, F&& f) {
    if (!(input_len >= 1.0)) throw PreconditionError("cost: input length must be >= 1");
    switch (m.kind) {
        case CostKind::ResourceBound:
            return f([input_len](double x) { return x * x / 2.0 + input_len * x; });
        case CostKind::OutputOnly:
            return f([](double x) { return x; });
        case CostKind::WeightedSum:
            return f([a = m.w_in * input_len, b = m.w_out](double x) { return a + b * x; });
    }
    throw PreconditionError("cost: unknown cost kind");
}

/// Closed-form difference cost(O_total) - cost(o_served). For integer lengths
/// below 2^26 every intermediate is an exact double, so
/// remaining + cost(o_served) == cost(O_total) holds bit-for-bit.
inline double remaining_cost(const CostModel& m, double input_len, double output_total, double served) {
    if (!(served >= 0.0)) throw PreconditionError("remaining_cost: served must be >= 0");
    if (served > output_total) throw PreconditionError("remaining_cost: served exceeds total output");
    return cost(m, input_len, output_total) - cost(m, input_len, served);
}

/// Cost expended since admission after `generated` tokens. Equals
/// cost(I, g) for the resource-bound and output-only models; for the weighted
/// sum the input term counts as not-yet-served so it stays in the priority.
inline double attained_cost(const CostModel& m, double input_len, double generated) {
    return cost(m, input_len, generated) - cost(m, input_len, 0.0);
}

/// Pushforward of an output-length law through O -> cost(I, O). Cost is
/// strictly increasing in O, so masses carry over point for point.
inline DiscreteDistribution cost_distribution(const CostModel& m, double input_len, const DiscreteDistribution& lengths) {
    std::vector<double> support(lengths.support().begin(), lengths.support().end());
    for (auto& v : support) v = cost(m, input_len, v);
    std::vector<double> masses(lengths.masses().begin(), lengths.masses().end());
    return DiscreteDistribution::normalized_unchecked(std::move(support), std::move(masses));
}

}  // namespace distsched
