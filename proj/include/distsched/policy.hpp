// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>

#include "distsched/cost.hpp"
#include "distsched/distribution.hpp"
#include "distsched/error.hpp"
#include "distsched/gittins.hpp"
#include "distsched/workload.hpp"

namespace distsched {

enum class PolicyKind {
    FCFS,
    MLFQ,
    SJFPoint,          // cost of the point-predicted length, fixed at admission
    Mean,              // mean remaining cost, refreshed at bucket boundaries
    Gittins,           // Gittins index of the remaining cost, refreshed at bucket boundaries
    GittinsNoRefresh,  // Gittins index at admission only
    SRPTOracle,        // true remaining cost, every iteration
};

struct MlfqConfig {
    std::int64_t q0 = 64;
    int n_levels = 8;
    std::int64_t demotion_factor = 2;
};

struct PolicyConfig {
    PolicyKind kind = PolicyKind::Gittins;
    MlfqConfig mlfq;
};

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::FCFS: return "fcfs";
        case PolicyKind::MLFQ: return "mlfq";
        case PolicyKind::SJFPoint: return "sjf-point";
        case PolicyKind::Mean: return "mean";
        case PolicyKind::Gittins: return "gittins";
        case PolicyKind::GittinsNoRefresh: return "gittins-norefresh";
        case PolicyKind::SRPTOracle: return "srpt-oracle";
    }
    return "?";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
    for (auto k : {PolicyKind::FCFS, PolicyKind::MLFQ, PolicyKind::SJFPoint, PolicyKind::Mean, PolicyKind::Gittins,
                   PolicyKind::GittinsNoRefresh, PolicyKind::SRPTOracle}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("policy.kind", "unknown policy '" + s + "'");
}

inline void validate(const PolicyConfig& cfg) {
    if (cfg.mlfq.q0 < 1) throw ConfigError("policy.mlfq.q0", "must be >= 1 token");
    if (cfg.mlfq.n_levels < 2) throw ConfigError("policy.mlfq.levels", "must be >= 2");
    if (cfg.mlfq.demotion_factor < 2) throw ConfigError("policy.mlfq.factor", "must be >= 2");
}

inline bool uses_prediction(PolicyKind k) {
    return k == PolicyKind::SJFPoint || k == PolicyKind::Mean || k == PolicyKind::Gittins ||
           k == PolicyKind::GittinsNoRefresh;
}

inline bool refreshes_at_buckets(PolicyKind k) { return k == PolicyKind::Mean || k == PolicyKind::Gittins; }

/// Smaller is served first; ties go to the earlier arrival, then lower id.
struct Priority {
    double primary = 0.0;
    double arrival = 0.0;
    std::uint64_t id = 0;

    friend bool operator<(const Priority& a, const Priority& b) {
        return std::tie(a.primary, a.arrival, a.id) < std::tie(b.primary, b.arrival, b.id);
    }
    friend bool operator==(const Priority&, const Priority&) = default;
};

/// MLFQ bookkeeping for one request: its level and the decode tokens served
/// at that level.
struct MlfqState {
    int level = 0;
    std::int64_t tokens_at_level = 0;
    friend bool operator==(const MlfqState&, const MlfqState&) = default;
};

inline std::int64_t mlfq_quantum(const MlfqConfig& cfg, int level) {
    std::int64_t q = cfg.q0;
    for (int l = 0; l < level; ++l) q *= cfg.demotion_factor;
    return q;
}

/// One served decode token; demotes when the level's quantum is used up.
inline MlfqState mlfq_on_token(const MlfqConfig& cfg, MlfqState s) {
    ++s.tokens_at_level;
    if (s.level + 1 < cfg.n_levels && s.tokens_at_level >= mlfq_quantum(cfg, s.level)) {
        ++s.level;
        s.tokens_at_level = 0;
    }
    return s;
}

/// Per-request prediction state fixed at admission. Small laws stay in length
/// units and are mapped to cost on demand; laws with more than
/// max_support_points points are stored as their coarsened cost law.
struct PredictionState {
    DiscreteDistribution law;
    double coarsened_mean_length = 0.0;  // mean of the length law, set when cost_units
    bool cost_units = false;  // true when `law` is the coarsened cost law
    std::int64_t bucket_size_tokens = 200;

    /// The cost law the policies rank by.
    DiscreteDistribution cost_law(const CostModel& model, double input_len) const {
        return cost_units ? law : cost_distribution(model, input_len, law);
    }

    double mean_length() const { return cost_units ? coarsened_mean_length : law.mean(); }
};

inline PredictionState make_prediction_state(const CostModel& model, const GittinsConfig& gcfg, double input_len,
                                             DiscreteDistribution lengths) {
    PredictionState s;
    s.bucket_size_tokens = bucket_size_for(gcfg, lengths);
    if (lengths.size() > gcfg.max_support_points) {
        s.coarsened_mean_length = lengths.mean();
        s.law = coarsen(cost_distribution(model, input_len, lengths), gcfg.max_support_points);
        s.cost_units = true;
    } else {
        s.law = std::move(lengths);
    }
    return s;
}

/// Remaining-cost Gittins index of a request with `generated` tokens.
inline double remaining_gittins(const CostModel& model, double input_len, std::int64_t generated,
                                const PredictionState& s) {
    return s.cost_units
               ? remaining_cost_gittins(model, input_len, generated, s.law, s.bucket_size_tokens)
               : remaining_cost_gittins_from_lengths(model, input_len, generated, s.law, s.bucket_size_tokens);
}

inline double remaining_mean(const CostModel& model, double input_len, std::int64_t generated,
                             const PredictionState& s) {
    return s.cost_units ? remaining_cost_mean(model, input_len, generated, s.law, s.bucket_size_tokens)
                        : remaining_cost_mean_from_lengths(model, input_len, generated, s.law, s.bucket_size_tokens);
}

/// Priority of one request under `cfg`. Pure: the MLFQ level travels in
/// `mlfq`, service history in `progress`.
inline Priority priority(const PolicyConfig& cfg, const Request& req, const ServiceProgress& progress,
                         const PredictionState* pred, const CostModel& model, const MlfqState& mlfq = {}) {
    Priority p{0.0, req.arrival_time, req.id};
    if (uses_prediction(cfg.kind) && (!pred || pred->law.empty())) {
        throw SchedulingError("policy " + to_string(cfg.kind) + " has no prediction for request " +
                              std::to_string(req.id));
    }
    const auto input = static_cast<double>(req.input_len);
    switch (cfg.kind) {
        case PolicyKind::FCFS:
            p.primary = req.arrival_time;
            break;
        case PolicyKind::MLFQ:
            p.primary = mlfq.level;
            break;
        case PolicyKind::SJFPoint:
            p.primary = cost(model, input, std::max(1.0, std::round(pred->mean_length())));
            break;
        case PolicyKind::Mean:
            p.primary = remaining_mean(model, input, progress.tokens_generated, *pred);
            break;
        case PolicyKind::Gittins:
            p.primary = remaining_gittins(model, input, progress.tokens_generated, *pred);
            break;
        case PolicyKind::GittinsNoRefresh:
            p.primary = remaining_gittins(model, input, 0, *pred);
            break;
        case PolicyKind::SRPTOracle:
            p.primary = cost(model, input, static_cast<double>(req.true_output_len)) -
                        attained_cost(model, input, static_cast<double>(progress.tokens_generated));
            break;
    }
    return p;
}

}  // namespace distsched
