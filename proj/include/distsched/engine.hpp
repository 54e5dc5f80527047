// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsched/cost.hpp"
#include "distsched/embedding.hpp"
#include "distsched/error.hpp"
#include "distsched/gittins.hpp"
#include "distsched/history.hpp"
#include "distsched/policy.hpp"
#include "distsched/predictor.hpp"
#include "distsched/run_log.hpp"
#include "distsched/workload.hpp"

namespace distsched {

/// Continuous-batching backend. One iteration over batch S takes
///   c0 + c1 * sum_S (I + g + 1) + c_pre * sum_{new in S} I + swap_penalty * #resumed
/// seconds, where g is the tokens generated before the iteration. Each bucket
/// refresh of a priority then adds refresh_cost seconds before the next one.
struct BackendConfig {
    std::int64_t kv_capacity_tokens = 8192;
    std::int64_t max_batch = 64;
    double c0 = 0.005;
    double c1 = 2e-6;
    double c_pre = 0.5e-6;
    double swap_penalty = 0.05;
    double refresh_cost = 0.0;
};

inline void validate(const BackendConfig& b) {
    if (b.kv_capacity_tokens < 1) throw ConfigError("backend.kv_capacity", "must be >= 1");
    if (b.max_batch < 1) throw ConfigError("backend.max_batch", "must be >= 1");
    if (!(b.c0 >= 0.0)) throw ConfigError("backend.c0", "must be >= 0");
    if (!(b.c1 >= 0.0)) throw ConfigError("backend.c1", "must be >= 0");
    if (!(b.c_pre >= 0.0)) throw ConfigError("backend.c_pre", "must be >= 0");
    if (!(b.swap_penalty >= 0.0)) throw ConfigError("backend.swap_penalty", "must be >= 0");
    if (!(b.refresh_cost >= 0.0)) throw ConfigError("backend.refresh_cost", "must be >= 0");
}

struct EngineConfig {
    BackendConfig backend;
    PolicyConfig policy;
    PredictorConfig predictor;
    CostModel cost;
    GittinsConfig gittins;
    EmbeddingConfig embedding;
    std::size_t history_capacity = HistoryWindow::kDefaultCapacity;
    /// Mix a 1:4 uniform law into every prediction.
    bool noise = false;
    std::int64_t o_max = 2048;
    double horizon = std::numeric_limits<double>::infinity();
};

enum class Phase { Pending, Waiting, Running, Preempted, Done };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::Pending: return "pending";
        case Phase::Waiting: return "waiting";
        case Phase::Running: return "running";
        case Phase::Preempted: return "preempted";
        case Phase::Done: return "done";
    }
    return "?";
}

/// Per-request outcome. Times are absolute simulated seconds; NaN when unset.
struct RequestRecord {
    std::uint64_t id = 0;
    std::optional<std::int32_t> cluster_id;
    double arrival = 0.0;
    double admit_time = std::numeric_limits<double>::quiet_NaN();
    double start_time = std::numeric_limits<double>::quiet_NaN();
    double first_token_time = std::numeric_limits<double>::quiet_NaN();
    double completion_time = std::numeric_limits<double>::quiet_NaN();
    std::int64_t input_len = 0;
    std::int64_t output_len = 0;
    std::int64_t preemptions = 0;
    std::int64_t refreshes = 0;
    bool fallback_used = false;
    /// TV distance between the predicted and true length law; NaN without ground truth.
    double prediction_tv = std::numeric_limits<double>::quiet_NaN();

    double ttft() const { return first_token_time - arrival; }
    double ttlt() const { return completion_time - arrival; }
};

struct RunStats {
    std::uint64_t iterations = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t resumes = 0;
    std::uint64_t refreshes = 0;
    double final_clock = 0.0;
    /// Wall-clock seconds spent in prediction and ordering. Not deterministic.
    double scheduling_seconds = 0.0;
};

struct RunResult {
    std::vector<RequestRecord> requests;  // trace order
    RunStats stats;
    RunLog log;
    bool complete = true;
    std::vector<std::uint64_t> unfinished;
};

/// Discrete-event simulation of one trace under one configuration. Strictly
/// single-threaded and deterministic.
class Simulator {
public:
    Simulator(EngineConfig cfg, std::vector<Request> trace, std::vector<DiscreteDistribution> cluster_laws = {},
              const std::vector<HistoryRecord>& warm_start = {})
        : cfg_(std::move(cfg)),
          trace_(std::move(trace)),
          laws_(std::move(cluster_laws)),
          window_(cfg_.history_capacity, cfg_.embedding.dim) {
        validate(cfg_.backend);
        validate(cfg_.policy);
        validate(cfg_.predictor);
        validate(cfg_.cost);
        validate(cfg_.gittins);
        validate(cfg_.embedding);
        std::stable_sort(trace_.begin(), trace_.end(), [](const Request& a, const Request& b) {
            return a.arrival_time < b.arrival_time || (a.arrival_time == b.arrival_time && a.id < b.id);
        });
        const auto k = cfg_.backend.kv_capacity_tokens;
        for (const auto& r : trace_) {
            validate_request(r);
            if (r.input_len + 1 > k || r.input_len + r.true_output_len > k) {
                throw ConfigError("backend.kv_capacity", "request " + std::to_string(r.id) +
                                                             " cannot fit: needs " +
                                                             std::to_string(r.input_len + r.true_output_len) +
                                                             " KV tokens, capacity is " + std::to_string(k));
            }
        }
        for (const auto& rec : warm_start) window_.push(rec);

        const std::size_t n = trace_.size();
        phase_.assign(n, Phase::Pending);
        progress_.assign(n, ServiceProgress{});
        mlfq_.assign(n, MlfqState{});
        prio_.assign(n, Priority{});
        pred_.resize(n);
        embeddings_.resize(n);
        prefilled_.assign(n, false);
        records_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = trace_[i];
            auto& rec = records_[i];
            rec.id = r.id;
            rec.cluster_id = r.cluster_id;
            rec.arrival = r.arrival_time;
            rec.input_len = r.input_len;
            rec.output_len = r.true_output_len;
        }
        track_history_ = cfg_.predictor.kind == PredictorKind::SemanticHistory ||
                         cfg_.predictor.kind == PredictorKind::LengthHistory ||
                         cfg_.predictor.kind == PredictorKind::PointMean;
    }

    /// JSON Lines event stream; pass nullptr to disable.
    void set_event_log(std::ostream* out) { events_ = out; }

    double clock() const noexcept { return clock_; }
    bool finished() const noexcept { return done_ == trace_.size(); }
    const std::vector<Request>& trace() const noexcept { return trace_; }
    Phase phase(std::size_t i) const { return phase_[i]; }
    std::int64_t generated(std::size_t i) const { return progress_[i].tokens_generated; }
    const Priority& current_priority(std::size_t i) const { return prio_[i]; }
    const HistoryWindow& history() const noexcept { return window_; }
    const std::vector<std::size_t>& last_batch() const noexcept { return batch_; }

    /// KV tokens held by running requests.
    std::int64_t ledger_tokens() const {
        std::int64_t total = 0;
        for (std::size_t i : active_) {
            if (phase_[i] == Phase::Running) total += trace_[i].input_len + progress_[i].tokens_generated;
        }
        return total;
    }

    std::size_t running_count() const {
        return static_cast<std::size_t>(
            std::count_if(active_.begin(), active_.end(), [&](std::size_t i) { return phase_[i] == Phase::Running; }));
    }

    /// Runs one iteration. Returns false once every request is done.
    bool step() {
        if (finished()) return false;
        const auto t0 = std::chrono::steady_clock::now();
        if (active_.empty() && next_arrival_ < trace_.size() && trace_[next_arrival_].arrival_time > clock_) {
            clock_ = trace_[next_arrival_].arrival_time;
        }
        admit_arrivals();

        order_.assign(active_.begin(), active_.end());
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return prio_[a] < prio_[b]; });

        const auto& be = cfg_.backend;
        batch_.clear();
        std::int64_t used = 0;
        for (std::size_t i : order_) {
            if (static_cast<std::int64_t>(batch_.size()) >= be.max_batch) break;
            const std::int64_t projected = trace_[i].input_len + progress_[i].tokens_generated + 1;
            if (used + projected > be.kv_capacity_tokens) break;
            batch_.push_back(i);
            used += projected;
        }
        if (batch_.empty()) throw SchedulingError("no request fits the KV capacity");
        stats_.scheduling_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        selected_.assign(trace_.size(), false);
        for (std::size_t i : batch_) selected_[i] = true;
        for (std::size_t i : active_) {
            if (phase_[i] == Phase::Running && !selected_[i]) {
                phase_[i] = Phase::Preempted;
                ++records_[i].preemptions;
                ++stats_.preemptions;
                emit("preempt", i, nlohmann::json(progress_[i].tokens_generated));
            }
        }

        double duration = be.c0;
        for (std::size_t i : batch_) {
            const auto& r = trace_[i];
            duration += be.c1 * static_cast<double>(r.input_len + progress_[i].tokens_generated + 1);
            if (!prefilled_[i]) {
                duration += be.c_pre * static_cast<double>(r.input_len);
                prefilled_[i] = true;
                records_[i].start_time = clock_;
                emit("prefill", i, nlohmann::json(r.input_len));
            } else if (phase_[i] == Phase::Preempted) {
                duration += be.swap_penalty;
                ++stats_.resumes;
                emit("resume", i, nullptr);
            }
            phase_[i] = Phase::Running;
        }
        clock_ += duration;
        ++stats_.iterations;

        const std::uint64_t refreshes_before = stats_.refreshes;
        bool any_done = false;
        for (std::size_t i : batch_) any_done |= advance_token(i);
        clock_ += be.refresh_cost * static_cast<double>(stats_.refreshes - refreshes_before);
        if (any_done) {
            active_.erase(std::remove_if(active_.begin(), active_.end(),
                                         [&](std::size_t i) { return phase_[i] == Phase::Done; }),
                          active_.end());
        }
        if (ledger_tokens() > be.kv_capacity_tokens) throw SchedulingError("KV ledger exceeds capacity");

        stats_.final_clock = clock_;
        if (!finished() && clock_ > cfg_.horizon) throw HorizonExceeded(cfg_.horizon, unfinished_ids());
        return !finished();
    }

    /// Steps to completion. Throws HorizonExceeded when the clock passes the
    /// horizon; result() then holds the partial outcome.
    RunResult run() {
        while (step()) {
        }
        return result();
    }

    RunResult result() const {
        RunResult out;
        out.requests = records_;
        out.stats = stats_;
        out.log = log_;
        out.complete = finished();
        if (!out.complete) out.unfinished = unfinished_ids();
        return out;
    }

    std::vector<std::uint64_t> unfinished_ids() const {
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < trace_.size(); ++i) {
            if (phase_[i] != Phase::Done) ids.push_back(trace_[i].id);
        }
        return ids;
    }

private:
    void emit(const char* event, std::size_t i, nlohmann::json detail) {
        if (!events_) return;
        nlohmann::json j;
        j["clock"] = clock_;
        j["event"] = event;
        j["request_id"] = trace_[i].id;
        j["detail"] = std::move(detail);
        *events_ << j.dump() << '\n';
    }

    const DiscreteDistribution* fallback() {
        if (window_.empty()) return nullptr;
        if (!fallback_ || fallback_version_ != window_.version()) {
            fallback_ = window_.empirical_lengths();
            fallback_version_ = window_.version();
        }
        return &*fallback_;
    }

    void admit_arrivals() {
        const std::size_t first = next_arrival_;
        while (next_arrival_ < trace_.size() && trace_[next_arrival_].arrival_time <= clock_) {
            const std::size_t i = next_arrival_++;
            phase_[i] = Phase::Waiting;
            records_[i].admit_time = clock_;
            active_.push_back(i);
            emit("admit", i, nullptr);
        }
        if (first == next_arrival_) return;

        std::vector<const Request*> reqs;
        std::vector<const Embedding*> embs;
        for (std::size_t i = first; i < next_arrival_; ++i) {
            reqs.push_back(&trace_[i]);
            if (needs_embedding(cfg_.predictor.kind)) {
                embeddings_[i] = embed(trace_[i].prompt_tokens, cfg_.embedding);
                embs.push_back(&*embeddings_[i]);
            }
        }
        PredictionContext ctx{&window_, fallback(), laws_, &log_};
        auto preds = predict_batch(cfg_.predictor, reqs, embs, ctx);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            const std::size_t i = first + k;
            const auto& r = trace_[i];
            auto lengths = std::move(preds[k].lengths);
            if (cfg_.noise) lengths = inject_noise(lengths, cfg_.o_max);
            records_[i].fallback_used = preds[k].fallback_used;
            if (r.cluster_id && *r.cluster_id >= 0 && static_cast<std::size_t>(*r.cluster_id) < laws_.size()) {
                records_[i].prediction_tv = total_variation(lengths, laws_[static_cast<std::size_t>(*r.cluster_id)]);
            }
            pred_[i] = make_prediction_state(cfg_.cost, cfg_.gittins, static_cast<double>(r.input_len),
                                             std::move(lengths));
            prio_[i] = priority(cfg_.policy, r, progress_[i], &pred_[i], cfg_.cost, mlfq_[i]);
        }
    }

    // Returns true when the request completed.
    bool advance_token(std::size_t i) {
        const auto& r = trace_[i];
        auto& prog = progress_[i];
        const std::int64_t g_new = prog.tokens_generated + 1;
        bool recompute = false;
        const auto kind = cfg_.policy.kind;
        if (refreshes_at_buckets(kind) && refresh_due(prog, g_new, pred_[i].bucket_size_tokens)) {
            prog.current_bucket = bucket_of(g_new, pred_[i].bucket_size_tokens);
            recompute = true;
        }
        prog.tokens_generated = g_new;
        prog.attained_cost = attained_cost(cfg_.cost, static_cast<double>(r.input_len), static_cast<double>(g_new));
        if (kind == PolicyKind::MLFQ) {
            const int before = mlfq_[i].level;
            mlfq_[i] = mlfq_on_token(cfg_.policy.mlfq, mlfq_[i]);
            recompute = mlfq_[i].level != before;
        }
        if (kind == PolicyKind::SRPTOracle) recompute = true;

        if (g_new == 1) {
            records_[i].first_token_time = clock_;
        }
        if (g_new == r.true_output_len) {
            phase_[i] = Phase::Done;
            records_[i].completion_time = clock_;
            ++done_;
            emit("done", i, nullptr);
            if (track_history_) {
                Embedding e = embeddings_[i] ? std::move(*embeddings_[i]) : embed(r.prompt_tokens, cfg_.embedding);
                embeddings_[i].reset();
                window_.push(std::move(e), r.input_len, r.true_output_len);
            }
            pred_[i] = PredictionState{};
            return true;
        }
        emit("token", i, nlohmann::json(g_new));
        if (recompute) {
            const auto t0 = std::chrono::steady_clock::now();
            prio_[i] = priority(cfg_.policy, r, prog, &pred_[i], cfg_.cost, mlfq_[i]);
            stats_.scheduling_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (refreshes_at_buckets(kind)) {
                ++records_[i].refreshes;
                ++stats_.refreshes;
                emit("refresh", i, nlohmann::json(prio_[i].primary));
            }
        }
        return false;
    }

    EngineConfig cfg_;
    std::vector<Request> trace_;
    std::vector<DiscreteDistribution> laws_;
    HistoryWindow window_;
    bool track_history_ = false;

    double clock_ = 0.0;
    std::size_t next_arrival_ = 0;
    std::size_t done_ = 0;
    std::vector<Phase> phase_;
    std::vector<ServiceProgress> progress_;
    std::vector<MlfqState> mlfq_;
    std::vector<Priority> prio_;
    std::vector<PredictionState> pred_;
    std::vector<std::optional<Embedding>> embeddings_;
    std::vector<bool> prefilled_;
    std::vector<RequestRecord> records_;
    std::vector<std::size_t> active_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> batch_;
    std::vector<bool> selected_;
    std::optional<DiscreteDistribution> fallback_;
    std::uint64_t fallback_version_ = 0;
    RunStats stats_;
    RunLog log_;
    std::ostream* events_ = nullptr;
};

}  // namespace distsched
