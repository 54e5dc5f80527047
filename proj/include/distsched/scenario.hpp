// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "distsched/config.hpp"
#include "distsched/engine.hpp"
#include "distsched/metrics.hpp"
#include "distsched/trace_io.hpp"
#include "distsched/workload.hpp"

namespace distsched {

// ---------------------------------------------------------------------------
// Parsing of individual values

/// "lognormal(4.5,0.8)", "geometric(0.01)" or "bimodal(20,0.5,380)".
inline LengthLaw parse_law(const std::string& field, const std::string& text) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError(field, "expected name(args), got '" + text + "'");
    }
    const std::string name = detail::trim(text.substr(0, open));
    std::vector<double> args;
    std::stringstream ss(text.substr(open + 1, close - open - 1));
    std::string item;
    while (std::getline(ss, item, ',')) args.push_back(Config::to_double(field, detail::trim(item)));
    auto need = [&](std::size_t n) {
        if (args.size() != n) throw ConfigError(field, name + " takes " + std::to_string(n) + " arguments");
    };
    LengthLaw law;
    if (name == "lognormal") {
        need(2);
        law = LogNormalLaw{args[0], args[1]};
    } else if (name == "geometric") {
        need(1);
        law = GeometricLaw{args[0]};
    } else if (name == "bimodal") {
        need(3);
        law = BimodalLaw{static_cast<std::int64_t>(args[0]), args[1], static_cast<std::int64_t>(args[2])};
    } else {
        throw ConfigError(field, "unknown length law '" + name + "'");
    }
    validate_law(law, field);
    return law;
}

/// Template tokens: terms joined by '+', each "random(seed,len)" or
/// "tokens(t1 t2 ...)".
inline std::vector<Token> parse_template(const std::string& field, const std::string& text, Token vocab) {
    std::vector<Token> out;
    std::stringstream ss(text);
    std::string term;
    while (std::getline(ss, term, '+')) {
        term = detail::trim(term);
        if (term.empty()) continue;
        const auto open = term.find('(');
        const auto close = term.rfind(')');
        if (open == std::string::npos || close == std::string::npos) throw ConfigError(field, "bad template term '" + term + "'");
        const std::string name = detail::trim(term.substr(0, open));
        const std::string body = term.substr(open + 1, close - open - 1);
        if (name == "random") {
            const auto comma = body.find(',');
            if (comma == std::string::npos) throw ConfigError(field, "random(seed,len) takes two arguments");
            const auto seed = Config::to_int(field, detail::trim(body.substr(0, comma)));
            const auto len = Config::to_int(field, detail::trim(body.substr(comma + 1)));
            if (len < 0) throw ConfigError(field, "template length must be >= 0");
            auto block = random_tokens(static_cast<std::uint64_t>(seed), static_cast<std::size_t>(len), vocab);
            out.insert(out.end(), block.begin(), block.end());
        } else if (name == "tokens") {
            std::stringstream ts(body);
            std::string tok;
            while (ts >> tok) out.push_back(static_cast<Token>(Config::to_int(field, tok)));
        } else {
            throw ConfigError(field, "unknown template term '" + name + "'");
        }
    }
    return out;
}

/// "a..b" (inclusive) or a comma-separated list.
inline std::vector<std::uint64_t> parse_seeds(const std::string& field, const std::string& text) {
    std::vector<std::uint64_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const auto lo = Config::to_int(field, detail::trim(text.substr(0, dots)));
        const auto hi = Config::to_int(field, detail::trim(text.substr(dots + 2)));
        if (lo < 0 || hi < lo) throw ConfigError(field, "bad seed range '" + text + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        const auto v = Config::to_int(field, item);
        if (v < 0) throw ConfigError(field, "seeds must be >= 0");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    if (out.empty()) throw ConfigError(field, "at least one seed is required");
    return out;
}

// ---------------------------------------------------------------------------
// Specs

/// Everything needed for one configuration of one scenario, minus the seed.
struct RunSpec {
    std::optional<std::filesystem::path> trace_path;
    std::optional<WorkloadConfig> workload;  // absent for trace-driven runs without cluster info
    std::int64_t warmup = 2000;
    std::optional<std::filesystem::path> snapshot;
    EngineConfig engine;
    Metadata resolved;  // every effective setting, for CSV headers
};

struct Variant {
    std::string label;
    std::vector<std::pair<std::string, std::string>> overrides;
};

enum class SweepAxis { SimilarityThreshold, BucketSize, Rps, SwapPenalty };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::SimilarityThreshold: return "similarity_threshold";
        case SweepAxis::BucketSize: return "bucket_size";
        case SweepAxis::Rps: return "rps";
        case SweepAxis::SwapPenalty: return "swap_penalty";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
    for (auto a : {SweepAxis::SimilarityThreshold, SweepAxis::BucketSize, SweepAxis::Rps, SweepAxis::SwapPenalty}) {
        if (to_string(a) == s) return a;
    }
    throw ConfigError("sweep.axis", "unknown axis '" + s + "'");
}

inline const char* sweep_key(SweepAxis a) {
    switch (a) {
        case SweepAxis::SimilarityThreshold: return "predictor.threshold";
        case SweepAxis::BucketSize: return "gittins.bucket_size";
        case SweepAxis::Rps: return "workload.lambda";
        case SweepAxis::SwapPenalty: return "backend.swap_penalty";
    }
    return "";
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::Rps;
    std::vector<std::string> values;
};

struct ScenarioPlan {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<Variant> variants;  // at least one
    bool compare = false;
    std::optional<SweepSpec> sweep;
    std::filesystem::path output_dir = "out";
    bool events = false;
    Config base;
    std::string config_hash;
};

namespace detail {

inline bool is_output_key(const std::string& k) { return k.rfind("output.", 0) == 0; }

inline std::string canonical_text(const Config& cfg) {
    std::string s;
    for (const auto& [k, v] : cfg.values()) {
        if (is_output_key(k)) continue;
        s += k + " = " + v + "\n";
    }
    return s;
}

}  // namespace detail

/// Interprets the run-level keys of `cfg`. Scenario-level keys (compare.*,
/// sweep.*, output.*, scenario.name, scenario.seeds) are read by parse_plan.
inline RunSpec parse_run_spec(const Config& cfg) {
    RunSpec spec;
    Metadata& m = spec.resolved;
    auto note = [&](const std::string& k, const std::string& v) { m.emplace_back(k, v); };
    auto noted = [&](const std::string& k, double v) { note(k, format_double(v)); };
    auto notei = [&](const std::string& k, std::int64_t v) { note(k, std::to_string(v)); };

    const auto trace = cfg.get_string("scenario.trace", "");
    if (!trace.empty()) {
        spec.trace_path = trace;
        if (!std::filesystem::exists(*spec.trace_path)) throw ConfigError("scenario.trace", "no such file: " + trace);
        note("scenario.trace", trace);
    }
    spec.warmup = cfg.get_int("scenario.warmup", 2000);
    if (spec.warmup < 0) throw ConfigError("scenario.warmup", "must be >= 0");
    notei("scenario.warmup", spec.warmup);
    const double horizon = cfg.get_double("scenario.horizon", std::numeric_limits<double>::infinity());
    if (!(horizon > 0.0)) throw ConfigError("scenario.horizon", "must be > 0");
    spec.engine.horizon = horizon;
    noted("scenario.horizon", horizon);

    const auto n_clusters = cfg.get_int("workload.clusters", 0);
    if (n_clusters < 0) throw ConfigError("workload.clusters", "must be >= 0");
    if (n_clusters > 0) {
        WorkloadConfig w;
        w.lambda = cfg.get_double("workload.lambda", 1.0);
        w.n_requests = cfg.get_int("workload.n_requests", 1000);
        w.o_max = cfg.get_int("workload.o_max", 2048);
        w.vocab_size = static_cast<Token>(cfg.get_int("workload.vocab_size", 50000));
        noted("workload.lambda", w.lambda);
        notei("workload.n_requests", w.n_requests);
        notei("workload.o_max", w.o_max);
        notei("workload.vocab_size", w.vocab_size);
        notei("workload.clusters", n_clusters);
        for (std::int64_t c = 0; c < n_clusters; ++c) {
            const std::string p = "workload.cluster." + std::to_string(c) + ".";
            ClusterSpec cl;
            const auto tmpl = cfg.get_string(p + "template", "");
            cl.template_tokens = parse_template(p + "template", tmpl, w.vocab_size);
            const auto noise = cfg.get_string(p + "noise", "0");
            const auto dots = noise.find("..");
            if (dots == std::string::npos) {
                cl.noise_len = Config::to_int(p + "noise", noise);
            } else {
                cl.noise_len = Config::to_int(p + "noise", detail::trim(noise.substr(0, dots)));
                cl.noise_len_max = Config::to_int(p + "noise", detail::trim(noise.substr(dots + 2)));
                if (cl.noise_len_max < cl.noise_len) throw ConfigError(p + "noise", "empty range");
            }
            cl.length_law = parse_law(p + "law", cfg.require_string(p + "law"));
            cl.weight = cfg.get_double(p + "weight", 1.0);
            note(p + "template", tmpl);
            note(p + "noise", noise);
            note(p + "law", to_string(cl.length_law));
            noted(p + "weight", cl.weight);
            w.clusters.push_back(std::move(cl));
        }
        validate(w);
        spec.workload = std::move(w);
    } else if (!spec.trace_path) {
        throw ConfigError("workload.clusters", "a workload (clusters >= 1) or scenario.trace is required");
    }

    auto& e = spec.engine;
    e.backend.kv_capacity_tokens = cfg.get_int("backend.kv_capacity", e.backend.kv_capacity_tokens);
    e.backend.max_batch = cfg.get_int("backend.max_batch", e.backend.max_batch);
    e.backend.c0 = cfg.get_double("backend.c0", e.backend.c0);
    e.backend.c1 = cfg.get_double("backend.c1", e.backend.c1);
    e.backend.c_pre = cfg.get_double("backend.c_pre", e.backend.c_pre);
    e.backend.swap_penalty = cfg.get_double("backend.swap_penalty", e.backend.swap_penalty);
    e.backend.refresh_cost = cfg.get_double("backend.refresh_cost", e.backend.refresh_cost);
    validate(e.backend);
    notei("backend.kv_capacity", e.backend.kv_capacity_tokens);
    notei("backend.max_batch", e.backend.max_batch);
    noted("backend.c0", e.backend.c0);
    noted("backend.c1", e.backend.c1);
    noted("backend.c_pre", e.backend.c_pre);
    noted("backend.swap_penalty", e.backend.swap_penalty);
    noted("backend.refresh_cost", e.backend.refresh_cost);

    e.policy.kind = parse_policy_kind(cfg.get_string("policy.kind", to_string(e.policy.kind)));
    e.policy.mlfq.q0 = cfg.get_int("policy.mlfq.q0", e.policy.mlfq.q0);
    e.policy.mlfq.n_levels = static_cast<int>(cfg.get_int("policy.mlfq.levels", e.policy.mlfq.n_levels));
    e.policy.mlfq.demotion_factor = cfg.get_int("policy.mlfq.factor", e.policy.mlfq.demotion_factor);
    validate(e.policy);
    note("policy.kind", to_string(e.policy.kind));
    if (e.policy.kind == PolicyKind::MLFQ) {
        notei("policy.mlfq.q0", e.policy.mlfq.q0);
        notei("policy.mlfq.levels", e.policy.mlfq.n_levels);
        notei("policy.mlfq.factor", e.policy.mlfq.demotion_factor);
    }

    e.predictor.kind = parse_predictor_kind(cfg.get_string("predictor.kind", to_string(e.predictor.kind)));
    e.predictor.threshold = cfg.get_double("predictor.threshold", e.predictor.threshold);
    e.predictor.min_matches = cfg.get_int("predictor.min_matches", e.predictor.min_matches);
    e.predictor.rel_tol = cfg.get_double("predictor.rel_tol", e.predictor.rel_tol);
    e.noise = cfg.get_bool("predictor.noise", false);
    validate(e.predictor);
    note("predictor.kind", to_string(e.predictor.kind));
    noted("predictor.threshold", e.predictor.threshold);
    notei("predictor.min_matches", e.predictor.min_matches);
    noted("predictor.rel_tol", e.predictor.rel_tol);
    note("predictor.noise", e.noise ? "true" : "false");

    e.cost.kind = parse_cost_kind(cfg.get_string("cost.kind", to_string(e.cost.kind)));
    e.cost.w_in = cfg.get_double("cost.w_in", e.cost.w_in);
    e.cost.w_out = cfg.get_double("cost.w_out", e.cost.w_out);
    validate(e.cost);
    note("cost.kind", to_string(e.cost.kind));
    if (e.cost.kind == CostKind::WeightedSum) {
        noted("cost.w_in", e.cost.w_in);
        noted("cost.w_out", e.cost.w_out);
    }

    e.gittins.bucket_size_tokens = cfg.get_int("gittins.bucket_size", e.gittins.bucket_size_tokens);
    e.gittins.bucket_count = cfg.get_int("gittins.bucket_count", e.gittins.bucket_count);
    e.gittins.max_support_points =
        static_cast<std::size_t>(cfg.get_int("gittins.max_support_points", static_cast<std::int64_t>(e.gittins.max_support_points)));
    validate(e.gittins);
    notei("gittins.bucket_size", e.gittins.bucket_size_tokens);
    notei("gittins.bucket_count", e.gittins.bucket_count);
    notei("gittins.max_support_points", static_cast<std::int64_t>(e.gittins.max_support_points));

    e.embedding.dim = static_cast<std::size_t>(cfg.get_int("embedding.dim", static_cast<std::int64_t>(e.embedding.dim)));
    e.embedding.salt = cfg.get_uint("embedding.salt", e.embedding.salt);
    e.embedding.max_ngram = static_cast<int>(cfg.get_int("embedding.ngram", e.embedding.max_ngram));
    validate(e.embedding);
    notei("embedding.dim", static_cast<std::int64_t>(e.embedding.dim));
    note("embedding.salt", "0x" + hex64(e.embedding.salt));
    notei("embedding.ngram", e.embedding.max_ngram);

    const auto cap = cfg.get_int("history.capacity", static_cast<std::int64_t>(e.history_capacity));
    if (cap < 1) throw ConfigError("history.capacity", "must be >= 1");
    e.history_capacity = static_cast<std::size_t>(cap);
    notei("history.capacity", cap);
    const auto snap = cfg.get_string("history.snapshot", "");
    if (!snap.empty()) {
        spec.snapshot = snap;
        if (!std::filesystem::exists(*spec.snapshot)) throw ConfigError("history.snapshot", "no such file: " + snap);
        note("history.snapshot", snap);
    }
    e.o_max = spec.workload ? spec.workload->o_max : cfg.get_int("workload.o_max", 2048);
    if (e.noise) notei("predictor.noise_o_max", e.o_max);
    std::sort(m.begin(), m.end());
    return spec;
}

inline ScenarioPlan parse_plan(const Config& cfg) {
    ScenarioPlan plan;
    plan.base = cfg;
    plan.name = cfg.require_string("scenario.name");
    for (char c : plan.name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) {
            throw ConfigError("scenario.name", "use letters, digits, '-' and '_' only");
        }
    }
    plan.seeds = parse_seeds("scenario.seeds", cfg.get_string("scenario.seeds", "1"));
    plan.output_dir = cfg.get_string("output.dir", "out");
    plan.events = cfg.get_bool("output.events", false);

    const auto labels = cfg.get_list("compare.variants");
    for (const auto& label : labels) {
        Variant v{label, {}};
        const std::string key = "compare.variant." + label;
        std::stringstream ss(cfg.require_string(key));
        std::string assignment;
        while (ss >> assignment) {
            const auto eq = assignment.find('=');
            if (eq == std::string::npos) throw ConfigError(key, "expected key=value items, got '" + assignment + "'");
            v.overrides.emplace_back(assignment.substr(0, eq), assignment.substr(eq + 1));
        }
        plan.variants.push_back(std::move(v));
    }
    // Variants defined but not listed are allowed, so a listing can be narrowed by override.
    for (const auto& key : cfg.keys_with_prefix("compare.variant.")) (void)cfg.get_string(key, "");
    plan.compare = !plan.variants.empty();
    if (!plan.compare) plan.variants.push_back(Variant{"default", {}});

    const auto axis = cfg.get_string("sweep.axis", "");
    if (!axis.empty()) {
        SweepSpec s;
        s.axis = parse_sweep_axis(axis);
        s.values = cfg.get_list("sweep.values");
        if (s.values.empty()) throw ConfigError("sweep.values", "required with sweep.axis");
        plan.sweep = std::move(s);
    } else if (cfg.has("sweep.values")) {
        throw ConfigError("sweep.values", "set without sweep.axis");
    }

    // Parse every variant once so that unknown keys and bad values surface
    // before anything runs.
    for (const auto& v : plan.variants) {
        Config c = cfg;
        for (const auto& [k, val] : v.overrides) c.set(k, val);
        const RunSpec spec = parse_run_spec(c);
        if (plan.sweep) {
            const auto& e = spec.engine;
            switch (plan.sweep->axis) {
                case SweepAxis::SimilarityThreshold:
                    if (e.predictor.kind != PredictorKind::SemanticHistory && e.predictor.kind != PredictorKind::PointMean) {
                        throw ConfigError("sweep.axis", "similarity_threshold needs a semantic predictor (variant " + v.label + ")");
                    }
                    break;
                case SweepAxis::BucketSize:
                    if (!refreshes_at_buckets(e.policy.kind)) {
                        throw ConfigError("sweep.axis", "bucket_size needs a bucket-refreshing policy (variant " + v.label + ")");
                    }
                    if (e.gittins.bucket_count > 0) {
                        throw ConfigError("sweep.axis", "bucket_size conflicts with gittins.bucket_count");
                    }
                    break;
                case SweepAxis::Rps:
                    if (!spec.workload || spec.trace_path) throw ConfigError("sweep.axis", "rps needs a generated workload");
                    break;
                case SweepAxis::SwapPenalty:
                    break;
            }
            for (const auto& value : plan.sweep->values) {
                Config cv = c;
                cv.set(sweep_key(plan.sweep->axis), value);
                (void)parse_run_spec(cv);
            }
        }
        c.check_unused();
    }
    plan.config_hash = hex64(fnv1a(detail::canonical_text(cfg)), 12);
    return plan;
}

// ---------------------------------------------------------------------------
// Execution

struct SeedOutcome {
    std::uint64_t seed = 0;
    RunResult result;
    std::vector<MetricsRow> rows;
    std::string events;
};

/// Warm-start history: completed requests drawn from the same workload with
/// an unrelated seed, so the live trace is never replayed into its own history.
inline std::vector<HistoryRecord> warm_start_records(const RunSpec& spec, std::uint64_t seed) {
    std::vector<HistoryRecord> out;
    if (spec.snapshot) {
        for (auto& r : load_snapshot(*spec.snapshot, spec.engine.history_capacity, spec.engine.embedding.dim).records()) {
            out.push_back(std::move(r));
        }
        return out;
    }
    if (!spec.workload || spec.warmup == 0) return out;
    const auto kind = spec.engine.predictor.kind;
    if (kind == PredictorKind::OracleDistribution || kind == PredictorKind::OraclePoint) return out;
    WorkloadConfig w = *spec.workload;
    w.n_requests = spec.warmup;
    w.seed = detail::mix64(seed ^ 0x77a3c0ffee15bad5ULL);
    std::uint64_t seq = 0;
    for (const auto& r : generate_trace(w)) {
        Embedding e = embed(r.prompt_tokens, spec.engine.embedding);
        if (e.degenerate()) continue;
        out.push_back(HistoryRecord{std::move(e), r.input_len, r.true_output_len, seq++});
    }
    return out;
}

inline SeedOutcome run_seed(const RunSpec& spec, std::uint64_t seed, bool events = false) {
    SeedOutcome out;
    out.seed = seed;
    std::vector<Request> trace;
    std::vector<DiscreteDistribution> laws;
    if (spec.trace_path) {
        trace = load_trace(*spec.trace_path, &out.result.log);
    } else {
        WorkloadConfig w = *spec.workload;
        w.seed = seed;
        trace = generate_trace(w);
    }
    if (spec.workload) laws = cluster_laws(*spec.workload);
    RunLog trace_log = out.result.log;
    Simulator sim(spec.engine, std::move(trace), std::move(laws), warm_start_records(spec, seed));
    std::ostringstream ev;
    if (events) sim.set_event_log(&ev);
    try {
        out.result = sim.run();
    } catch (const HorizonExceeded&) {
        out.result = sim.result();
    }
    for (auto& w : trace_log.warnings) out.result.log.warnings.push_back(w);
    out.rows = to_rows(out.result, seed);
    out.events = ev.str();
    return out;
}

/// Runs `tasks` on up to `jobs` threads; results land in task order.
template <class Task>
void run_parallel(std::size_t n, std::size_t jobs, Task&& task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct RunSet {
    std::string variant;
    std::optional<std::string> axis_value;
    RunSpec spec;
    std::vector<SeedOutcome> seeds;

    bool complete() const {
        return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.result.complete; });
    }
    std::vector<MetricsRow> pooled_rows() const {
        std::vector<MetricsRow> rows;
        for (const auto& s : seeds) rows.insert(rows.end(), s.rows.begin(), s.rows.end());
        return rows;
    }
    Aggregates pooled() const { return aggregate(pooled_rows()); }
    /// Per-seed values of one aggregate, in seed order.
    std::vector<double> per_seed(double Aggregates::*field) const {
        std::vector<double> out;
        for (const auto& s : seeds) out.push_back(aggregate(s.rows).*field);
        return out;
    }
    /// Mean wall-clock scheduling time per engine iteration. Not deterministic,
    /// so it is reported but never written to CSV.
    double mean_decision_seconds() const {
        double secs = 0.0;
        std::uint64_t iters = 0;
        for (const auto& s : seeds) {
            secs += s.result.stats.scheduling_seconds;
            iters += s.result.stats.iterations;
        }
        return iters == 0 ? 0.0 : secs / static_cast<double>(iters);
    }
};

struct ScenarioResult {
    ScenarioPlan plan;
    std::filesystem::path dir;
    std::vector<RunSet> sets;  // variant-major, then sweep value
    bool complete() const {
        return std::all_of(sets.begin(), sets.end(), [](const RunSet& s) { return s.complete(); });
    }
    const RunSet& find(const std::string& variant, const std::optional<std::string>& value = {}) const {
        for (const auto& s : sets) {
            if (s.variant == variant && s.axis_value == value) return s;
        }
        throw PreconditionError("no run set for variant " + variant);
    }
};

struct RunOptions {
    std::size_t jobs = 1;
    bool write = true;
    std::optional<std::filesystem::path> output_dir;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

inline Metadata set_metadata(const ScenarioPlan& plan, const RunSet& set) {
    Metadata m{{"scenario", plan.name}, {"config_hash", plan.config_hash}, {"variant", set.variant}};
    if (set.axis_value) {
        m.emplace_back("sweep.axis", to_string(plan.sweep->axis));
        m.emplace_back("sweep.value", *set.axis_value);
    }
    std::string seeds;
    for (auto s : plan.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    m.emplace_back("seeds", seeds);
    m.emplace_back("complete", set.complete() ? "true" : "false");
    m.insert(m.end(), set.spec.resolved.begin(), set.spec.resolved.end());
    return m;
}

inline void write_set(const std::filesystem::path& dir, const ScenarioPlan& plan, const RunSet& set) {
    std::filesystem::create_directories(dir);
    const Metadata meta = set_metadata(plan, set);
    for (const auto& s : set.seeds) {
        Metadata m = meta;
        m.emplace_back("seed", std::to_string(s.seed));
        m.emplace_back("seed_complete", s.result.complete ? "true" : "false");
        std::ostringstream out;
        write_rows_csv(out, m, s.rows);
        write_file(dir / ("seed-" + std::to_string(s.seed) + ".csv"), out.str());
        if (!s.events.empty()) write_file(dir / ("events-seed-" + std::to_string(s.seed) + ".jsonl"), s.events);
    }
    std::ostringstream pooled;
    write_rows_csv(pooled, meta, set.pooled_rows());
    write_file(dir / "pooled.csv", pooled.str());
    std::ostringstream summary;
    write_metadata(summary, meta);
    write_aggregate_header(summary, "scope");
    for (const auto& s : set.seeds) write_aggregate_row(summary, "seed-" + std::to_string(s.seed), aggregate(s.rows));
    write_aggregate_row(summary, "pooled", set.pooled());
    write_file(dir / "summary.csv", summary.str());
}

inline Metadata plan_metadata(const ScenarioPlan& plan) {
    Metadata m{{"scenario", plan.name}, {"config_hash", plan.config_hash}};
    for (const auto& [k, v] : plan.base.values()) {
        if (!is_output_key(k)) m.emplace_back(k, v);
    }
    return m;
}

}  // namespace detail

/// Runs every (variant, sweep value, seed) of a plan and writes the output
/// tree. Output bytes do not depend on `jobs`.
inline ScenarioResult run_plan(const ScenarioPlan& plan, const RunOptions& opts = {}) {
    ScenarioResult res;
    res.plan = plan;
    res.dir = (opts.output_dir ? *opts.output_dir : plan.output_dir) / (plan.name + "-" + plan.config_hash);

    for (const auto& v : plan.variants) {
        Config c = plan.base;
        for (const auto& [k, val] : v.overrides) c.set(k, val);
        if (plan.sweep) {
            for (const auto& value : plan.sweep->values) {
                Config cv = c;
                cv.set(sweep_key(plan.sweep->axis), value);
                res.sets.push_back(RunSet{v.label, value, parse_run_spec(cv), {}});
            }
        } else {
            res.sets.push_back(RunSet{v.label, std::nullopt, parse_run_spec(c), {}});
        }
    }
    const std::size_t per = plan.seeds.size();
    for (auto& s : res.sets) s.seeds.resize(per);
    run_parallel(res.sets.size() * per, opts.jobs, [&](std::size_t i) {
        auto& set = res.sets[i / per];
        set.seeds[i % per] = run_seed(set.spec, plan.seeds[i % per], plan.events);
    });
    if (!opts.write) return res;

    std::filesystem::create_directories(res.dir);
    for (const auto& set : res.sets) {
        std::filesystem::path dir = res.dir;
        if (plan.compare) dir /= set.variant;
        if (set.axis_value) dir /= to_string(plan.sweep->axis) + "-" + *set.axis_value;
        detail::write_set(dir, plan, set);
    }
    if (plan.compare && !plan.sweep) {
        std::ostringstream out;
        write_metadata(out, detail::plan_metadata(plan));
        write_aggregate_header(out, "variant");
        for (const auto& set : res.sets) write_aggregate_row(out, set.variant, set.pooled());
        detail::write_file(res.dir / "comparison.csv", out.str());
    }
    if (plan.sweep) {
        std::ostringstream out;
        write_metadata(out, detail::plan_metadata(plan));
        out << "variant,axis_value,metric,value\n";
        for (const auto& set : res.sets) {
            for (const auto& [k, v] : set.pooled().items()) {
                out << set.variant << ',' << *set.axis_value << ',' << k << ',' << format_double(v) << '\n';
            }
        }
        detail::write_file(res.dir / "sweep.csv", out.str());
    }
    return res;
}

inline ScenarioResult run_scenario(const Config& cfg, const RunOptions& opts = {}) { return run_plan(parse_plan(cfg), opts); }

}  // namespace distsched
