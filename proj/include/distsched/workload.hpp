// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "distsched/distribution.hpp"
#include "distsched/error.hpp"

namespace distsched {

using Token = std::int32_t;

/// One inference job. `true_output_len` is drawn once at generation time so
/// every policy in a comparison sees the same realization.
struct Request {
    std::uint64_t id = 0;
    double arrival_time = 0.0;
    std::vector<Token> prompt_tokens;
    std::int64_t input_len = 0;
    std::int64_t true_output_len = 0;
    std::optional<std::int32_t> cluster_id;

    friend bool operator==(const Request&, const Request&) = default;
};

inline void validate_request(const Request& r) {
    if (r.input_len < 1) throw PreconditionError("request " + std::to_string(r.id) + ": input_len must be >= 1");
    if (r.true_output_len < 1) {
        throw PreconditionError("request " + std::to_string(r.id) + ": true_output_len must be >= 1");
    }
    if (static_cast<std::size_t>(r.input_len) != r.prompt_tokens.size()) {
        throw PreconditionError("request " + std::to_string(r.id) + ": input_len " + std::to_string(r.input_len) +
                                " differs from prompt length " + std::to_string(r.prompt_tokens.size()));
    }
    if (!(r.arrival_time >= 0.0) || !std::isfinite(r.arrival_time)) {
        throw PreconditionError("request " + std::to_string(r.id) + ": arrival_time must be finite and >= 0");
    }
}

// Output-length laws. Draws are rounded to integers and truncated to
// [1, o_max] by resampling up to kMaxResamples times, then clamping.

struct LogNormalLaw {
    double mu = 0.0;
    double sigma = 1.0;
    friend bool operator==(const LogNormalLaw&, const LogNormalLaw&) = default;
};

struct GeometricLaw {
    double p = 0.5;
    friend bool operator==(const GeometricLaw&, const GeometricLaw&) = default;
};

/// Mass p1 at v1 and 1 - p1 at v2. v1 == v2 gives a deterministic length.
struct BimodalLaw {
    std::int64_t v1 = 1;
    double p1 = 0.5;
    std::int64_t v2 = 1;
    friend bool operator==(const BimodalLaw&, const BimodalLaw&) = default;
};

using LengthLaw = std::variant<LogNormalLaw, GeometricLaw, BimodalLaw>;

inline constexpr int kMaxResamples = 100;

inline std::string to_string(const LengthLaw& law) {
    return std::visit(
        [](const auto& l) -> std::string {
            using T = std::decay_t<decltype(l)>;
            auto num = [](double x) {
                std::string s = std::to_string(x);
                s.erase(s.find_last_not_of('0') + 1);
                if (!s.empty() && s.back() == '.') s.pop_back();
                return s;
            };
            if constexpr (std::is_same_v<T, LogNormalLaw>) {
                return "lognormal(" + num(l.mu) + "," + num(l.sigma) + ")";
            } else if constexpr (std::is_same_v<T, GeometricLaw>) {
                return "geometric(" + num(l.p) + ")";
            } else {
                return "bimodal(" + std::to_string(l.v1) + "," + num(l.p1) + "," + std::to_string(l.v2) + ")";
            }
        },
        law);
}

inline void validate_law(const LengthLaw& law, const std::string& field) {
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, LogNormalLaw>) {
                if (!(l.sigma > 0.0) || !std::isfinite(l.mu)) throw ConfigError(field, "lognormal needs sigma > 0");
            } else if constexpr (std::is_same_v<T, GeometricLaw>) {
                if (!(l.p > 0.0 && l.p <= 1.0)) throw ConfigError(field, "geometric p must lie in (0, 1]");
            } else {
                if (!(l.p1 > 0.0 && l.p1 < 1.0)) throw ConfigError(field, "bimodal p1 must lie in (0, 1)");
                if (l.v1 < 1 || l.v2 < 1) throw ConfigError(field, "bimodal values must be >= 1");
            }
        },
        law);
}

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One untruncated draw; values below 1 are reported as 0, above o_max as o_max + 1.
inline std::int64_t raw_length_draw(const LengthLaw& law, std::int64_t o_max, std::mt19937_64& rng) {
    return std::visit(
        [&](const auto& l) -> std::int64_t {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, LogNormalLaw>) {
                std::normal_distribution<double> normal(l.mu, l.sigma);
                const double x = std::exp(normal(rng));
                if (x < 0.5) return 0;
                if (!(x < static_cast<double>(o_max) + 0.5)) return o_max + 1;
                return std::llround(x);
            } else if constexpr (std::is_same_v<T, GeometricLaw>) {
                if (l.p >= 1.0) return 1;
                std::geometric_distribution<std::int64_t> geom(l.p);
                const std::int64_t failures = geom(rng);
                return failures >= o_max ? o_max + 1 : failures + 1;
            } else {
                std::bernoulli_distribution first(l.p1);
                const std::int64_t v = first(rng) ? l.v1 : l.v2;
                return v > o_max ? o_max + 1 : v;
            }
        },
        law);
}

}  // namespace detail

inline std::int64_t sample_length(const LengthLaw& law, std::int64_t o_max, std::mt19937_64& rng) {
    std::int64_t v = 0;
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        v = detail::raw_length_draw(law, o_max, rng);
        if (v >= 1 && v <= o_max) return v;
    }
    return v < 1 ? 1 : o_max;
}

/// Exact pmf of sample_length: in-range mass conditioned by resampling plus
/// the clamp mass left after the final attempt.
inline DiscreteDistribution truncated_pmf(const LengthLaw& law, std::int64_t o_max) {
    if (o_max < 1) throw PreconditionError("truncated_pmf: o_max must be >= 1");
    std::vector<std::pair<double, double>> raw;  // single-draw in-range masses
    double below = 0.0;
    double above = 0.0;
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, LogNormalLaw>) {
                auto cdf = [&](double x) { return detail::std_normal_cdf((std::log(x) - l.mu) / l.sigma); };
                below = cdf(0.5);
                double prev = below;
                for (std::int64_t k = 1; k <= o_max; ++k) {
                    const double next = cdf(static_cast<double>(k) + 0.5);
                    raw.emplace_back(static_cast<double>(k), next - prev);
                    prev = next;
                }
                above = 1.0 - prev;
            } else if constexpr (std::is_same_v<T, GeometricLaw>) {
                double survive = 1.0;
                for (std::int64_t k = 1; k <= o_max; ++k) {
                    raw.emplace_back(static_cast<double>(k), survive * l.p);
                    survive *= 1.0 - l.p;
                }
                above = l.p >= 1.0 ? 0.0 : std::pow(1.0 - l.p, static_cast<double>(o_max));
            } else {
                for (const auto& [v, m] : {std::pair{l.v1, l.p1}, std::pair{l.v2, 1.0 - l.p1}}) {
                    if (v <= o_max) {
                        raw.emplace_back(static_cast<double>(v), m);
                    } else {
                        above += m;
                    }
                }
            }
        },
        law);
    const double miss = std::clamp(below + above, 0.0, 1.0);
    const double in_range = 1.0 - miss;
    // P(accepted on some attempt) spread over in-range points; the final
    // failed attempt clamps to whichever side it fell on.
    const double accept_scale = in_range > 0.0 ? (1.0 - std::pow(miss, kMaxResamples)) / in_range : 0.0;
    const double tail = miss > 0.0 ? std::pow(miss, kMaxResamples - 1) : 0.0;
    for (auto& [v, m] : raw) m = std::max(0.0, m) * accept_scale;
    raw.emplace_back(1.0, tail * below);
    raw.emplace_back(static_cast<double>(o_max), tail * above);
    return DiscreteDistribution::from_weights(std::move(raw));
}

/// Deterministic pseudo-random token block, used for cluster templates.
inline std::vector<Token> random_tokens(std::uint64_t seed, std::size_t len, Token vocab_size) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Token> tok(1, vocab_size);
    std::vector<Token> out(len);
    for (auto& t : out) t = tok(rng);
    return out;
}

struct ClusterSpec {
    std::vector<Token> template_tokens;
    std::int64_t noise_len = 0;
    /// Noise length is drawn uniformly from [noise_len, noise_len_max]; a
    /// value below noise_len means a fixed noise_len.
    std::int64_t noise_len_max = 0;
    LengthLaw length_law = GeometricLaw{0.01};
    double weight = 1.0;
};

struct WorkloadConfig {
    double lambda = 1.0;
    std::int64_t n_requests = 1;
    std::uint64_t seed = 0;
    std::int64_t o_max = 2048;
    Token vocab_size = 50000;
    std::vector<ClusterSpec> clusters;
};

inline void validate(const WorkloadConfig& cfg) {
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("workload.lambda", "must be > 0");
    if (cfg.n_requests < 1) throw ConfigError("workload.n_requests", "must be >= 1");
    if (cfg.o_max < 1) throw ConfigError("workload.o_max", "must be >= 1");
    if (cfg.vocab_size < 1) throw ConfigError("workload.vocab_size", "must be >= 1");
    if (cfg.clusters.empty()) throw ConfigError("workload.clusters", "at least one cluster is required");
    for (std::size_t c = 0; c < cfg.clusters.size(); ++c) {
        const auto& cl = cfg.clusters[c];
        const std::string prefix = "workload.cluster." + std::to_string(c) + ".";
        validate_law(cl.length_law, prefix + "law");
        if (cl.noise_len < 0) throw ConfigError(prefix + "noise", "must be >= 0");
        if (cl.template_tokens.empty() && cl.noise_len == 0 && cl.noise_len_max <= 0) {
            throw ConfigError(prefix + "template", "cluster prompts would be empty");
        }
        if (!(cl.weight > 0.0)) throw ConfigError(prefix + "weight", "must be > 0");
    }
}

/// Poisson arrivals at rate lambda, clusters drawn by weight, prompt =
/// template + fresh noise, output length from the cluster's law. A pure
/// function of `cfg`.
inline std::vector<Request> generate_trace(const WorkloadConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::exponential_distribution<double> gap(cfg.lambda);
    std::vector<double> weights;
    for (const auto& c : cfg.clusters) weights.push_back(c.weight);
    std::discrete_distribution<std::int32_t> pick(weights.begin(), weights.end());
    std::uniform_int_distribution<Token> noise_tok(1, cfg.vocab_size);

    std::vector<Request> out;
    out.reserve(static_cast<std::size_t>(cfg.n_requests));
    double t = 0.0;
    for (std::int64_t i = 0; i < cfg.n_requests; ++i) {
        t += gap(rng);
        const std::int32_t c = pick(rng);
        const auto& cl = cfg.clusters[static_cast<std::size_t>(c)];
        std::int64_t noise = cl.noise_len;
        if (cl.noise_len_max > cl.noise_len) {
            noise = std::uniform_int_distribution<std::int64_t>(cl.noise_len, cl.noise_len_max)(rng);
        }
        Request r;
        r.id = static_cast<std::uint64_t>(i);
        r.arrival_time = t;
        r.prompt_tokens = cl.template_tokens;
        for (std::int64_t k = 0; k < noise; ++k) r.prompt_tokens.push_back(noise_tok(rng));
        r.input_len = static_cast<std::int64_t>(r.prompt_tokens.size());
        r.true_output_len = sample_length(cl.length_law, cfg.o_max, rng);
        r.cluster_id = c;
        out.push_back(std::move(r));
    }
    return out;
}

/// Ground-truth truncated pmf per cluster, indexed by cluster id.
inline std::vector<DiscreteDistribution> cluster_laws(const WorkloadConfig& cfg) {
    std::vector<DiscreteDistribution> out;
    out.reserve(cfg.clusters.size());
    for (const auto& c : cfg.clusters) out.push_back(truncated_pmf(c.length_law, cfg.o_max));
    return out;
}

}  // namespace distsched
