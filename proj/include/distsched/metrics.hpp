// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "distsched/engine.hpp"
#include "distsched/error.hpp"
#include "distsched/stats.hpp"
#include "distsched/version.hpp"

namespace distsched {

/// Shortest decimal that round-trips; "nan" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("format_double: conversion failed");
    return std::string(buf, end);
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) throw FormatError(0, "not a number: '" + s + "'");
    return v;
}

struct MetricsRow {
    std::uint64_t seed = 0;
    std::uint64_t id = 0;
    std::optional<std::int32_t> cluster_id;
    double arrival = 0.0;
    double ttft = std::numeric_limits<double>::quiet_NaN();
    double ttlt = std::numeric_limits<double>::quiet_NaN();
    std::int64_t input_len = 0;
    std::int64_t output_len = 0;
    std::int64_t preemptions = 0;
    bool fallback_used = false;
    double prediction_tv = std::numeric_limits<double>::quiet_NaN();

    bool completed() const { return !std::isnan(ttlt); }
    double tpot() const { return ttlt / static_cast<double>(output_len); }
    double completion() const { return arrival + ttlt; }
};

inline std::vector<MetricsRow> to_rows(const RunResult& run, std::uint64_t seed) {
    std::vector<MetricsRow> rows;
    rows.reserve(run.requests.size());
    for (const auto& r : run.requests) {
        MetricsRow m;
        m.seed = seed;
        m.id = r.id;
        m.cluster_id = r.cluster_id;
        m.arrival = r.arrival;
        m.ttft = std::isnan(r.first_token_time) ? m.ttft : r.ttft();
        m.ttlt = std::isnan(r.completion_time) ? m.ttlt : r.ttlt();
        m.input_len = r.input_len;
        m.output_len = r.output_len;
        m.preemptions = r.preemptions;
        m.fallback_used = r.fallback_used;
        m.prediction_tv = r.prediction_tv;
        rows.push_back(m);
    }
    return rows;
}

/// Aggregates over a set of rows. Latency statistics cover completed rows.
struct Aggregates {
    std::int64_t requests = 0;
    std::int64_t completed = 0;
    double mean_ttft = 0, median_ttft = 0, p95_ttft = 0, p99_ttft = 0;
    double mean_ttlt = 0, median_ttlt = 0, p95_ttlt = 0, p99_ttlt = 0;
    double mean_tpot = 0;
    double throughput = 0;  // completed requests per simulated second
    std::int64_t preemptions = 0;
    double fallback_rate = 0;
    double mean_prediction_tv = 0;

    /// Stable, ordered name/value view used by every CSV writer.
    std::vector<std::pair<std::string, double>> items() const {
        return {{"requests", static_cast<double>(requests)},
                {"completed", static_cast<double>(completed)},
                {"mean_ttft", mean_ttft},
                {"median_ttft", median_ttft},
                {"p95_ttft", p95_ttft},
                {"p99_ttft", p99_ttft},
                {"mean_ttlt", mean_ttlt},
                {"median_ttlt", median_ttlt},
                {"p95_ttlt", p95_ttlt},
                {"p99_ttlt", p99_ttlt},
                {"mean_tpot", mean_tpot},
                {"throughput", throughput},
                {"preemptions", static_cast<double>(preemptions)},
                {"fallback_rate", fallback_rate},
                {"mean_prediction_tv", mean_prediction_tv}};
    }
};

inline Aggregates aggregate(const std::vector<MetricsRow>& rows) {
    Aggregates a;
    a.requests = static_cast<std::int64_t>(rows.size());
    std::vector<double> ttft, ttlt, tpot, tv;
    std::map<std::uint64_t, std::pair<double, double>> span_by_seed;  // first arrival, last completion
    std::int64_t fallbacks = 0;
    for (const auto& r : rows) {
        a.preemptions += r.preemptions;
        fallbacks += r.fallback_used ? 1 : 0;
        if (!std::isnan(r.prediction_tv)) tv.push_back(r.prediction_tv);
        auto [it, fresh] = span_by_seed.try_emplace(r.seed, r.arrival, r.arrival);
        it->second.first = std::min(it->second.first, r.arrival);
        if (!r.completed()) continue;
        ++a.completed;
        ttft.push_back(r.ttft);
        ttlt.push_back(r.ttlt);
        tpot.push_back(r.tpot());
        it->second.second = std::max(it->second.second, r.completion());
    }
    a.mean_ttft = mean(ttft);
    a.median_ttft = percentile(ttft, 0.5);
    a.p95_ttft = percentile(ttft, 0.95);
    a.p99_ttft = percentile(ttft, 0.99);
    a.mean_ttlt = mean(ttlt);
    a.median_ttlt = percentile(ttlt, 0.5);
    a.p95_ttlt = percentile(ttlt, 0.95);
    a.p99_ttlt = percentile(ttlt, 0.99);
    a.mean_tpot = mean(tpot);
    double elapsed = 0.0;
    for (const auto& [seed, span] : span_by_seed) elapsed += span.second - span.first;
    a.throughput = elapsed > 0.0 ? static_cast<double>(a.completed) / elapsed : 0.0;
    a.fallback_rate = rows.empty() ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(rows.size());
    a.mean_prediction_tv = mean(tv);
    return a;
}

/// Ordered key/value metadata written as '#' comment lines atop every CSV.
using Metadata = std::vector<std::pair<std::string, std::string>>;

inline void write_metadata(std::ostream& out, const Metadata& meta) {
    out << "# distsched schema=" << kSchemaVersion << " version=" << kVersion << '\n';
    for (const auto& [k, v] : meta) out << "# " << k << " = " << v << '\n';
}

inline constexpr const char* kRowColumns =
    "seed,id,cluster_id,arrival,ttft,ttlt,tpot,input_len,output_len,preemptions,fallback_used,prediction_tv";

inline void write_rows_csv(std::ostream& out, const Metadata& meta, const std::vector<MetricsRow>& rows) {
    write_metadata(out, meta);
    out << kRowColumns << '\n';
    for (const auto& r : rows) {
        out << r.seed << ',' << r.id << ',' << (r.cluster_id ? std::to_string(*r.cluster_id) : std::string()) << ','
            << format_double(r.arrival) << ',' << format_double(r.ttft) << ',' << format_double(r.ttlt) << ','
            << format_double(r.tpot()) << ',' << r.input_len << ',' << r.output_len << ',' << r.preemptions << ','
            << (r.fallback_used ? 1 : 0) << ',' << format_double(r.prediction_tv) << '\n';
    }
}

/// Parses a rows CSV written by write_rows_csv, skipping metadata lines.
inline std::vector<MetricsRow> read_rows_csv(std::istream& in) {
    std::vector<MetricsRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kRowColumns) throw FormatError(line_no, "unexpected column header");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 12) throw FormatError(line_no, "expected 12 fields");
        try {
            MetricsRow r;
            r.seed = std::stoull(f[0]);
            r.id = std::stoull(f[1]);
            if (!f[2].empty()) r.cluster_id = std::stoi(f[2]);
            r.arrival = parse_double(f[3]);
            r.ttft = parse_double(f[4]);
            r.ttlt = parse_double(f[5]);
            r.input_len = std::stoll(f[7]);
            r.output_len = std::stoll(f[8]);
            r.preemptions = std::stoll(f[9]);
            r.fallback_used = f[10] == "1";
            r.prediction_tv = parse_double(f[11]);
            rows.push_back(r);
        } catch (const FormatError& e) {
            throw FormatError(line_no, e.what());
        } catch (const std::exception& e) {
            throw FormatError(line_no, e.what());
        }
    }
    return rows;
}

inline void write_aggregate_header(std::ostream& out, const std::string& first_column) {
    out << first_column;
    for (const auto& [k, v] : Aggregates{}.items()) out << ',' << k;
    out << '\n';
}

inline void write_aggregate_row(std::ostream& out, const std::string& label, const Aggregates& a) {
    out << label;
    for (const auto& [k, v] : a.items()) out << ',' << format_double(v);
    out << '\n';
}

}  // namespace distsched
