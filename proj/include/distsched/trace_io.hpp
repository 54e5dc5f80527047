// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsched/error.hpp"
#include "distsched/run_log.hpp"
#include "distsched/workload.hpp"

namespace distsched {

// Trace files are JSON Lines, one request per line:
//   {"id":0,"arrival_time":0.25,"prompt_tokens":[..],"input_len":3,"true_output_len":7,"cluster_id":1}
// cluster_id is optional. Blank lines are ignored.

inline nlohmann::json to_json(const Request& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["arrival_time"] = r.arrival_time;
    j["prompt_tokens"] = r.prompt_tokens;
    j["input_len"] = r.input_len;
    j["true_output_len"] = r.true_output_len;
    if (r.cluster_id) j["cluster_id"] = *r.cluster_id;
    return j;
}

inline void write_trace(std::ostream& out, const std::vector<Request>& trace) {
    for (const auto& r : trace) out << to_json(r).dump() << '\n';
}

inline void save_trace(const std::vector<Request>& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_trace(out, trace);
    if (!out) throw Error("write failed for " + path.string());
}

namespace detail {

inline Request parse_request_line(const std::string& text, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError(line_no, "record must be a JSON object");
    auto need = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) throw FormatError(line_no, std::string("missing key '") + key + "'");
        return *it;
    };
    Request r;
    try {
        const auto& id = need("id");
        if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<std::int64_t>() >= 0)) {
            throw FormatError(line_no, "id must be a non-negative integer");
        }
        r.id = id.get<std::uint64_t>();
        const auto& at = need("arrival_time");
        if (!at.is_number()) throw FormatError(line_no, "arrival_time must be a number");
        r.arrival_time = at.get<double>();
        const auto& toks = need("prompt_tokens");
        if (!toks.is_array()) throw FormatError(line_no, "prompt_tokens must be an array");
        r.prompt_tokens = toks.get<std::vector<Token>>();
        const auto& il = need("input_len");
        const auto& ol = need("true_output_len");
        if (!il.is_number_integer() || !ol.is_number_integer()) {
            throw FormatError(line_no, "input_len and true_output_len must be integers");
        }
        r.input_len = il.get<std::int64_t>();
        r.true_output_len = ol.get<std::int64_t>();
        if (auto it = j.find("cluster_id"); it != j.end() && !it->is_null()) {
            if (!it->is_number_integer()) throw FormatError(line_no, "cluster_id must be an integer");
            r.cluster_id = it->get<std::int32_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(line_no, e.what());
    }
    try {
        validate_request(r);
    } catch (const PreconditionError& e) {
        throw FormatError(line_no, e.what());
    }
    return r;
}

}  // namespace detail

/// Parses a trace; out-of-order records are accepted and stably re-sorted by
/// (arrival_time, id) with a warning in `log`.
inline std::vector<Request> read_trace(std::istream& in, RunLog* log = nullptr) {
    std::vector<Request> trace;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::uint64_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        trace.push_back(detail::parse_request_line(line, line_no));
        if (!seen.insert(trace.back().id).second) {
            throw FormatError(line_no, "duplicate id " + std::to_string(trace.back().id));
        }
    }
    auto before = [](const Request& a, const Request& b) {
        return a.arrival_time < b.arrival_time || (a.arrival_time == b.arrival_time && a.id < b.id);
    };
    if (!std::is_sorted(trace.begin(), trace.end(), before)) {
        std::stable_sort(trace.begin(), trace.end(), before);
        if (log) log->warn("trace records were not sorted by arrival_time; re-sorted");
    }
    return trace;
}

inline std::vector<Request> load_trace(const std::filesystem::path& path, RunLog* log = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace " + path.string());
    return read_trace(in, log);
}

}  // namespace distsched
