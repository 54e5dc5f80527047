// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "distsched/error.hpp"

namespace distsched {

// Config files are line oriented:
//
//   # comment
//   include common.conf        (path relative to the including file)
//   backend.kv_capacity = 8192
//
// Later assignments win, so a file can override what it includes.

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    return std::all_of(k.begin(), k.end(), [](unsigned char c) { return std::isalnum(c) || c == '.' || c == '_' || c == '-'; });
}

}  // namespace detail

class Config {
public:
    Config() = default;

    static Config load(const std::filesystem::path& path) {
        Config cfg;
        std::vector<std::filesystem::path> stack;
        cfg.load_file(path, stack);
        return cfg;
    }

    static Config parse(const std::string& text, const std::filesystem::path& base_dir = ".") {
        Config cfg;
        std::vector<std::filesystem::path> stack;
        std::istringstream in(text);
        cfg.parse_stream(in, "<string>", base_dir, stack);
        return cfg;
    }

    void set(const std::string& key, const std::string& value) {
        if (!detail::valid_key(key)) throw ConfigError(key, "invalid key");
        values_[key] = value;
    }

    /// Applies a "key=value" override.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError(assignment, "override must look like key=value");
        set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void erase(const std::string& key) { values_.erase(key); }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) throw ConfigError(key, "required");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return to_double(key, it->second);
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return to_int(key, it->second);
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& s = it->second;
        std::uint64_t v = 0;
        const int base = s.rfind("0x", 0) == 0 ? 16 : 10;
        const char* first = s.data() + (base == 16 ? 2 : 0);
        auto [end, ec] = std::from_chars(first, s.data() + s.size(), v, base);
        if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError(key, "not an unsigned integer: '" + s + "'");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& s = it->second;
        if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
        if (s == "false" || s == "off" || s == "no" || s == "0") return false;
        throw ConfigError(key, "not a boolean: '" + s + "'");
    }

    /// Comma-separated list; empty when absent.
    std::vector<std::string> get_list(const std::string& key) const {
        used_.insert(key);
        auto it = values_.find(key);
        std::vector<std::string> out;
        if (it == values_.end()) return out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    /// Keys under `prefix` (e.g. "workload.cluster.") seen in the file.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
            out.push_back(it->first);
        }
        return out;
    }

    /// Throws for any key that no getter has read.
    void check_unused() const {
        for (const auto& [k, v] : values_) {
            if (!used_.count(k)) throw ConfigError(k, "unknown key");
        }
    }

    static double to_double(const std::string& key, const std::string& s) {
        double v = 0.0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError(key, "not a number: '" + s + "'");
        return v;
    }

    static std::int64_t to_int(const std::string& key, const std::string& s) {
        std::int64_t v = 0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError(key, "not an integer: '" + s + "'");
        return v;
    }

private:
    void load_file(const std::filesystem::path& path, std::vector<std::filesystem::path>& stack) {
        std::error_code ec;
        auto canonical = std::filesystem::weakly_canonical(path, ec);
        if (ec) canonical = path;
        if (std::find(stack.begin(), stack.end(), canonical) != stack.end()) {
            throw ConfigError(path.string(), "include cycle");
        }
        std::ifstream in(path);
        if (!in) throw ConfigError(path.string(), "cannot open config file");
        stack.push_back(canonical);
        parse_stream(in, path.string(), path.parent_path(), stack);
        stack.pop_back();
    }

    void parse_stream(std::istream& in, const std::string& name, const std::filesystem::path& base_dir,
                      std::vector<std::filesystem::path>& stack) {
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const auto hash = raw.find('#');
            const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty()) continue;
            const std::string where = name + ":" + std::to_string(line_no);
            if (line.rfind("include", 0) == 0 && line.size() > 7 && std::isspace(static_cast<unsigned char>(line[7]))) {
                const std::filesystem::path target = detail::trim(line.substr(8));
                load_file(target.is_absolute() ? target : base_dir / target, stack);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            if (!detail::valid_key(key)) throw ConfigError(where, "invalid key '" + key + "'");
            values_[key] = detail::trim(line.substr(eq + 1));
        }
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v, int digits = 16) {
    static const char* kHex = "0123456789abcdef";
    std::string s(static_cast<std::size_t>(digits), '0');
    for (int i = digits - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = kHex[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace distsched
