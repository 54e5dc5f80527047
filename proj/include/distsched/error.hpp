// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace distsched {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value; `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config error [" + field + "]: " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Malformed trace or snapshot record. Line numbers are 1-based.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ColdStartError : public Error {
public:
    ColdStartError()
        : Error("cold start: history window is empty and no fallback distribution is available; "
                "provide a warm-start snapshot or a warm-up trace") {}
};

class SchedulingError : public Error {
public:
    using Error::Error;
};

/// The simulated clock passed the configured horizon with work outstanding.
class HorizonExceeded : public Error {
public:
    HorizonExceeded(double horizon, std::vector<std::uint64_t> unfinished)
        : Error("horizon " + std::to_string(horizon) + " s exceeded with " +
                std::to_string(unfinished.size()) + " unfinished request(s)"),
          unfinished_(std::move(unfinished)) {}

    const std::vector<std::uint64_t>& unfinished() const noexcept { return unfinished_; }

private:
    std::vector<std::uint64_t> unfinished_;
};

}  // namespace distsched
