// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace distsched {

/// Warnings and counters collected during one run. Not thread-safe; each run
/// owns its log.
struct RunLog {
    std::vector<std::string> warnings;
    std::uint64_t fallback_events = 0;
    std::uint64_t degenerate_queries = 0;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace distsched
