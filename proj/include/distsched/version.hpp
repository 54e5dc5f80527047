// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace distsched {

inline constexpr const char* kVersion = "0.1.0";
/// Bumped on any breaking change to output layout or the config format.
inline constexpr int kSchemaVersion = 1;

}  // namespace distsched
