// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "distsched/config.hpp"
#include "distsched/cost.hpp"
#include "distsched/distribution.hpp"
#include "distsched/embedding.hpp"
#include "distsched/engine.hpp"
#include "distsched/error.hpp"
#include "distsched/gittins.hpp"
#include "distsched/history.hpp"
#include "distsched/metrics.hpp"
#include "distsched/overhead.hpp"
#include "distsched/policy.hpp"
#include "distsched/predictor.hpp"
#include "distsched/run_log.hpp"
#include "distsched/scenario.hpp"
#include "distsched/stats.hpp"
#include "distsched/trace_io.hpp"
#include "distsched/version.hpp"
#include "distsched/workload.hpp"
