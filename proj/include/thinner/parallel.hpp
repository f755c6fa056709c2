// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <functional>

namespace thinner {

/// Caps the worker count used by parallel_for. Values < 1 mean 1.
void set_max_threads(int threads);
int max_threads();

/// Reads THINNER_THREADS; returns fallback when unset or unparsable.
int threads_from_env(int fallback);

/// Runs body(i) for i in [0, count). Each index is visited exactly once;
/// callers must write disjoint outputs so results do not depend on the
/// thread count.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace thinner
