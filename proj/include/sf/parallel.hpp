// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cstddef>
#include <functional>

namespace sf {

// Global worker pool. Results never depend on the thread count: every
// parallel_for body writes only to its own index range and all cross-range
// reductions happen serially in index order at the call site.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n). Blocks until done. Nested calls degrade to
// serial execution on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sf
