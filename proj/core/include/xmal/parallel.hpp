// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace xmal {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Indices are handed out in contiguous blocks; the first
// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace xmal
