#pragma once

#include <cstddef>
#include <functional>

namespace txn {

/// Number of worker threads used by data-parallel kernels.
///
/// Defaults to the hardware concurrency, capped by the TXN_THREADS
/// environment variable. Deterministic mode forces a single worker.
std::size_t worker_count();

/// Overrides the worker count (0 restores the environment default).
void set_worker_count(std::size_t n);

/// Deterministic mode: single worker, sequential accumulation.
void set_deterministic(bool on);
bool deterministic();

/// Runs fn(i) for i in [0, n). Work items are split into contiguous chunks,
/// one per worker; fn must not touch state shared with other items.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace txn
