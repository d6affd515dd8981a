// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RELIEF_PARALLEL_HPP_
#define RELIEF_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace relief {

// Thread cap used when a caller passes threads <= 0. Reads
// RELIEF_OPTIM_THREADS, falls back to hardware concurrency.
int DefaultThreads();

// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs.
// The first exception thrown by any item is rethrown after all workers join.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

}  // namespace relief

#endif  // RELIEF_PARALLEL_HPP_
