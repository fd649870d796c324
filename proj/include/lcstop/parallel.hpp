#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace lcstop {

/// Worker count used by parallel_for. Zero restores the default
/// (std::thread::hardware_concurrency()).
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, n) on the worker pool. Callers write results
/// into per-index slots, so output never depends on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length of the input, which keeps merged estimators reproducible.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace lcstop
