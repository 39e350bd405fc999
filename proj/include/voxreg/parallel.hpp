// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace voxreg {

/// Work is always split into this many lanes, whatever the thread count.
/// Each lane owns its accumulators and lanes are merged in lane order, so
/// results are bit-identical for any number of worker threads.
inline constexpr std::size_t kLanes = 8;

/// Thread count from an explicit flag, else VOXREG_THREADS, else 1.
int resolve_threads(std::optional<int> requested);

/// Half-open item range [begin, end) handled by `lane` out of `lanes`.
struct LaneRange {
  std::size_t begin;
  std::size_t end;
};

inline LaneRange lane_range(std::size_t items, std::size_t lane, std::size_t lanes = kLanes) {
  const std::size_t base = items / lanes;
  const std::size_t extra = items % lanes;
  const std::size_t begin = lane * base + std::min(lane, extra);
  return {begin, begin + base + (lane < extra ? 1 : 0)};
}

/// Runs fn(lane) for lane in [0, lanes) on up to `threads` workers.
template <typename Fn>
void for_each_lane(int threads, Fn&& fn, std::size_t lanes = kLanes) {
  const std::size_t workers = std::clamp<std::size_t>(threads > 0 ? threads : 1, 1, lanes);
  if (workers == 1) {
    for (std::size_t lane = 0; lane < lanes; ++lane) fn(lane);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t lane = next++; lane < lanes; lane = next++) {
      try {
        fn(lane);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace voxreg
