#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace swag {

/// Runs fn(i) for i in [0, count) on at most `concurrency` threads.
/// fn must not throw; callers capture per-item failures in their results.
/// Results are written by index, so output order follows input order.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t concurrency, Fn&& fn) {
  concurrency = std::max<std::size_t>(1, std::min(concurrency, count));
  if (concurrency <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  workers.reserve(concurrency);
  for (std::size_t w = 0; w < concurrency; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
}

}  // namespace swag
