#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ruelle::detail {

/// Runs fn(begin, end) over [0, count) split into contiguous chunks. Each
/// index is owned by one chunk, so results do not depend on `workers`.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  constexpr std::size_t kMinChunk = 4096;
  workers = std::max<std::size_t>(1, std::min(workers, count / kMinChunk));
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace ruelle::detail
