#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lfl {

/// Worker count: hardware concurrency, capped by LFL_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LFL_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
    }
  }
  return n;
}

/// Splits [0, n) into a fixed number of contiguous chunks that depends only on
/// n, so per-chunk partial results reduced in chunk order are bit-identical
/// whatever the thread count.
inline std::vector<std::size_t> chunk_bounds(std::size_t n, std::size_t max_chunks = 16) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min(n, max_chunks));
  std::vector<std::size_t> b(chunks + 1);
  for (std::size_t c = 0; c <= chunks; ++c) b[c] = n * c / chunks;
  return b;
}

/// Runs fn(chunk_index, begin, end) for every chunk, on up to `threads` workers.
template <class Fn>
void for_each_chunk(const std::vector<std::size_t>& bounds, unsigned threads, Fn&& fn) {
  const std::size_t chunks = bounds.size() - 1;
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), chunks));
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, bounds[c], bounds[c + 1]);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < chunks; c += threads) fn(c, bounds[c], bounds[c + 1]);
    });
}

}  // namespace lfl
