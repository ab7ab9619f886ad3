#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace respicast {

// Chunked parallel loop over [0, n). Each index is processed exactly once and
// results must be written to per-index slots, so the outcome is independent
// of the thread count. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    std::size_t nthreads = std::min<std::size_t>(std::size_t(threads), n);
    std::size_t chunk = (n + nthreads - 1) / nthreads;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

} // namespace respicast
