#pragma once

#include <thread>
#include <vector>

namespace hbflow {

/// Run fn(thread_id, begin, end) over a contiguous range split into
/// `threads` chunks. The partition depends only on (n, threads), so results
/// assembled per chunk and reduced in chunk order are reproducible.
template <typename Fn>
void parallel_for_chunks(int threads, int n, Fn&& fn) {
    if (threads <= 1 || n < 2 * threads) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(size_t(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int b = t * chunk;
        const int e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back([&fn, t, b, e] { fn(t, b, e); });
    }
    for (auto& th : pool)
        th.join();
}

} // namespace hbflow
