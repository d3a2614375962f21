#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace histotile {

// Worker cap: HISTOTILE_THREADS if set (clamped to >= 1), else the hardware
// concurrency.
inline int max_threads() {
    if (const char* env = std::getenv("HISTOTILE_THREADS")) {
        int n = std::atoi(env);
        return n < 1 ? 1 : n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static-partition parallel loop over [0, n). Each index is processed exactly
// once; callers must make f(i) write only to per-index slots so the result is
// independent of the thread count. The first exception thrown by any worker
// is rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
    const int threads = std::min<std::size_t>(max_threads(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace histotile
