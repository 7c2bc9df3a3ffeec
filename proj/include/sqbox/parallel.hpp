#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sqbox {

inline int default_workers() {
    if (const char* env = std::getenv("SQBOX_WORKERS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Each index is processed exactly once and
// results must be written to index-addressed slots by the caller, so the
// outcome is identical for any worker count.
inline void parallel_for(long count, int workers,
                         const std::function<void(long)>& fn) {
    if (count <= 0) return;
    if (workers < 1) workers = 1;
    if (workers == 1 || count == 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::mutex mu;
    std::exception_ptr first_error;
    long next = 0;
    auto body = [&]() {
        for (;;) {
            long i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= count || first_error) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    int n_threads = static_cast<int>(std::min<long>(workers, count));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sqbox
