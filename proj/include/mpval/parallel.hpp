#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpval {

inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [begin, end) on up to `workers` threads. The body
/// must write only to slots owned by index i, so the result is identical for
/// any worker count.
template <typename Body>
void parallel_for(std::int64_t begin, std::int64_t end, int workers, Body&& body) {
    const std::int64_t span = end - begin;
    if (span <= 0) return;
    const int w = std::min<std::int64_t>(resolve_workers(workers), span);
    if (w <= 1) {
        for (std::int64_t i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(w);
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::int64_t chunk = (span + w - 1) / w;
    for (int t = 0; t < w; ++t) {
        const std::int64_t lo = begin + t * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&, lo, hi] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace mpval
