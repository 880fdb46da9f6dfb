#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "guard/graph.hpp"

namespace guard {

/// Runs fn(i) for every i in [0, n) across at most `threads` workers.
/// Work is dealt in contiguous stripes; callers must write results into
/// per-index slots so the outcome is identical for any thread count.
/// The first exception thrown by a worker is rethrown on the caller.
inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(std::int64_t)>& fn) {
    if (n < 0) throw PreconditionError("parallel_for needs a nonnegative count");
    if (threads < 0) throw PreconditionError("thread count must be nonnegative");
    if (threads == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    if (threads == 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::int64_t workers = std::min<std::int64_t>(threads, n);
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t lo = n * w / workers;
        const std::int64_t hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace guard
