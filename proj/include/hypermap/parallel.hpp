#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hypermap {

namespace detail {
inline unsigned& thread_override() {
    static unsigned value = 0;
    return value;
}
} // namespace detail

/// Caps the worker count used by every parallel stage. 0 restores the default.
inline void set_thread_count(unsigned n) { detail::thread_override() = n; }

/// Worker count: explicit override, then HYPERMAP_THREADS, then hardware concurrency.
inline unsigned thread_count() {
    if (detail::thread_override() > 0) return detail::thread_override();
    if (const char* env = std::getenv("HYPERMAP_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, n) into contiguous blocks and runs fn(begin, end) on each.
/// Blocks write to disjoint outputs, so results never depend on the worker count.
template <class Fn>
void parallel_for_blocks(std::size_t n, Fn&& fn, unsigned workers = 0) {
    if (n == 0) return;
    if (workers == 0) workers = thread_count();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }

    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace hypermap
