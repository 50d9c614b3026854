#ifndef LXK_PARALLEL_HPP
#define LXK_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

/**
 * @file parallel.hpp
 *
 * @brief Minimal fork-join helper.
 *
 * Every parallel loop in the toolkit writes index `i`'s result into slot `i`
 * of a preallocated output, so results never depend on the worker count or on
 * scheduling order.
 */

namespace lxk {

namespace detail {

inline std::atomic<int>& default_workers_storage() {
    static std::atomic<int> workers{[] {
        if (const char* env = std::getenv("LXK_WORKERS")) {
            int parsed = std::atoi(env);
            if (parsed > 0) {
                return parsed;
            }
        }
        return 1;
    }()};
    return workers;
}

}  // namespace detail

/// Worker count used when an operation is not given one explicitly.
/// Initialized from the `LXK_WORKERS` environment variable (default 1).
inline int default_workers() { return detail::default_workers_storage().load(); }

inline void set_default_workers(int workers) {
    detail::default_workers_storage().store(std::max(1, workers));
}

/**
 * Run `fn(i)` for every `i` in `[0, n)` using up to `workers` threads.
 * Indices are handed out dynamically; the first exception thrown by any
 * invocation is rethrown on the calling thread after all workers join.
 */
template <class Function>
void parallel_for(std::size_t n, Function&& fn, int workers = 0) {
    if (workers <= 0) {
        workers = default_workers();
    }
    std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;

    auto body = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(nthreads - 1);
    for (std::size_t t = 1; t < nthreads; ++t) {
        threads.emplace_back(body);
    }
    body();
    for (auto& thread : threads) {
        thread.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace lxk

#endif
