#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace phonolase {

/// Default worker count: hardware concurrency, at least 1.
inline std::size_t default_threads() {
    const auto n = std::thread::hardware_concurrency();
    return n ? n : 1;
}

/// Evaluate fn(0..n-1) on up to `threads` workers. Results come back in index
/// order; the first exception (by index) is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t n, std::size_t threads, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using R = std::invoke_result_t<F&, std::size_t>;
    std::vector<R> out(n);
    if (n == 0) return out;
    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        for (std::size_t k = 0; k < n; ++k) out[k] = fn(k);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < n;) {
            try {
                out[k] = fn(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace phonolase
