#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tomokit {

// TOMOKIT_THREADS, else hardware concurrency; at least 1.
inline int thread_count() {
    if (const char* env = std::getenv("TOMOKIT_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// out[i] = fn(i) for i in [0, n). Each task writes only its own slot, so results do not depend on the
// thread count. The first exception thrown by any task is rethrown after all workers join.
template <class T, class Fn>
std::vector<T> parallel_map(int n, Fn&& fn, int threads = 0) {
    std::vector<T> out(static_cast<size_t>(std::max(n, 0)));
    if (n <= 0) return out;
    if (threads <= 0) threads = thread_count();
    threads = std::min(threads, n);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) out[size_t(i)] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[size_t(i)] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return out;
}

}  // namespace tomokit
