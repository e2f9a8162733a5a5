#include "mivs/parallel.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace mivs {

namespace {
std::atomic<size_t> g_threads{0};
thread_local bool t_inside_worker = false;
} // namespace

void set_thread_count(size_t n) { g_threads = n; }

size_t thread_count() {
    size_t n = g_threads.load();
    if (n == 0) n = std::max<size_t>(1, std::thread::hardware_concurrency());
    return n;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min(thread_count(), n);
    if (workers <= 1 || t_inside_worker) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto body = [&] {
        t_inside_worker = true;
        for (size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        t_inside_worker = false;
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace mivs
