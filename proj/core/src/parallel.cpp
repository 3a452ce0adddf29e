#include "qks/parallel.hpp"

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qks {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(threads == 0 ? 1 : threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::size_t default_threads(std::size_t cap) {
    const std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) return 1;
    return std::min(hw, cap == 0 ? hw : cap);
}

} // namespace qks
