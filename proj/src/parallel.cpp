#include "hyqal/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace hyqal {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int nw = threads();
    if (nw <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(nw), n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) {
                        error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failed.load() && error) {
        std::rethrow_exception(error);
    }
}

} // namespace hyqal
