#include "parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dode {

unsigned worker_count() {
    static unsigned cached = [] {
        if (const char* env = std::getenv("DODE_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return unsigned(v);
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1u;
    }();
    return cached;
}

void parallel_for(size_t n, size_t grain, const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    if (grain == 0) grain = 1;
    size_t k = std::min<size_t>(worker_count(), (n + grain - 1) / grain);
    if (k <= 1) {
        fn(0, n);
        return;
    }
    size_t chunk = (n + k - 1) / k;
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (size_t w = 0; w < k; ++w) {
        size_t b = w * chunk;
        size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    for (auto& th : pool) th.join();
}

}  // namespace dode
