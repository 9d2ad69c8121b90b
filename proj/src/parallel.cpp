#include "polarseg/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace polarseg {

int max_threads() {
    static const int n = [] {
        if (const char* env = std::getenv("POLARSEG_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return n;
}

void parallel_for(long n, const std::function<void(long, long)>& fn) {
    if (n <= 0) return;
    const int workers = std::min<long>(max_threads(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const long chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int t = 1; t < workers; ++t) {
        const long b = t * chunk;
        const long e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    fn(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

}  // namespace polarseg
