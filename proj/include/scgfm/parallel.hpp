#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace scgfm {

// Global worker cap; 1 = serial. Set once at startup from --threads or the
// SCGFM_THREADS environment variable.
int get_threads();
void set_threads(int n);

// Run fn(i) for i in [0, n). Work is split by index block; results must be
// written to per-index slots so the outcome is identical for any thread
// count. The first exception (lowest block) is rethrown.
template <typename Fn>
void parallel_for(int n, const Fn& fn) {
    const int workers = std::min(get_threads(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace scgfm
