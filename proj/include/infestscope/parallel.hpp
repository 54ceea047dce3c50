#pragma once

// Small fork-join helper. INFESTSCOPE_THREADS caps the worker count
// (0 or unset = hardware concurrency). Work items are chunked by index;
// each index is processed exactly once, so results are independent of the
// parallelism degree as long as items do not share outputs.

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace infestscope {

inline int thread_cap() {
    int cap = 0;
    if (const char* env = std::getenv("INFESTSCOPE_THREADS")) {
        try {
            cap = std::stoi(env);
        } catch (const std::exception&) {
            cap = 0;
        }
    }
    if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
    return cap > 0 ? cap : 1;
}

/// Runs fn(i) for i in [begin, end) across up to thread_cap() threads.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
    const int n = end - begin;
    if (n <= 0) return;
    const int workers = std::min(thread_cap(), n);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = begin + w; i < end; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace infestscope
