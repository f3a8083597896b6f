#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace regret_tree {

// Worker cap: REGRET_TREE_THREADS when set, hardware concurrency otherwise.
inline unsigned max_worker_threads() {
    unsigned cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("REGRET_TREE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) cap = static_cast<unsigned>(v);
    }
    return cap;
}

// Runs body(i) for i in [0, count). Each index must touch only its own output
// slot; callers do any reduction afterwards in index order, so the result is
// identical for every thread count.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(max_worker_threads(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace regret_tree
