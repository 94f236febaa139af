#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace causeray {

// Runs fn(i) for i in [0, count) across at most `threads` workers using a
// static partition. Callers get determinism by writing to disjoint,
// index-addressed slots; results never depend on completion order.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (threads < 1) threads = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace causeray
