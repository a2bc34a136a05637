#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace lytnet {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work is split into
/// contiguous index ranges; callers must make fn(i) independent of other indices
/// so results never depend on the worker count.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    workers = std::clamp(workers, 1, std::max(count, 1));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int begin = count * w / workers;
        const int end = count * (w + 1) / workers;
        threads.emplace_back([begin, end, &fn] {
            for (int i = begin; i < end; ++i) fn(i);
        });
    }
}

}  // namespace lytnet
