#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace eqstream {

// Process-wide thread cap, settable from the CLI (--threads). Work is
// split into contiguous chunks with disjoint outputs (or partials merged
// in chunk order), so results do not depend on the cap.
namespace parallel {

inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{1};
    return cap;
}

inline void set_max_threads(int n) { thread_cap().store(n < 1 ? 1 : n); }
inline int max_threads() { return thread_cap().load(); }

/// Runs fn(chunk_index, begin, end) over a fixed partition of [0, n).
/// The partition depends only on n and the requested chunk count, never
/// on scheduling.
template <typename Fn>
void for_chunks(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    std::size_t want = static_cast<std::size_t>(max_threads());
    std::size_t chunks = want < n ? want : n;
    if (chunks <= 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(chunks);
    const std::size_t base = n / chunks;
    const std::size_t extra = n % chunks;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        const std::size_t end = begin + len;
        workers.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
        begin = end;
    }
    for (auto& w : workers) w.join();
}

/// Number of chunks for_chunks would use for n items.
inline std::size_t chunk_count(std::size_t n) {
    std::size_t want = static_cast<std::size_t>(max_threads());
    if (n == 0) return 0;
    return want < n ? want : n;
}

}  // namespace parallel
}  // namespace eqstream
