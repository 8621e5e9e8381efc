#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace sketchlab {

inline constexpr const char* kVersion = "0.1.0";

// Deterministic sub-stream seeding: every worker/episode derives its own rng
// from (master seed, stream index), so results do not depend on thread count.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

// Runs fn(i) for i in [0, n). With workers <= 1 runs inline; otherwise splits
// the index range across threads. fn must not touch shared mutable state.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    int k = std::min(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    for (int w = 0; w < k; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += k) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sketchlab
