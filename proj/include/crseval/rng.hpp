#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crseval/text.hpp"

namespace crseval {

// All sampling goes through this wrapper so sequences are pinned by the
// mt19937_64 standard stream rather than implementation-defined
// distributions; results are identical across platforms for a given seed.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    // Unbiased value in [0, n) via rejection sampling.
    uint64_t bounded(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

// First k of a Fisher-Yates pass; order within the sample is the draw order.
template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& pool, size_t k, SeededRng& rng) {
    std::vector<T> items(pool);
    if (k > items.size()) k = items.size();
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(rng.bounded(items.size() - i));
        std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
}

// Stable per-entity seed derived from the single run seed.
inline uint64_t derive_seed(uint64_t run_seed, const std::string& label) {
    return text::fnv1a64(label, run_seed ^ 0x9e3779b97f4a7c15ull);
}

} // namespace crseval
