#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>

#include "attnio/errors.hpp"

namespace attnio {

/** Cumulative transfer counters; all units are elements. */
struct IoCounter {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t peak_residency = 0;

    std::uint64_t total() const { return reads + writes; }
};

/**
 * Two-level memory simulator. The cache holds tagged regions whose sizes sum
 * to at most the capacity; memory is unbounded. Reads (memory to cache) and
 * writes (cache to memory) are counted per element; computation on resident
 * regions is free. A region admitted by load or alloc stays resident, at a
 * constant charge equal to its size, until evicted. Tags must be unique among
 * live regions. Counters depend only on the call sequence, never on data.
 */
class CacheSim {
public:
    explicit CacheSim(std::uint64_t capacity_elements);

    /** Bring `size` elements in from memory under `tag`. Counts reads. */
    void load(std::string_view tag, std::uint64_t size);

    /** Write a resident region's elements out to memory. Counts writes; the region stays resident. */
    void store(std::string_view tag, std::uint64_t size);

    /** Reserve `size` elements of cache for a new region without any transfer. */
    void alloc(std::string_view tag, std::uint64_t size);

    /** Drop a resident region; its cache space is freed, nothing is transferred. */
    void evict(std::string_view tag);

    IoCounter snapshot() const { return counters_; }
    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t residency() const { return residency_; }
    bool live(std::string_view tag) const { return resident_.count(std::string(tag)) > 0; }

private:
    void admit(std::string_view tag, std::uint64_t size);

    std::uint64_t capacity_;
    std::uint64_t residency_ = 0;
    std::unordered_map<std::string, std::uint64_t> resident_;
    IoCounter counters_;
};

}  // namespace attnio
