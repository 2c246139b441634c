#include "attnio/cache_sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace attnio {

CacheSim::CacheSim(std::uint64_t capacity_elements) : capacity_(capacity_elements) {}

void CacheSim::admit(std::string_view tag, std::uint64_t size) {
    if (size == 0) {
        throw std::invalid_argument("cache region size must be at least 1");
    }
    std::string key(tag);
    if (resident_.count(key)) {
        throw DuplicateTag("region '" + key + "' is already resident");
    }
    if (residency_ + size > capacity_) {
        throw CacheOverflow("admitting '" + key + "' (" + std::to_string(size) + ") would raise residency to " +
                            std::to_string(residency_ + size) + " of " + std::to_string(capacity_));
    }
    resident_.emplace(std::move(key), size);
    residency_ += size;
    counters_.peak_residency = std::max(counters_.peak_residency, residency_);
}

void CacheSim::load(std::string_view tag, std::uint64_t size) {
    admit(tag, size);
    counters_.reads += size;
}

void CacheSim::alloc(std::string_view tag, std::uint64_t size) {
    admit(tag, size);
}

void CacheSim::store(std::string_view tag, std::uint64_t size) {
    auto it = resident_.find(std::string(tag));
    if (it == resident_.end()) {
        throw UnknownTag("store of non-resident region '" + std::string(tag) + "'");
    }
    if (it->second != size) {
        throw std::invalid_argument("store size " + std::to_string(size) + " does not match region '" +
                                    std::string(tag) + "' of size " + std::to_string(it->second));
    }
    counters_.writes += size;
}

void CacheSim::evict(std::string_view tag) {
    auto it = resident_.find(std::string(tag));
    if (it == resident_.end()) {
        throw UnknownTag("evict of non-resident region '" + std::string(tag) + "'");
    }
    residency_ -= it->second;
    resident_.erase(it);
}

}  // namespace attnio
