#include "tiersim/near_cache.hpp"

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

NearCache::NearCache(std::uint32_t subarrays, std::uint32_t slots_per_subarray)
    : slots_(slots_per_subarray), table_(std::size_t{subarrays} * slots_per_subarray) {}

NearCache::Slot& NearCache::slot(std::uint32_t subarray, std::uint32_t index) {
  return table_.at(std::size_t{subarray} * slots_ + index);
}

const NearCache::Slot& NearCache::slot(std::uint32_t subarray, std::uint32_t index) const {
  return table_.at(std::size_t{subarray} * slots_ + index);
}

std::optional<std::uint32_t> NearCache::lookup(std::uint32_t subarray, std::uint32_t far_row,
                                               Cycle now) {
  for (std::uint32_t i = 0; i < slots_; ++i) {
    auto& s = slot(subarray, i);
    if (s.far_row == far_row && !s.inflight) {
      s.lru_stamp = ++stamp_;
      s.last_access = now;
      return i;
    }
  }
  return std::nullopt;
}

bool NearCache::contains(std::uint32_t subarray, std::uint32_t far_row) const {
  for (std::uint32_t i = 0; i < slots_; ++i) {
    const auto& s = slot(subarray, i);
    if (s.far_row == far_row && !s.inflight) return true;
  }
  return false;
}

NearCache::Reservation NearCache::begin_fill(std::uint32_t subarray, std::uint32_t far_row,
                                             Cycle now, bool prefetched) {
  Slot* victim = nullptr;
  std::uint32_t victim_index = 0;
  for (std::uint32_t i = 0; i < slots_; ++i) {
    auto& s = slot(subarray, i);
    if (s.far_row == far_row) {
      throw InvariantFault(fmt::format("far row {} of subarray {} is already {} the near segment",
                                       far_row, subarray, s.inflight ? "migrating into" : "cached in"));
    }
  }
  for (std::uint32_t i = 0; i < slots_; ++i) {
    auto& s = slot(subarray, i);
    if (s.inflight) continue;
    if (!s.far_row) {
      victim = &s;
      victim_index = i;
      break;
    }
    if (victim == nullptr || s.lru_stamp < victim->lru_stamp) {
      victim = &s;
      victim_index = i;
    }
  }
  if (victim == nullptr) {
    throw InvariantFault(fmt::format("no near-segment slot available in subarray {}", subarray));
  }
  Reservation r{victim_index, std::nullopt};
  if (victim->far_row) r.victim = *victim;
  *victim = Slot{far_row, false, true, prefetched, ++stamp_, now};
  return r;
}

void NearCache::complete_fill(std::uint32_t subarray, std::uint32_t index, Cycle now) {
  auto& s = slot(subarray, index);
  if (!s.inflight) throw InvariantFault("completing a near-segment fill that is not in flight");
  s.inflight = false;
  s.last_access = now;
}

std::uint32_t NearCache::occupancy(std::uint32_t subarray) const {
  std::uint32_t n = 0;
  for (std::uint32_t i = 0; i < slots_; ++i) n += slot(subarray, i).far_row.has_value();
  return n;
}

}  // namespace tiersim
