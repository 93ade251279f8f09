#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tiersim/dram.hpp"

namespace tiersim {

/// Near-segment rows managed as an LRU cache of far rows, one set of slots
/// per subarray. Subarrays are addressed by a dense index (flat bank *
/// subarrays_per_bank + subarray).
class NearCache {
 public:
  struct Slot {
    std::optional<std::uint32_t> far_row;  // EMPTY when unset
    bool dirty = false;
    bool inflight = false;
    bool prefetched = false;  // installed by the prefetcher, not yet demand-touched
    std::uint64_t lru_stamp = 0;
    Cycle last_access = 0;
  };

  struct Reservation {
    std::uint32_t slot = 0;
    /// Previous contents when a valid row was displaced.
    std::optional<Slot> victim;
  };

  NearCache(std::uint32_t subarrays, std::uint32_t slots_per_subarray);

  /// HIT returns the slot index and refreshes its LRU stamp; MISS leaves the
  /// cache untouched. In-flight slots never hit.
  std::optional<std::uint32_t> lookup(std::uint32_t subarray, std::uint32_t far_row, Cycle now);
  bool contains(std::uint32_t subarray, std::uint32_t far_row) const;

  /// Starts a migration: picks an EMPTY slot, else the LRU slot that is not
  /// in flight, and marks it in flight for `far_row`. Throws InvariantFault if
  /// the row is already cached or in flight, or every slot is in flight.
  Reservation begin_fill(std::uint32_t subarray, std::uint32_t far_row, Cycle now, bool prefetched);
  void complete_fill(std::uint32_t subarray, std::uint32_t slot, Cycle now);

  Slot& slot(std::uint32_t subarray, std::uint32_t index);
  const Slot& slot(std::uint32_t subarray, std::uint32_t index) const;
  std::uint32_t slots_per_subarray() const { return slots_; }
  std::uint32_t occupancy(std::uint32_t subarray) const;

 private:
  std::uint32_t slots_;
  std::uint64_t stamp_ = 0;
  std::vector<Slot> table_;
};

}  // namespace tiersim
