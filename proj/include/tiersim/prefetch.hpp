#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tiersim/dram.hpp"

namespace tiersim {

struct PrefetchConfig {
  bool enabled = false;
  std::uint32_t region_bytes = 2048;
  std::uint32_t history_slots = 4096;
  std::uint32_t accumulation_capacity = 64;
  Cycle gen_timeout = 100'000;
  std::uint32_t max_block_prefetches = 32;
  std::uint32_t max_row_migrations = 2;
  /// In-flight LLC prefetch capacity; further prefetches are dropped.
  std::uint32_t mshr_capacity = 32;

  void validate(const DramConfig& dram) const;
};

/// Bit i set means block i of the region was touched.
using Footprint = std::uint64_t;

/// PC plus the block address of a generation's first access.
struct LongEvent {
  std::uint64_t pc = 0;
  std::uint64_t block_address = 0;

  friend bool operator==(const LongEvent&, const LongEvent&) = default;
};

/// PC plus the block offset of a generation's first access within its region.
struct ShortEvent {
  std::uint64_t pc = 0;
  std::uint32_t offset = 0;

  friend bool operator==(const ShortEvent&, const ShortEvent&) = default;
};

struct AccumulationEntry {
  std::uint64_t region_base = 0;
  LongEvent trigger;
  Footprint footprint = 0;
  Cycle last_touch = 0;
  std::uint64_t lru_stamp = 0;
};

struct HistoryEntry {
  bool valid = false;
  LongEvent tag;
  Footprint footprint = 0;
  std::uint64_t lru_stamp = 0;
};

enum class DecisionKind { None, LongHit, ShortHit };

std::string_view to_string(DecisionKind kind);

struct PrefetchDecision {
  DecisionKind kind = DecisionKind::None;
  std::uint64_t region_base = 0;
  /// Recorded footprint rebased onto the trigger's region, ascending.
  std::vector<std::uint64_t> blocks;
  /// SHORT_HIT: far rows covering those blocks, ascending by address, capped
  /// at max_row_migrations.
  std::vector<DramCoord> rows;
};

/// History slot of a short event:
///   key   = (pc << 6) ^ offset
///   index = (key * 0x9E3779B97F4A7C15) >> (64 - log2(slots))
/// (index 0 when there is a single slot).
std::uint32_t short_event_index(const ShortEvent& event, std::uint32_t history_slots);

/// Spatial footprint prefetcher with one history table probed by two event
/// lengths. A history slot is indexed by the short event (PC + trigger
/// offset) and tagged with the full long event (PC + trigger address):
///
///   - long-event match: the footprint is accurate for exactly this trigger,
///     so its blocks are prefetched into the LLC;
///   - short-event match only: the same code touched a different region, so
///     the footprint is a coverage-oriented guess, used to migrate the far
///     rows it covers into the near segment.
///
/// Footprints accumulate per region while the region's generation is live.
/// A generation ends when its entry is evicted from the accumulation table
/// (LRU) or has been idle for more than gen_timeout cycles.
class SpatialPrefetcher {
 public:
  SpatialPrefetcher(const PrefetchConfig& config, const DramConfig& dram);

  std::uint64_t region_of(std::uint64_t address) const { return address & ~region_mask_; }
  std::uint32_t offset_of(std::uint64_t address) const;
  std::uint64_t block_of(std::uint64_t address) const { return address & ~block_mask_; }

  /// Whether the address's region has a live generation.
  bool tracking(std::uint64_t address) const;

  /// Accumulates a demand access. Starting a generation in a full table
  /// evicts the LRU entry, which is committed and returned.
  std::optional<AccumulationEntry> record_access(std::uint64_t pc, std::uint64_t address,
                                                 Cycle now);

  /// Commits and removes generations idle for more than gen_timeout.
  std::vector<AccumulationEntry> tick(Cycle now);

  void commit_generation(const AccumulationEntry& entry);

  PrefetchDecision lookup(std::uint64_t pc, std::uint64_t address) const;

  const HistoryEntry& history_slot(std::uint32_t index) const { return history_.at(index); }
  const std::vector<AccumulationEntry>& accumulation() const { return accumulation_; }
  const PrefetchConfig& config() const { return config_; }
  std::uint32_t blocks_per_region() const { return blocks_per_region_; }

 private:
  PrefetchConfig config_;
  DramConfig dram_;
  AddressMapper mapper_;
  std::uint64_t region_mask_;
  std::uint64_t block_mask_;
  std::uint32_t blocks_per_region_;
  std::uint64_t stamp_ = 0;
  std::vector<AccumulationEntry> accumulation_;
  std::vector<HistoryEntry> history_;
};

enum class PrefetchEvent {
  Issued,           // an LLC prefetch or prefetch-triggered migration was sent
  DemandHit,        // first demand touch of a completed prefetch
  MergedInFlight,   // demand arrived while the prefetch was still in flight
  EvictedUnused,    // prefetched line or row left before any demand touch
  UncoveredMiss,    // demand miss not served by any prefetch
};

struct PrefetchMetrics {
  std::uint64_t issued = 0;
  std::uint64_t useful = 0;
  std::uint64_t late = 0;
  std::uint64_t evicted_unused = 0;
  std::uint64_t uncovered_misses = 0;

  void account(PrefetchEvent event);

  /// useful / issued, 0 when nothing was issued.
  double accuracy() const;
  /// late / useful, 0 when nothing was useful.
  double lateness() const;
  /// useful / (useful + uncovered demand misses), 0 when both are 0.
  double coverage() const;
};

/// pollution misses / demand misses, 0 without misses.
double pollution_ratio(std::uint64_t pollution_misses, std::uint64_t demand_misses);

}  // namespace tiersim
