#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tiersim/dram.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

struct LlcConfig {
  std::uint64_t size_bytes = 2 * 1024 * 1024;
  std::uint32_t associativity = 16;
  std::uint32_t line_bytes = 64;
  bool enabled = true;
  /// Demand latency of an LLC hit, in memory cycles.
  std::uint32_t hit_latency = 10;

  void validate() const;
  std::uint32_t sets() const {
    return static_cast<std::uint32_t>(size_bytes / (std::uint64_t{associativity} * line_bytes));
  }
  std::uint64_t lines() const { return size_bytes / line_bytes; }
};

struct LlcLine {
  std::uint64_t tag = 0;
  bool valid = false;
  bool dirty = false;
  bool prefetched = false;  // filled by a prefetch and not yet demand-touched
  std::uint64_t lru_stamp = 0;
};

/// Bounded FIFO of block addresses evicted by prefetch fills. Membership is
/// exact for the most recent `capacity` insertions.
class VictimShadow {
 public:
  explicit VictimShadow(std::size_t capacity) : capacity_(capacity) {}

  void push(std::uint64_t block);
  bool contains(std::uint64_t block) const { return live_.contains(block); }
  /// Removes the block if present; returns whether it was.
  bool take(std::uint64_t block);
  std::size_t size() const { return live_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::uint64_t next_seq_ = 0;
  std::deque<std::pair<std::uint64_t, std::uint64_t>> fifo_;  // (block, seq)
  std::unordered_map<std::uint64_t, std::uint64_t> live_;     // block -> seq
};

struct CacheVictim {
  std::uint64_t block = 0;
  bool valid = false;
  bool dirty = false;
  bool prefetched = false;
};

struct LlcAccessResult {
  bool hit = false;
  /// HIT on a line whose `prefetched` flag was set (first demand touch).
  bool useful_prefetch = false;
  /// MISS whose block had been displaced by a prefetch fill.
  bool pollution = false;
  /// MISS: the line a fill would replace right now.
  CacheVictim victim;
};

struct LlcCounters {
  std::uint64_t demand_accesses = 0;
  std::uint64_t demand_hits = 0;
  std::uint64_t demand_misses = 0;
  std::uint64_t demand_fills = 0;
  std::uint64_t prefetch_fills = 0;
  std::uint64_t useful_prefetches = 0;
  std::uint64_t prefetch_evicted_unused = 0;
  std::uint64_t pollution_misses = 0;
  std::uint64_t dirty_evictions = 0;
};

/// Set-associative, write-back, write-allocate LLC with true LRU.
class LastLevelCache {
 public:
  explicit LastLevelCache(const LlcConfig& config);

  std::uint64_t block_of(std::uint64_t address) const { return address & ~block_mask_; }

  /// Demand lookup. Does not allocate; a MISS is followed by fill() once the
  /// data arrives.
  LlcAccessResult access(std::uint64_t address, AccessKind kind, Cycle now);

  /// Installs a block after a miss. `dirty` marks write-allocated lines.
  /// Returns the evicted line, if a valid one was displaced.
  std::optional<CacheVictim> fill(std::uint64_t address, Origin origin, Cycle now, bool dirty);

  bool contains(std::uint64_t address) const;
  const LlcLine* find(std::uint64_t address) const;
  const LlcCounters& counters() const { return counters_; }
  const VictimShadow& shadow() const { return shadow_; }
  const LlcConfig& config() const { return config_; }
  std::uint32_t set_index(std::uint64_t address) const;

 private:
  LlcLine* lookup(std::uint64_t address);
  LlcLine& choose_victim(std::uint32_t set);
  std::uint64_t tag_of(std::uint64_t address) const;

  LlcConfig config_;
  std::uint64_t block_mask_;
  std::uint32_t offset_bits_;
  std::uint32_t set_bits_;
  std::uint64_t stamp_ = 0;
  std::vector<LlcLine> lines_;
  VictimShadow shadow_;
  LlcCounters counters_;
};

}  // namespace tiersim
