#include "tiersim/prefetch.hpp"

#include <algorithm>
#include <bit>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

std::string_view to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::None: return "NONE";
    case DecisionKind::LongHit: return "LONG_HIT";
    case DecisionKind::ShortHit: return "SHORT_HIT";
  }
  return "?";
}

void PrefetchConfig::validate(const DramConfig& dram) const {
  if (region_bytes == 0 || !std::has_single_bit(region_bytes)) {
    throw InputError("prefetch.region_bytes must be a power of two");
  }
  if (region_bytes < dram.cacheline_bytes) {
    throw InputError("prefetch.region_bytes must be at least one cache line");
  }
  if (region_bytes / dram.cacheline_bytes > 64) {
    throw InputError("prefetch.region_bytes may span at most 64 cache lines");
  }
  if (history_slots == 0 || !std::has_single_bit(history_slots)) {
    throw InputError("prefetch.history_slots must be a power of two");
  }
  if (accumulation_capacity == 0) throw InputError("prefetch.accumulation_capacity must be >= 1");
  if (gen_timeout == 0) throw InputError("prefetch.gen_timeout must be >= 1");
}

std::uint32_t short_event_index(const ShortEvent& event, std::uint32_t history_slots) {
  const auto bits = static_cast<std::uint32_t>(std::countr_zero(history_slots));
  if (bits == 0) return 0;
  const std::uint64_t key = (event.pc << 6) ^ event.offset;
  return static_cast<std::uint32_t>((key * 0x9E3779B97F4A7C15ULL) >> (64 - bits));
}

SpatialPrefetcher::SpatialPrefetcher(const PrefetchConfig& config, const DramConfig& dram)
    : config_((config.validate(dram), config)),
      dram_(dram),
      mapper_(dram),
      region_mask_(std::uint64_t{config.region_bytes} - 1),
      block_mask_(std::uint64_t{dram.cacheline_bytes} - 1),
      blocks_per_region_(config.region_bytes / dram.cacheline_bytes),
      history_(config.history_slots) {
  accumulation_.reserve(config.accumulation_capacity);
}

std::uint32_t SpatialPrefetcher::offset_of(std::uint64_t address) const {
  return static_cast<std::uint32_t>((address & region_mask_) / dram_.cacheline_bytes);
}

bool SpatialPrefetcher::tracking(std::uint64_t address) const {
  const auto region = region_of(address);
  return std::any_of(accumulation_.begin(), accumulation_.end(),
                     [region](const auto& e) { return e.region_base == region; });
}

std::optional<AccumulationEntry> SpatialPrefetcher::record_access(std::uint64_t pc,
                                                                  std::uint64_t address,
                                                                  Cycle now) {
  const auto region = region_of(address);
  const auto bit = Footprint{1} << offset_of(address);
  for (auto& entry : accumulation_) {
    if (entry.region_base == region) {
      entry.footprint |= bit;
      entry.last_touch = now;
      entry.lru_stamp = ++stamp_;
      return std::nullopt;
    }
  }

  std::optional<AccumulationEntry> committed;
  if (accumulation_.size() >= config_.accumulation_capacity) {
    auto lru = std::min_element(accumulation_.begin(), accumulation_.end(),
                                [](const auto& a, const auto& b) { return a.lru_stamp < b.lru_stamp; });
    committed = *lru;
    accumulation_.erase(lru);
    commit_generation(*committed);
  }
  accumulation_.push_back(
      AccumulationEntry{region, LongEvent{pc, block_of(address)}, bit, now, ++stamp_});
  return committed;
}

std::vector<AccumulationEntry> SpatialPrefetcher::tick(Cycle now) {
  std::vector<AccumulationEntry> expired;
  auto idle = [&](const AccumulationEntry& e) { return now - e.last_touch > config_.gen_timeout; };
  for (const auto& e : accumulation_) {
    if (idle(e)) expired.push_back(e);
  }
  if (expired.empty()) return expired;
  // Commit oldest first so replay order does not depend on table layout.
  std::sort(expired.begin(), expired.end(),
            [](const auto& a, const auto& b) { return a.lru_stamp < b.lru_stamp; });
  std::erase_if(accumulation_, idle);
  for (const auto& e : expired) commit_generation(e);
  return expired;
}

void SpatialPrefetcher::commit_generation(const AccumulationEntry& entry) {
  const ShortEvent event{entry.trigger.pc, offset_of(entry.trigger.block_address)};
  auto& slot = history_[short_event_index(event, config_.history_slots)];
  slot = HistoryEntry{true, entry.trigger, entry.footprint, ++stamp_};
}

PrefetchDecision SpatialPrefetcher::lookup(std::uint64_t pc, std::uint64_t address) const {
  PrefetchDecision decision;
  const auto region = region_of(address);
  decision.region_base = region;
  const ShortEvent event{pc, offset_of(address)};
  const auto& slot = history_[short_event_index(event, config_.history_slots)];
  if (!slot.valid) return decision;

  for (std::uint32_t i = 0; i < blocks_per_region_; ++i) {
    if (slot.footprint & (Footprint{1} << i)) {
      decision.blocks.push_back(region + std::uint64_t{i} * dram_.cacheline_bytes);
    }
  }
  if (slot.tag == LongEvent{pc, block_of(address)}) {
    decision.kind = DecisionKind::LongHit;
    return decision;
  }

  decision.kind = DecisionKind::ShortHit;
  for (const auto block : decision.blocks) {
    if (decision.rows.size() >= config_.max_row_migrations) break;
    if (block >= mapper_.capacity()) break;
    auto coord = mapper_.map(block);
    if (!is_far_like(coord, dram_)) continue;
    coord.column = 0;
    if (std::find(decision.rows.begin(), decision.rows.end(), coord) == decision.rows.end()) {
      decision.rows.push_back(coord);
    }
  }
  return decision;
}

// ---------------------------------------------------------------------------

void PrefetchMetrics::account(PrefetchEvent event) {
  switch (event) {
    case PrefetchEvent::Issued: ++issued; break;
    case PrefetchEvent::DemandHit: ++useful; break;
    case PrefetchEvent::MergedInFlight:
      ++useful;
      ++late;
      break;
    case PrefetchEvent::EvictedUnused: ++evicted_unused; break;
    case PrefetchEvent::UncoveredMiss: ++uncovered_misses; break;
  }
}

namespace {
double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double PrefetchMetrics::accuracy() const { return ratio(useful, issued); }
double PrefetchMetrics::lateness() const { return ratio(late, useful); }
double PrefetchMetrics::coverage() const { return ratio(useful, useful + uncovered_misses); }

double pollution_ratio(std::uint64_t pollution_misses, std::uint64_t demand_misses) {
  return ratio(pollution_misses, demand_misses);
}

}  // namespace tiersim
