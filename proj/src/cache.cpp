#include "tiersim/cache.hpp"

#include <bit>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

void LlcConfig::validate() const {
  auto pow2 = [](std::uint64_t v, const char* key) {
    if (v == 0 || !std::has_single_bit(v)) {
      throw InputError(fmt::format("{} must be a power of two (got {})", key, v));
    }
  };
  pow2(size_bytes, "llc.size_bytes");
  pow2(associativity, "llc.associativity");
  pow2(line_bytes, "llc.line_bytes");
  if (size_bytes < std::uint64_t{associativity} * line_bytes) {
    throw InputError("llc.size_bytes must be at least llc.associativity * llc.line_bytes");
  }
}

void VictimShadow::push(std::uint64_t block) {
  if (capacity_ == 0) return;
  const auto seq = next_seq_++;
  fifo_.emplace_back(block, seq);
  live_[block] = seq;
  while (fifo_.size() > capacity_) {
    const auto [old_block, old_seq] = fifo_.front();
    fifo_.pop_front();
    auto it = live_.find(old_block);
    if (it != live_.end() && it->second == old_seq) live_.erase(it);
  }
}

bool VictimShadow::take(std::uint64_t block) { return live_.erase(block) > 0; }

LastLevelCache::LastLevelCache(const LlcConfig& config)
    : config_((config.validate(), config)),
      block_mask_(config.line_bytes - 1),
      offset_bits_(static_cast<std::uint32_t>(std::countr_zero(config.line_bytes))),
      set_bits_(static_cast<std::uint32_t>(std::countr_zero(config.sets()))),
      lines_(config.lines()),
      shadow_(config.lines()) {}

std::uint32_t LastLevelCache::set_index(std::uint64_t address) const {
  return static_cast<std::uint32_t>((address >> offset_bits_) & (config_.sets() - 1));
}

std::uint64_t LastLevelCache::tag_of(std::uint64_t address) const {
  return address >> (offset_bits_ + set_bits_);
}

LlcLine* LastLevelCache::lookup(std::uint64_t address) {
  const auto set = set_index(address);
  const auto tag = tag_of(address);
  for (std::uint32_t w = 0; w < config_.associativity; ++w) {
    auto& line = lines_[std::size_t{set} * config_.associativity + w];
    if (line.valid && line.tag == tag) return &line;
  }
  return nullptr;
}

const LlcLine* LastLevelCache::find(std::uint64_t address) const {
  return const_cast<LastLevelCache*>(this)->lookup(address);
}

bool LastLevelCache::contains(std::uint64_t address) const { return find(address) != nullptr; }

LlcLine& LastLevelCache::choose_victim(std::uint32_t set) {
  LlcLine* victim = nullptr;
  for (std::uint32_t w = 0; w < config_.associativity; ++w) {
    auto& line = lines_[std::size_t{set} * config_.associativity + w];
    if (!line.valid) return line;
    if (victim == nullptr || line.lru_stamp < victim->lru_stamp) victim = &line;
  }
  return *victim;
}

LlcAccessResult LastLevelCache::access(std::uint64_t address, AccessKind kind, Cycle) {
  ++counters_.demand_accesses;
  LlcAccessResult result;
  if (auto* line = lookup(address)) {
    ++counters_.demand_hits;
    result.hit = true;
    line->lru_stamp = ++stamp_;
    if (kind == AccessKind::Write) line->dirty = true;
    if (line->prefetched) {
      line->prefetched = false;
      result.useful_prefetch = true;
      ++counters_.useful_prefetches;
    }
    return result;
  }
  ++counters_.demand_misses;
  const auto block = block_of(address);
  if (shadow_.take(block)) {
    result.pollution = true;
    ++counters_.pollution_misses;
  }
  const auto set = set_index(address);
  const auto& v = choose_victim(set);
  if (v.valid) {
    result.victim = CacheVictim{
        (v.tag << (offset_bits_ + set_bits_)) | (std::uint64_t{set} << offset_bits_), true, v.dirty,
        v.prefetched};
  }
  return result;
}

std::optional<CacheVictim> LastLevelCache::fill(std::uint64_t address, Origin origin, Cycle,
                                                bool dirty) {
  if (lookup(address) != nullptr) {
    throw InvariantFault(fmt::format("LLC fill of resident block {:#x}", block_of(address)));
  }
  const bool prefetch = origin == Origin::PrefetchLlc;
  const auto set = set_index(address);
  auto& line = choose_victim(set);
  std::optional<CacheVictim> evicted;
  if (line.valid) {
    evicted = CacheVictim{
        (line.tag << (offset_bits_ + set_bits_)) | (std::uint64_t{set} << offset_bits_), true,
        line.dirty, line.prefetched};
    if (line.dirty) ++counters_.dirty_evictions;
    if (line.prefetched) ++counters_.prefetch_evicted_unused;
    if (prefetch && !line.prefetched) shadow_.push(evicted->block);
  }
  line = LlcLine{tag_of(address), true, dirty, prefetch, ++stamp_};
  if (prefetch) {
    ++counters_.prefetch_fills;
  } else {
    ++counters_.demand_fills;
  }
  return evicted;
}

}  // namespace tiersim
