#include "tiersim/dram.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

std::string_view to_string(DramMode mode) {
  switch (mode) {
    case DramMode::Baseline: return "baseline";
    case DramMode::Tldram: return "tldram";
    case DramMode::Crow: return "crow";
  }
  return "?";
}

std::string_view to_string(DramCommand cmd) {
  switch (cmd) {
    case DramCommand::Activate: return "ACTIVATE";
    case DramCommand::Read: return "READ";
    case DramCommand::Write: return "WRITE";
    case DramCommand::Precharge: return "PRECHARGE";
    case DramCommand::Refresh: return "REFRESH";
    case DramCommand::Migrate: return "MIGRATE";
  }
  return "?";
}

std::string_view to_string(RowSource src) {
  switch (src) {
    case RowSource::Near: return "NEAR";
    case RowSource::Far: return "FAR";
    case RowSource::Copy: return "COPY";
  }
  return "?";
}

std::string_view to_string(BankPhase phase) {
  switch (phase) {
    case BankPhase::Idle: return "IDLE";
    case BankPhase::Activating: return "ACTIVATING";
    case BankPhase::Active: return "ACTIVE";
    case BankPhase::Precharging: return "PRECHARGING";
    case BankPhase::Migrating: return "MIGRATING";
    case BankPhase::Refreshing: return "REFRESHING";
  }
  return "?";
}

namespace {

void require_pow2(std::uint64_t value, std::string_view key) {
  if (value == 0 || !std::has_single_bit(value)) {
    throw InputError(fmt::format("{} must be a power of two (got {})", key, value));
  }
}

void require_positive(std::uint64_t value, std::string_view key) {
  if (value == 0) throw InputError(fmt::format("{} must be at least 1", key));
}

std::uint32_t log2u(std::uint64_t v) { return static_cast<std::uint32_t>(std::countr_zero(v)); }

// Ceiling that ignores floating-point noise, so 10 * 0.7 rounds to 7.
std::uint32_t scaled_ceil(std::uint32_t base, double factor) {
  return static_cast<std::uint32_t>(std::ceil(static_cast<double>(base) * factor - 1e-9));
}

}  // namespace

void DramConfig::validate() const {
  require_pow2(channels, "geometry.channels");
  require_pow2(ranks_per_channel, "geometry.ranks_per_channel");
  require_pow2(banks_per_rank, "geometry.banks_per_rank");
  require_pow2(subarrays_per_bank, "geometry.subarrays_per_bank");
  require_pow2(rows_per_subarray, "geometry.rows_per_subarray");
  require_pow2(near_rows_per_subarray, "geometry.near_rows_per_subarray");
  require_pow2(columns_per_row, "geometry.columns_per_row");
  require_pow2(cacheline_bytes, "geometry.cacheline_bytes");
  if (near_rows_per_subarray >= rows_per_subarray) {
    throw InputError("geometry.near_rows_per_subarray must be below geometry.rows_per_subarray");
  }
  if (copy_rows_per_subarray >= rows_per_subarray) {
    throw InputError("geometry.copy_rows_per_subarray must be below geometry.rows_per_subarray");
  }
  // 64-bit physical addresses.
  const auto bits = log2u(channels) + log2u(ranks_per_channel) + log2u(banks_per_rank) +
                    log2u(subarrays_per_bank) + log2u(rows_per_subarray) +
                    log2u(columns_per_row) + log2u(cacheline_bytes);
  if (bits >= 63) throw InputError("geometry describes more than 2^63 bytes");

  require_positive(tRCD_near, "timing.tRCD_near");
  require_positive(tRCD_far, "timing.tRCD_far");
  require_positive(tRAS_near, "timing.tRAS_near");
  require_positive(tRAS_far, "timing.tRAS_far");
  require_positive(tRP, "timing.tRP");
  require_positive(tCL, "timing.tCL");
  require_positive(tBUS, "timing.tBUS");
  require_positive(tMIG, "timing.tMIG");
  require_positive(tRFC, "timing.tRFC");
  require_positive(tREFI, "timing.tREFI");
  if (refresh_window < tREFI) throw InputError("timing.refresh_window must be at least timing.tREFI");
  if (tRCD_far > tRAS_far) throw InputError("timing.tRCD_far must not exceed timing.tRAS_far");
  if (tRCD_near > tRAS_near) throw InputError("timing.tRCD_near must not exceed timing.tRAS_near");

  if (mode == DramMode::Tldram) {
    if (tRCD_near >= tRCD_far) {
      throw InputError(fmt::format(
          "tldram mode requires timing.tRCD_near ({}) < timing.tRCD_far ({})", tRCD_near, tRCD_far));
    }
    if (tRAS_near > tRAS_far) {
      throw InputError(fmt::format(
          "tldram mode requires timing.tRAS_near ({}) <= timing.tRAS_far ({})", tRAS_near, tRAS_far));
    }
  }
  if (!(crow_trcd_factor > 0.0 && crow_trcd_factor <= 1.0)) {
    throw InputError("crow.trcd_factor must lie in (0, 1]");
  }
  if (!(crow_tras_factor > 0.0 && crow_tras_factor <= 1.0)) {
    throw InputError("crow.tras_factor must lie in (0, 1]");
  }
  if (mode == DramMode::Crow) {
    require_positive(copy_rows_per_subarray, "geometry.copy_rows_per_subarray");
    require_positive(hot_activation_threshold, "crow.hot_activation_threshold");
  }
}

std::uint64_t DramConfig::capacity_bytes() const {
  return row_bytes() * total_banks() * subarrays_per_bank * rows_per_subarray;
}

std::uint32_t DramConfig::reserved_rows_per_subarray() const {
  switch (mode) {
    case DramMode::Tldram: return near_rows_per_subarray;
    case DramMode::Crow: return copy_rows_per_subarray;
    case DramMode::Baseline: return 0;
  }
  return 0;
}

AddressMapper::AddressMapper(const DramConfig& config)
    : offset_bits_(log2u(config.cacheline_bytes)),
      column_bits_(log2u(config.columns_per_row)),
      channel_bits_(log2u(config.channels)),
      bank_bits_(log2u(config.banks_per_rank)),
      rank_bits_(log2u(config.ranks_per_channel)),
      row_bits_(log2u(config.rows_per_subarray)),
      subarray_bits_(log2u(config.subarrays_per_bank)),
      banks_per_rank_(config.banks_per_rank),
      ranks_(config.ranks_per_channel),
      capacity_(config.capacity_bytes()) {}

DramCoord AddressMapper::map(std::uint64_t address) const {
  if (address >= capacity_) {
    throw InputError(fmt::format("address {:#x} is outside the {}-byte address space", address,
                                 capacity_));
  }
  auto take = [&address](std::uint32_t bits) {
    const auto field = static_cast<std::uint32_t>(address & ((std::uint64_t{1} << bits) - 1));
    address >>= bits;
    return field;
  };
  DramCoord c;
  take(offset_bits_);
  c.column = take(column_bits_);
  c.channel = take(channel_bits_);
  c.bank = take(bank_bits_);
  c.rank = take(rank_bits_);
  c.row = take(row_bits_);
  c.subarray = take(subarray_bits_);
  return c;
}

std::uint64_t AddressMapper::encode(const DramCoord& c) const {
  std::uint64_t address = c.subarray;
  address = (address << row_bits_) | c.row;
  address = (address << rank_bits_) | c.rank;
  address = (address << bank_bits_) | c.bank;
  address = (address << channel_bits_) | c.channel;
  address = (address << column_bits_) | c.column;
  return address << offset_bits_;
}

std::uint32_t AddressMapper::flat_bank(const DramCoord& c) const {
  return (c.channel * ranks_ + c.rank) * banks_per_rank_ + c.bank;
}

DramCoord map_address(std::uint64_t address, const DramConfig& config) {
  return AddressMapper(config).map(address);
}

Segment segment_of(const DramCoord& coord, const DramConfig& config) {
  if (config.mode != DramMode::Tldram) {
    throw InvariantFault(fmt::format("segment_of called in {} mode", to_string(config.mode)));
  }
  return coord.row < config.near_rows_per_subarray ? Segment::Near : Segment::Far;
}

bool is_far_like(const DramCoord& coord, const DramConfig& config) {
  return config.mode != DramMode::Tldram || segment_of(coord, config) == Segment::Far;
}

ActivationTiming activation_timing(RowSource source, const DramConfig& config) {
  switch (source) {
    case RowSource::Near: return {config.tRCD_near, config.tRAS_near};
    case RowSource::Far: return {config.tRCD_far, config.tRAS_far};
    case RowSource::Copy:
      return {scaled_ceil(config.tRCD_far, config.crow_trcd_factor),
              scaled_ceil(config.tRAS_far, config.crow_tras_factor)};
  }
  return {config.tRCD_far, config.tRAS_far};
}

ActivationTiming activate_latency(const DramCoord& coord, const DramConfig& config,
                                  const CopyRowTable* copy_table) {
  switch (config.mode) {
    case DramMode::Tldram:
      return activation_timing(
          segment_of(coord, config) == Segment::Near ? RowSource::Near : RowSource::Far, config);
    case DramMode::Crow:
      if (copy_table != nullptr && copy_table->contains(coord.subarray, coord.row)) {
        return activation_timing(RowSource::Copy, config);
      }
      return activation_timing(RowSource::Far, config);
    case DramMode::Baseline: break;
  }
  return activation_timing(RowSource::Far, config);
}

// ---------------------------------------------------------------------------

CopyRowTable::CopyRowTable(std::uint32_t subarrays, std::uint32_t slots_per_subarray)
    : slots_(slots_per_subarray), table_(std::size_t{subarrays} * slots_per_subarray) {}

bool CopyRowTable::contains(std::uint32_t subarray, std::uint32_t row) const {
  for (std::uint32_t i = 0; i < slots_; ++i) {
    const auto& s = table_[std::size_t{subarray} * slots_ + i];
    if (s.valid && s.row == row) return true;
  }
  return false;
}

CopyRowTable::Slot* CopyRowTable::touch(std::uint32_t subarray, std::uint32_t row, Cycle now) {
  for (std::uint32_t i = 0; i < slots_; ++i) {
    auto& s = table_[std::size_t{subarray} * slots_ + i];
    if (s.valid && s.row == row) {
      s.lru_stamp = ++stamp_;
      s.last_access = now;
      return &s;
    }
  }
  return nullptr;
}

std::optional<CopyRowTable::Slot> CopyRowTable::install(std::uint32_t subarray, std::uint32_t row,
                                                        Cycle now, bool prefetched) {
  if (slots_ == 0) throw InvariantFault("copy-row install with zero copy rows");
  if (contains(subarray, row)) {
    throw InvariantFault(
        fmt::format("row {} of subarray {} is already duplicated in a copy row", row, subarray));
  }
  Slot* victim = nullptr;
  for (std::uint32_t i = 0; i < slots_; ++i) {
    auto& s = table_[std::size_t{subarray} * slots_ + i];
    if (!s.valid) {
      victim = &s;
      break;
    }
    if (victim == nullptr || s.lru_stamp < victim->lru_stamp) victim = &s;
  }
  std::optional<Slot> displaced;
  if (victim->valid) displaced = *victim;
  *victim = Slot{row, true, prefetched, ++stamp_, now};
  return displaced;
}

const CopyRowTable::Slot& CopyRowTable::slot(std::uint32_t subarray, std::uint32_t index) const {
  return table_.at(std::size_t{subarray} * slots_ + index);
}

std::uint32_t CopyRowTable::occupancy(std::uint32_t subarray) const {
  std::uint32_t n = 0;
  for (std::uint32_t i = 0; i < slots_; ++i) n += table_[std::size_t{subarray} * slots_ + i].valid;
  return n;
}

// ---------------------------------------------------------------------------

BankPhase BankState::phase_at(Cycle now) const {
  if (now < busy_until_) return phase_;
  switch (phase_) {
    case BankPhase::Activating:
    case BankPhase::Active: return BankPhase::Active;
    default: return BankPhase::Idle;
  }
}

Cycle BankState::earliest_issue(DramCommand cmd, Cycle now) const {
  const bool row_open = open_row_.has_value();
  const Cycle ready = std::max(now, busy_until_);
  switch (cmd) {
    case DramCommand::Activate:
    case DramCommand::Refresh:
    case DramCommand::Migrate:
      // Needs IDLE: a pending precharge/migration/refresh settles at busy_until.
      return row_open ? kNever : ready;
    case DramCommand::Read:
    case DramCommand::Write:
      if (!row_open) return kNever;
      return std::max(ready, act_cycle_ + open_row_->timing.trcd);
    case DramCommand::Precharge:
      if (!row_open) return kNever;
      return std::max(ready, act_cycle_ + open_row_->timing.tras);
  }
  return kNever;
}

Cycle BankState::issue(DramCommand cmd, Cycle cycle, const DramConfig& config,
                       const CommandArgs& args) {
  const Cycle earliest = earliest_issue(cmd, cycle);
  if (earliest != cycle) {
    throw InvariantFault(fmt::format(
        "{} issued at cycle {} but earliest legal cycle is {} (phase {}, busy_until {}, act {})",
        to_string(cmd), cycle, earliest == kNever ? std::string("never") : std::to_string(earliest),
        to_string(phase_at(cycle)), busy_until_, act_cycle_));
  }
  switch (cmd) {
    case DramCommand::Activate:
      open_row_ = OpenRow{args.subarray, args.row, args.source, args.timing};
      act_cycle_ = cycle;
      busy_until_ = cycle + args.timing.trcd;
      phase_ = BankPhase::Activating;
      ++activations_[row_key(args.subarray, args.row)];
      last_access_[row_key(args.subarray, args.row)] = cycle;
      return busy_until_;
    case DramCommand::Read:
    case DramCommand::Write:
      if (open_row_->subarray != args.subarray || open_row_->row != args.row) {
        throw InvariantFault(fmt::format("{} to row {}:{} while row {}:{} is open", to_string(cmd),
                                         args.subarray, args.row, open_row_->subarray,
                                         open_row_->row));
      }
      busy_until_ = cycle + config.tBUS;
      phase_ = BankPhase::Active;
      last_access_[row_key(args.subarray, args.row)] = cycle;
      return cycle + config.tCL + config.tBUS;
    case DramCommand::Precharge:
      open_row_.reset();
      busy_until_ = cycle + config.tRP;
      phase_ = BankPhase::Precharging;
      return busy_until_;
    case DramCommand::Refresh:
      busy_until_ = cycle + (args.occupancy != 0 ? args.occupancy : config.tRFC);
      phase_ = BankPhase::Refreshing;
      return busy_until_;
    case DramCommand::Migrate:
      busy_until_ = cycle + (args.occupancy != 0 ? args.occupancy : config.tMIG);
      phase_ = BankPhase::Migrating;
      last_access_[row_key(args.subarray, args.row)] = cycle;
      return busy_until_;
  }
  return cycle;
}

std::uint64_t BankState::activation_count(std::uint32_t subarray, std::uint32_t row) const {
  auto it = activations_.find(row_key(subarray, row));
  return it == activations_.end() ? 0 : it->second;
}

std::optional<Cycle> BankState::last_access(std::uint32_t subarray, std::uint32_t row) const {
  auto it = last_access_.find(row_key(subarray, row));
  if (it == last_access_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

bool refresh_window_elapsed(const RowRefreshState& row, Cycle now, const DramConfig& config) {
  return static_cast<std::int64_t>(now) - row.last_refresh >=
         static_cast<std::int64_t>(config.refresh_window);
}

bool refresh_due(const RowRefreshState& row, Cycle now, const DramConfig& config) {
  if (!refresh_window_elapsed(row, now, config)) return false;
  const bool recently_accessed =
      row.last_access.has_value() && now - *row.last_access < config.refresh_window;
  return !(row.duplicate_slot && recently_accessed);
}

std::uint64_t nominal_rows_per_refresh(std::uint64_t rows_in_bank, const DramConfig& config) {
  const auto num = rows_in_bank * config.tREFI;
  return std::max<std::uint64_t>(1, (num + config.refresh_window - 1) / config.refresh_window);
}

Cycle refresh_occupancy(std::uint64_t rows_performed, std::uint64_t rows_in_bank,
                        const DramConfig& config) {
  const auto nominal = nominal_rows_per_refresh(rows_in_bank, config);
  return (config.tRFC * rows_performed + nominal - 1) / nominal;
}

}  // namespace tiersim
