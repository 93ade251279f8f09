#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tiersim {

using Cycle = std::uint64_t;

enum class DramMode { Baseline, Tldram, Crow };
enum class Segment { Near, Far };
enum class DramCommand { Activate, Read, Write, Precharge, Refresh, Migrate };

/// Where the data of an activated row is sensed from. `Near` covers both the
/// addressable near rows and far rows currently cached in the near segment;
/// `Copy` is a CROW dual activation of a regular row and its copy row.
enum class RowSource { Near, Far, Copy };

std::string_view to_string(DramMode mode);
std::string_view to_string(DramCommand cmd);
std::string_view to_string(RowSource src);

struct DramConfig {
  // Geometry. Every extent below except copy_rows_per_subarray is a power of two.
  std::uint32_t channels = 1;
  std::uint32_t ranks_per_channel = 1;
  std::uint32_t banks_per_rank = 8;
  std::uint32_t subarrays_per_bank = 8;
  std::uint32_t rows_per_subarray = 512;
  std::uint32_t near_rows_per_subarray = 32;
  std::uint32_t columns_per_row = 128;
  std::uint32_t cacheline_bytes = 64;
  std::uint32_t copy_rows_per_subarray = 8;

  // Timing, in memory cycles.
  std::uint32_t tRCD_near = 6;
  std::uint32_t tRCD_far = 11;
  std::uint32_t tRAS_near = 19;
  std::uint32_t tRAS_far = 28;
  std::uint32_t tRP = 11;
  std::uint32_t tCL = 11;
  std::uint32_t tBUS = 4;
  std::uint32_t tMIG = 40;
  std::uint32_t tRFC = 208;
  std::uint32_t tREFI = 6240;
  std::uint64_t refresh_window = 64'000'000;
  bool refresh_enabled = true;

  double crow_trcd_factor = 0.62;
  double crow_tras_factor = 0.79;
  std::uint32_t hot_activation_threshold = 2;

  DramMode mode = DramMode::Baseline;

  /// Throws InputError on any geometry or timing inconsistency.
  void validate() const;

  std::uint64_t row_bytes() const { return std::uint64_t{columns_per_row} * cacheline_bytes; }
  std::uint32_t total_banks() const { return channels * ranks_per_channel * banks_per_rank; }
  std::uint64_t capacity_bytes() const;
  /// Rows per subarray that are not addressable: near-segment cache slots in
  /// TLDRAM mode, copy rows in CROW mode, none otherwise.
  std::uint32_t reserved_rows_per_subarray() const;
};

struct DramCoord {
  std::uint32_t channel = 0;
  std::uint32_t rank = 0;
  std::uint32_t bank = 0;
  std::uint32_t subarray = 0;
  std::uint32_t row = 0;
  std::uint32_t column = 0;

  friend bool operator==(const DramCoord&, const DramCoord&) = default;
};

/// Bit-slices physical addresses, low to high:
/// [block offset | column | channel | bank | rank | row | subarray].
class AddressMapper {
 public:
  explicit AddressMapper(const DramConfig& config);

  DramCoord map(std::uint64_t address) const;
  std::uint64_t encode(const DramCoord& coord) const;
  /// Dense bank index in [0, total_banks).
  std::uint32_t flat_bank(const DramCoord& coord) const;
  std::uint64_t capacity() const { return capacity_; }

 private:
  std::uint32_t offset_bits_, column_bits_, channel_bits_, bank_bits_, rank_bits_, row_bits_,
      subarray_bits_;
  std::uint32_t banks_per_rank_, ranks_;
  std::uint64_t capacity_;
};

DramCoord map_address(std::uint64_t address, const DramConfig& config);

/// Only meaningful in TLDRAM mode; any other mode is a contract violation.
Segment segment_of(const DramCoord& coord, const DramConfig& config);

/// True for rows that a far-to-near migration or copy-row duplication may
/// target: far-segment rows in TLDRAM mode, every regular row otherwise.
bool is_far_like(const DramCoord& coord, const DramConfig& config);

struct ActivationTiming {
  std::uint32_t trcd = 0;
  std::uint32_t tras = 0;

  friend bool operator==(const ActivationTiming&, const ActivationTiming&) = default;
};

ActivationTiming activation_timing(RowSource source, const DramConfig& config);

/// Per-subarray table of CROW copy rows with LRU replacement.
class CopyRowTable {
 public:
  struct Slot {
    std::uint32_t row = 0;
    bool valid = false;
    bool prefetched = false;  // installed by the prefetcher, not yet activated
    std::uint64_t lru_stamp = 0;
    Cycle last_access = 0;
  };

  CopyRowTable(std::uint32_t subarrays, std::uint32_t slots_per_subarray);

  bool contains(std::uint32_t subarray, std::uint32_t row) const;
  /// Refreshes the LRU stamp of a duplicated row. Returns the slot, if any.
  Slot* touch(std::uint32_t subarray, std::uint32_t row, Cycle now);
  /// Installs into an empty slot, else the LRU one. Returns the replaced
  /// slot's previous contents when a valid entry was displaced.
  std::optional<Slot> install(std::uint32_t subarray, std::uint32_t row, Cycle now,
                              bool prefetched);
  const Slot& slot(std::uint32_t subarray, std::uint32_t index) const;
  std::uint32_t slots_per_subarray() const { return slots_; }
  std::uint32_t occupancy(std::uint32_t subarray) const;

 private:
  std::uint32_t slots_;
  std::uint64_t stamp_ = 0;
  std::vector<Slot> table_;
};

/// TLDRAM: near timings for near rows, far otherwise. CROW: factored far
/// timings when the row is duplicated. BASELINE: far timings.
ActivationTiming activate_latency(const DramCoord& coord, const DramConfig& config,
                                  const CopyRowTable* copy_table);

enum class BankPhase { Idle, Activating, Active, Precharging, Migrating, Refreshing };

std::string_view to_string(BankPhase phase);

struct OpenRow {
  std::uint32_t subarray = 0;
  std::uint32_t row = 0;
  RowSource source = RowSource::Far;
  ActivationTiming timing{};
};

struct CommandArgs {
  std::uint32_t subarray = 0;
  std::uint32_t row = 0;
  RowSource source = RowSource::Far;
  ActivationTiming timing{};
  /// Bank occupancy for MIGRATE and REFRESH. Zero selects tMIG / tRFC.
  Cycle occupancy = 0;
};

inline constexpr Cycle kNever = ~Cycle{0};

/// Timing state machine of a single bank.
///
/// `busy_until` gates every command. Phases with a deadline (ACTIVATING,
/// PRECHARGING, MIGRATING, REFRESHING) settle once the current cycle reaches
/// `busy_until`; queries take the query cycle into account so callers never
/// have to advance the bank explicitly.
class BankState {
 public:
  BankPhase phase_at(Cycle now) const;
  const std::optional<OpenRow>& open_row() const { return open_row_; }
  Cycle busy_until() const { return busy_until_; }
  Cycle act_cycle() const { return act_cycle_; }

  /// First cycle >= now at which `cmd` violates no timing constraint, or
  /// kNever when the bank is in a phase that can never accept it.
  Cycle earliest_issue(DramCommand cmd, Cycle now) const;

  /// Applies `cmd` at `cycle`. Returns the completion cycle (data return for
  /// READ/WRITE, end of occupancy otherwise). Throws InvariantFault if the
  /// command is not legal at `cycle`.
  Cycle issue(DramCommand cmd, Cycle cycle, const DramConfig& config, const CommandArgs& args);

  std::uint64_t activation_count(std::uint32_t subarray, std::uint32_t row) const;
  std::optional<Cycle> last_access(std::uint32_t subarray, std::uint32_t row) const;

 private:
  static std::uint64_t row_key(std::uint32_t subarray, std::uint32_t row) {
    return (std::uint64_t{subarray} << 32) | row;
  }

  BankPhase phase_ = BankPhase::Idle;
  std::optional<OpenRow> open_row_;
  Cycle busy_until_ = 0;
  Cycle act_cycle_ = 0;
  std::unordered_map<std::uint64_t, Cycle> last_access_;
  std::unordered_map<std::uint64_t, std::uint64_t> activations_;
};

/// Refresh bookkeeping for one physical row.
struct RowRefreshState {
  std::int64_t last_refresh = 0;
  /// The row is a near-segment cache slot or a copy row holding valid data.
  bool duplicate_slot = false;
  std::optional<Cycle> last_access;
};

/// Due when a full refresh window has elapsed, unless the row is a
/// duplicate slot that was accessed within the window: an access restores
/// the cell charge, so the refresh is skipped.
bool refresh_due(const RowRefreshState& row, Cycle now, const DramConfig& config);

/// True when the row's window has elapsed, regardless of the skip rule.
bool refresh_window_elapsed(const RowRefreshState& row, Cycle now, const DramConfig& config);

/// Rows one REFRESH command nominally covers per bank; the occupancy of a
/// sweep that refreshes fewer rows is scaled down linearly.
std::uint64_t nominal_rows_per_refresh(std::uint64_t rows_in_bank, const DramConfig& config);
Cycle refresh_occupancy(std::uint64_t rows_performed, std::uint64_t rows_in_bank,
                        const DramConfig& config);

}  // namespace tiersim
