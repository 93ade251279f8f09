#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/dram.hpp"

namespace tiersim {

enum class AccessKind : std::uint8_t { Read, Write };
enum class Origin : std::uint8_t { Demand, PrefetchLlc, Migration };

std::string_view to_string(Origin origin);

struct MemoryRequest {
  std::uint64_t id = 0;
  Cycle arrival_cycle = 0;
  std::uint64_t pc = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::Read;
  Origin origin = Origin::Demand;

  friend bool operator==(const MemoryRequest&, const MemoryRequest&) = default;
};

/// Line-at-a-time parser for `<cycle> <pc-hex> <addr-hex> <R|W>` records.
/// Keeps the line number and previous arrival cycle so errors can name the
/// offending line and decreasing cycles are rejected.
class TraceParser {
 public:
  /// Returns nullopt for blank lines and `#` comments. Throws InputError.
  std::optional<MemoryRequest> parse_line(std::string_view line);

  std::uint64_t line_number() const { return line_; }

 private:
  std::uint64_t line_ = 0;
  std::uint64_t next_id_ = 0;
  std::optional<Cycle> last_cycle_;
};

std::vector<MemoryRequest> parse_trace(std::istream& in);
std::vector<MemoryRequest> load_trace(const std::filesystem::path& path);

/// Canonical record text: decimal cycle, lowercase `0x` hex, `R` or `W`.
std::string format_request(const MemoryRequest& request);
void write_trace(std::ostream& out, std::span<const MemoryRequest> trace);

/// xorshift64* (Vigna): x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
/// output = x * 0x2545F4914F6CDD1D. A zero seed is replaced by
/// 0x9E3779B97F4A7C15 since the all-zero state is a fixed point.
class XorShift64Star {
 public:
  explicit XorShift64Star(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, bound) by rejection; bound must be nonzero.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

enum class TracePattern { Stride, Random, FootprintRepeat, Thrash };

std::string_view to_string(TracePattern pattern);
TracePattern parse_pattern(std::string_view text);

struct TraceGenSpec {
  TracePattern pattern = TracePattern::Stride;
  std::uint64_t count = 1000;
  std::uint64_t base_address = 0;
  std::uint64_t stride_bytes = 64;
  std::uint64_t region_count = 64;
  std::uint64_t iterations = 10;
  std::uint64_t seed = 1;
  Cycle inter_arrival = 100;
  /// RANDOM: addresses are drawn from [base_address, base_address + span_bytes).
  std::uint64_t span_bytes = std::uint64_t{1} << 24;
  /// FOOTPRINT_REPEAT region size.
  std::uint64_t region_bytes = 2048;
  std::uint64_t pc_base = 0x400000;
  /// Percentage of records emitted as writes (RANDOM only).
  std::uint32_t write_percent = 0;

  void validate() const;
};

/// Deterministic synthetic workloads. `dram` supplies the cache-line size,
/// the address-space bound and, for THRASH, the row mapping.
///
///  - STRIDE: base, base+stride, ... (wrapping at the address-space bound),
///    single PC.
///  - RANDOM: uniform cache-line addresses within the span.
///  - FOOTPRINT_REPEAT: `iterations` passes over `region_count` consecutive
///    regions. Each region has a fixed seeded subset of its blocks in a fixed
///    order; a visit emits count / (region_count * iterations) accesses
///    sweeping that list cyclically, so every visit starts at the same block.
///    Access k of region r uses pc_base + r*0x100 + 4*(k mod list length).
///  - THRASH: one access to each of `count` distinct far-segment rows, one
///    row-size apart in address order, skipping near-segment rows.
std::vector<MemoryRequest> generate_trace(const TraceGenSpec& spec, const DramConfig& dram);

/// The ordered block offsets FOOTPRINT_REPEAT uses for region `region_index`.
std::vector<std::uint32_t> footprint_blocks(const TraceGenSpec& spec, const DramConfig& dram,
                                            std::uint64_t region_index);

}  // namespace tiersim
