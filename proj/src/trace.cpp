#include "tiersim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::Demand: return "DEMAND";
    case Origin::PrefetchLlc: return "PREFETCH_LLC";
    case Origin::Migration: return "MIGRATION";
  }
  return "?";
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::optional<std::uint64_t> parse_u64(std::string_view text, int base) {
  if (base == 16 && text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
  }
  if (text.empty()) return std::nullopt;
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value, base);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::optional<MemoryRequest> TraceParser::parse_line(std::string_view line) {
  ++line_;
  const auto fields = split_fields(line);
  if (fields.empty() || fields.front().front() == '#') return std::nullopt;
  if (fields.size() != 4) {
    throw InputError(
        fmt::format("expected 4 fields but found {} at line {}", fields.size(), line_));
  }
  const auto cycle = parse_u64(fields[0], 10);
  if (!cycle) throw InputError(fmt::format("non-numeric cycle at line {}", line_));
  const auto pc = parse_u64(fields[1], 16);
  if (!pc) throw InputError(fmt::format("non-numeric pc at line {}", line_));
  const auto address = parse_u64(fields[2], 16);
  if (!address) throw InputError(fmt::format("non-numeric address at line {}", line_));

  AccessKind kind{};
  if (fields[3] == "R") {
    kind = AccessKind::Read;
  } else if (fields[3] == "W") {
    kind = AccessKind::Write;
  } else {
    throw InputError(fmt::format("access kind must be R or W at line {}", line_));
  }
  if (last_cycle_ && *cycle < *last_cycle_) {
    throw InputError(fmt::format("cycle {} decreases below previous cycle {} at line {}", *cycle,
                                 *last_cycle_, line_));
  }
  last_cycle_ = *cycle;
  return MemoryRequest{next_id_++, *cycle, *pc, *address, kind, Origin::Demand};
}

std::vector<MemoryRequest> parse_trace(std::istream& in) {
  TraceParser parser;
  std::vector<MemoryRequest> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto req = parser.parse_line(line)) out.push_back(*req);
  }
  return out;
}

std::vector<MemoryRequest> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open trace file {}", path.string()));
  return parse_trace(in);
}

std::string format_request(const MemoryRequest& r) {
  return fmt::format("{} {:#x} {:#x} {}", r.arrival_cycle, r.pc, r.address,
                     r.kind == AccessKind::Read ? 'R' : 'W');
}

void write_trace(std::ostream& out, std::span<const MemoryRequest> trace) {
  for (const auto& r : trace) out << format_request(r) << '\n';
}

// ---------------------------------------------------------------------------

XorShift64Star::XorShift64Star(std::uint64_t seed)
    : state_(seed != 0 ? seed : 0x9E3779B97F4A7C15ULL) {}

std::uint64_t XorShift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1DULL;
}

std::uint64_t XorShift64Star::below(std::uint64_t bound) {
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v = next();
  while (v >= limit) v = next();
  return v % bound;
}

std::string_view to_string(TracePattern pattern) {
  switch (pattern) {
    case TracePattern::Stride: return "stride";
    case TracePattern::Random: return "random";
    case TracePattern::FootprintRepeat: return "footprint_repeat";
    case TracePattern::Thrash: return "thrash";
  }
  return "?";
}

TracePattern parse_pattern(std::string_view text) {
  if (text == "stride") return TracePattern::Stride;
  if (text == "random") return TracePattern::Random;
  if (text == "footprint_repeat" || text == "footprint") return TracePattern::FootprintRepeat;
  if (text == "thrash") return TracePattern::Thrash;
  throw InputError(fmt::format("unknown trace pattern '{}'", text));
}

void TraceGenSpec::validate() const {
  if (count == 0) throw InputError("trace count must be at least 1");
  if (inter_arrival == 0) throw InputError("inter_arrival must be at least 1");
  if (write_percent > 100) throw InputError("write_percent must be within [0, 100]");
  switch (pattern) {
    case TracePattern::Stride:
      if (stride_bytes == 0) throw InputError("stride must be nonzero for the stride pattern");
      break;
    case TracePattern::Random:
      if (span_bytes == 0) throw InputError("span must be nonzero for the random pattern");
      break;
    case TracePattern::FootprintRepeat:
      if (region_count == 0 || iterations == 0) {
        throw InputError("footprint_repeat needs region_count and iterations of at least 1");
      }
      if (count < region_count * iterations) {
        throw InputError("footprint_repeat needs count >= region_count * iterations");
      }
      break;
    case TracePattern::Thrash: break;
  }
}

std::vector<std::uint32_t> footprint_blocks(const TraceGenSpec& spec, const DramConfig& dram,
                                            std::uint64_t region_index) {
  const auto blocks = static_cast<std::uint32_t>(spec.region_bytes / dram.cacheline_bytes);
  XorShift64Star rng(spec.seed ^ ((region_index + 1) * 0x9E3779B97F4A7C15ULL));
  std::vector<std::uint32_t> chosen;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    if (rng.below(2) == 1) chosen.push_back(b);
  }
  if (chosen.empty()) chosen.push_back(static_cast<std::uint32_t>(rng.below(blocks)));
  for (std::size_t i = chosen.size(); i > 1; --i) {
    std::swap(chosen[i - 1], chosen[rng.below(i)]);
  }
  return chosen;
}

std::vector<MemoryRequest> generate_trace(const TraceGenSpec& spec, const DramConfig& dram) {
  spec.validate();
  const std::uint64_t line = dram.cacheline_bytes;
  const std::uint64_t capacity = dram.capacity_bytes();
  std::vector<MemoryRequest> out;
  auto emit = [&out, &spec](std::uint64_t pc, std::uint64_t address, AccessKind kind) {
    const auto id = static_cast<std::uint64_t>(out.size());
    out.push_back(MemoryRequest{id, id * spec.inter_arrival, pc, address, kind, Origin::Demand});
  };

  switch (spec.pattern) {
    case TracePattern::Stride:
      for (std::uint64_t i = 0; i < spec.count; ++i) {
        emit(spec.pc_base, (spec.base_address + i * spec.stride_bytes) % capacity, AccessKind::Read);
      }
      break;

    case TracePattern::Random: {
      XorShift64Star rng(spec.seed);
      const std::uint64_t lines = std::max<std::uint64_t>(1, spec.span_bytes / line);
      for (std::uint64_t i = 0; i < spec.count; ++i) {
        const auto address = (spec.base_address + rng.below(lines) * line) % capacity;
        const auto pc = spec.pc_base + 4 * rng.below(16);
        const bool write = rng.below(100) < spec.write_percent;
        emit(pc, address, write ? AccessKind::Write : AccessKind::Read);
      }
      break;
    }

    case TracePattern::FootprintRepeat: {
      if (spec.region_bytes < line || spec.region_bytes % line != 0) {
        throw InputError("region size must be a multiple of the cache-line size");
      }
      std::vector<std::vector<std::uint32_t>> lists;
      for (std::uint64_t r = 0; r < spec.region_count; ++r) {
        lists.push_back(footprint_blocks(spec, dram, r));
      }
      const std::uint64_t per_visit = spec.count / (spec.region_count * spec.iterations);
      for (std::uint64_t pass = 0; pass < spec.iterations; ++pass) {
        for (std::uint64_t r = 0; r < spec.region_count; ++r) {
          const auto region_base = spec.base_address + r * spec.region_bytes;
          const auto& list = lists[r];
          for (std::uint64_t k = 0; k < per_visit; ++k) {
            const auto pos = k % list.size();
            const auto address = region_base + list[pos] * line;
            if (address >= capacity) throw InputError("footprint_repeat exceeds the address space");
            emit(spec.pc_base + r * 0x100 + 4 * pos, address, AccessKind::Read);
          }
        }
      }
      break;
    }

    case TracePattern::Thrash: {
      const AddressMapper mapper(dram);
      const std::uint64_t row_bytes = dram.row_bytes();
      std::uint64_t address = spec.base_address - spec.base_address % row_bytes;
      while (out.size() < spec.count) {
        if (address >= capacity) {
          throw InputError(fmt::format("thrash pattern ran out of far rows after {} records",
                                       out.size()));
        }
        if (mapper.map(address).row >= dram.near_rows_per_subarray) {
          emit(spec.pc_base, address, AccessKind::Read);
        }
        address += row_bytes;
      }
      break;
    }
  }
  return out;
}

}  // namespace tiersim
