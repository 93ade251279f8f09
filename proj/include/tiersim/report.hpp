#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/config.hpp"
#include "tiersim/controller.hpp"

namespace tiersim {

struct Report {
  DramMode mode = DramMode::Baseline;
  bool prefetch_enabled = false;

  /// Absent when no demand read completed.
  std::optional<double> avg_read_latency;
  double llc_hit_rate = 0;
  /// Near-segment hits over demand DRAM accesses to far-mapped rows (TLDRAM).
  double near_hit_rate = 0;
  std::uint64_t migrations_demand = 0;
  std::uint64_t migrations_prefetch = 0;
  std::uint64_t refreshes_performed = 0;
  std::uint64_t refreshes_skipped = 0;
  double prefetch_accuracy = 0;
  double prefetch_coverage = 0;
  double prefetch_lateness = 0;
  double prefetch_pollution = 0;

  SimStats stats;
};

Report make_report(const SimConfig& config, const SimStats& stats);

/// One reported scalar. Rates print with 6 decimals, latencies with 2,
/// counts as integers; an absent latency prints as null (JSON) or empty (CSV).
struct ReportField {
  enum class Kind { Count, SignedCount, Rate, Latency, Label };
  std::string section;
  std::string key;
  Kind kind = Kind::Count;
  std::uint64_t count = 0;
  std::int64_t signed_count = 0;
  std::optional<double> real;
  std::string label;
};

/// Every field of a report in emission order.
std::vector<ReportField> report_fields(const Report& report);

std::string emit(const Report& report, OutputFormat format);

struct Comparison {
  Report a;
  Report b;
};

/// Runs both configurations on the same trace, concurrently.
Comparison compare(const SimConfig& a, const SimConfig& b, std::span<const MemoryRequest> trace);

/// Side-by-side fields plus signed deltas (b - a) of every numeric metric.
std::string emit(const Comparison& comparison, OutputFormat format);

}  // namespace tiersim
