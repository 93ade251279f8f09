#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tiersim/cache.hpp"
#include "tiersim/dram.hpp"
#include "tiersim/prefetch.hpp"
#include "tiersim/scheduler.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

struct SimConfig {
  DramConfig dram;
  LlcConfig llc;
  PrefetchConfig prefetch;
  SchedulerConfig scheduler;

  /// Validates every part plus cross-part consistency. Throws InputError.
  void validate() const;
};

/// Log2 buckets of demand-read latency: bucket 0 holds [0, 16), bucket i > 0
/// holds [2^(i+3), 2^(i+4)), the last bucket is open-ended.
inline constexpr std::size_t kLatencyBuckets = 16;
std::size_t latency_bucket(Cycle latency);

struct SimStats {
  // Trace-level demand requests.
  std::uint64_t demand_arrived = 0;
  std::uint64_t demand_completed = 0;
  std::uint64_t demand_reads = 0;
  std::uint64_t demand_writes = 0;

  // Demand-read latency, measured from arrival to data return.
  std::uint64_t reads_completed = 0;
  std::uint64_t read_latency_sum = 0;
  std::uint64_t read_latency_max = 0;
  // Reads served by a DRAM access they issued themselves; merged reads excluded.
  std::uint64_t dram_reads_completed = 0;
  std::uint64_t dram_read_latency_min = 0;
  std::array<std::uint64_t, kLatencyBuckets> latency_histogram{};

  LlcCounters llc;

  // DRAM command and request counts.
  std::uint64_t activations = 0;
  std::uint64_t precharges = 0;
  std::uint64_t column_reads = 0;
  std::uint64_t column_writes = 0;
  std::uint64_t dram_demand_requests = 0;
  std::uint64_t dram_prefetch_requests = 0;
  std::uint64_t dram_writebacks = 0;

  // Near segment (TLDRAM): demand DRAM accesses to far-mapped rows.
  std::uint64_t near_hits = 0;
  std::uint64_t near_misses = 0;
  std::uint64_t near_row_accesses = 0;

  std::uint64_t migrations_demand = 0;
  std::uint64_t migrations_prefetch = 0;
  std::uint64_t migration_writebacks = 0;
  std::uint64_t copy_installs_hot = 0;
  std::uint64_t copy_installs_prefetch = 0;
  std::uint64_t copy_activations = 0;

  std::uint64_t refresh_ticks = 0;
  std::uint64_t refreshes_scheduled = 0;
  std::uint64_t refreshes_performed = 0;
  std::uint64_t refreshes_skipped = 0;
  std::uint64_t refresh_commands = 0;

  std::uint64_t prefetch_lookups = 0;
  std::uint64_t long_hits = 0;
  std::uint64_t short_hits = 0;
  std::uint64_t prefetches_dropped = 0;
  std::uint64_t generations_committed = 0;
  PrefetchMetrics prefetch;

  Cycle cycles = 0;
};

struct RequestCompletion {
  std::uint64_t id = 0;
  Cycle arrival = 0;
  Cycle finish = 0;
  AccessKind kind = AccessKind::Read;
  bool llc_hit = false;
  bool served_by_dram = false;
  /// DRAM-served: where the row was sensed from.
  RowSource source = RowSource::Far;
  /// DRAM-served and mapped to a far-segment row (TLDRAM) / any row otherwise.
  bool far_mapped = false;
  bool merged_into_prefetch = false;
  /// Joined a DRAM read that was already in flight.
  bool merged = false;

  Cycle latency() const { return finish - arrival; }
};

struct DecisionRecord {
  std::uint64_t request_id = 0;
  Cycle cycle = 0;
  std::uint64_t pc = 0;
  std::uint64_t address = 0;
  PrefetchDecision decision;
};

struct SimOptions {
  /// One line per DRAM command: `cycle ch.rk.bk COMMAND subarray row ORIGIN detail`.
  std::ostream* audit = nullptr;
  bool record_completions = true;
  bool record_decisions = false;
};

struct SimResult {
  SimStats stats;
  std::vector<RequestCompletion> completions;  // trace order
  std::vector<DecisionRecord> decisions;
};

/// Replays a trace open-loop through LLC, prefetcher and DRAM. Requests enter
/// at their arrival cycle; events are processed in (cycle, class, sequence)
/// order so every run with the same inputs is bit-identical.
///
/// Throws InputError for invalid configs or traces and InvariantFault when an
/// internal timing or accounting rule is broken.
SimResult simulate(const SimConfig& config, std::span<const MemoryRequest> trace,
                   const SimOptions& options = {});

}  // namespace tiersim
