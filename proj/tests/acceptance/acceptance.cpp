// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "serial_oracle.hpp"
#include "timing_validator.hpp"
#include "tiersim/controller.hpp"
#include "tiersim/report.hpp"
#include "tiersim/trace.hpp"

namespace {

using namespace tiersim;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and limits.
constexpr std::uint64_t kOracleTolerance = 0;
constexpr double kOracleRuntimeLimitS = 10.0;
constexpr double kFootprintRuntimeLimitS = 30.0;
constexpr double kNearHitRateFloor = 0.9;
constexpr double kLatenessExpected = 0.25;
constexpr double kLatenessTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Run {
  SimConfig config;
  std::vector<MemoryRequest> trace;
  SimResult result;
  std::string audit;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Run execute(const SimConfig& config, std::vector<MemoryRequest> trace, bool decisions = false) {
  Run run{config, std::move(trace), {}, {}};
  std::ostringstream audit;
  SimOptions options;
  options.audit = &audit;
  options.record_decisions = decisions;
  run.result = simulate(run.config, run.trace, options);
  run.audit = audit.str();
  return run;
}

double average_latency(const SimResult& r) {
  return r.stats.reads_completed == 0
             ? 0.0
             : static_cast<double>(r.stats.read_latency_sum) / static_cast<double>(r.stats.reads_completed);
}

// Every run made by the experiments below, re-checked by criteria 4 to 7.
std::vector<Run> g_runs;

// ---------------------------------------------------------------------------

SimConfig oracle_config(int variant) {
  SimConfig c;
  c.dram.refresh_enabled = false;
  c.dram.mode = static_cast<DramMode>(variant % 3);
  switch ((variant / 3) % 4) {
    case 0: break;
    case 1:
      c.llc.size_bytes = 4096;
      c.llc.associativity = 2;
      break;
    case 2: c.llc.enabled = false; break;
    case 3:
      c.llc.size_bytes = 16 * 1024;
      c.llc.associativity = 4;
      c.llc.hit_latency = 3;
      break;
  }
  switch ((variant / 12) % 4) {
    case 0: break;
    case 1:
      c.dram.banks_per_rank = 4;
      c.dram.channels = 2;
      break;
    case 2:
      c.dram.rows_per_subarray = 256;
      c.dram.near_rows_per_subarray = 16;
      c.dram.copy_rows_per_subarray = 2;
      c.dram.tRCD_near = 4;
      c.dram.tRAS_near = 15;
      break;
    case 3:
      c.dram.subarrays_per_bank = 4;
      c.dram.near_rows_per_subarray = 4;
      c.dram.copy_rows_per_subarray = 1;
      c.dram.hot_activation_threshold = 3;
      c.dram.crow_trcd_factor = 0.5;
      c.dram.crow_tras_factor = 0.7;
      break;
  }
  return c;
}

TraceGenSpec oracle_trace_spec(int variant, const DramConfig& dram) {
  TraceGenSpec s;
  s.inter_arrival = 400;
  s.seed = 1000 + static_cast<std::uint64_t>(variant);
  s.count = 200 + static_cast<std::uint64_t>(variant % 5) * 200;
  switch (variant % 5) {
    case 0:
      s.pattern = TracePattern::Random;
      s.span_bytes = 8 * dram.row_bytes() * dram.total_banks();
      break;
    case 1:
      s.pattern = TracePattern::Stride;
      s.stride_bytes = 4096 + 64;
      break;
    case 2:
      s.pattern = TracePattern::FootprintRepeat;
      s.region_count = 8;
      s.iterations = 4;
      s.base_address = 4 * dram.row_bytes() * dram.total_banks() * dram.rows_per_subarray / 8;
      break;
    case 3:
      s.pattern = TracePattern::Random;
      s.span_bytes = 64 * dram.row_bytes() * dram.total_banks();
      break;
    case 4:
      s.pattern = TracePattern::Thrash;
      s.count = 600;
      break;
  }
  return s;
}

Outcome criterion_oracle() {
  const auto start = Clock::now();
  std::uint64_t requests = 0;
  std::uint64_t mismatches = 0;
  std::uint64_t max_diff = 0;
  std::string first;
  std::map<DramMode, int> per_mode;
  for (int v = 0; v < 50; ++v) {
    const auto config = oracle_config(v);
    auto trace = generate_trace(oracle_trace_spec(v, config.dram), config.dram);
    const auto expected = testing::serial_latencies(config, trace);
    auto run = execute(config, std::move(trace));
    ++per_mode[config.dram.mode];
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto got = run.result.completions[i].latency();
      const auto diff = got > expected[i] ? got - expected[i] : expected[i] - got;
      max_diff = std::max(max_diff, diff);
      if (diff > kOracleTolerance) {
        if (mismatches++ == 0) {
          first = fmt::format(" first: trace {} request {} got {} expected {}", v, i, got, expected[i]);
        }
      }
    }
    requests += expected.size();
    g_runs.push_back(std::move(run));
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < kOracleRuntimeLimitS,
          fmt::format("50 traces ({} baseline, {} tldram, {} crow), {} requests, {} mismatches, "
                      "max diff {} (tolerance {}), {:.2f} s (limit {:.0f} s){}",
                      per_mode[DramMode::Baseline], per_mode[DramMode::Tldram],
                      per_mode[DramMode::Crow], requests, mismatches, max_diff, kOracleTolerance,
                      elapsed, kOracleRuntimeLimitS, first)};
}

// ---------------------------------------------------------------------------

Outcome criterion_tiers() {
  std::vector<SimConfig> configs(4);
  configs[1].dram.tRCD_near = 3;
  configs[1].dram.tRAS_near = 12;
  configs[2].dram.tRCD_far = 15;
  configs[2].dram.tRAS_far = 36;
  configs[3].dram.near_rows_per_subarray = 8;
  configs[3].dram.tRCD_near = 10;
  configs[3].dram.tRAS_near = 27;
  bool ok = true;
  std::string pairs;
  for (auto& c : configs) {
    c.dram.mode = DramMode::Tldram;
    c.llc.enabled = false;
    AddressMapper mapper(c.dram);
    DramCoord near{0, 0, 1, 2, 0, 0};
    DramCoord far{0, 0, 1, 2, c.dram.near_rows_per_subarray + 5, 0};
    auto latency_of = [&](const DramCoord& coord) {
      std::vector<MemoryRequest> t{{0, 0, 0x400000, mapper.encode(coord), AccessKind::Read, Origin::Demand}};
      auto run = execute(c, t);
      const auto l = run.result.completions[0].latency();
      g_runs.push_back(std::move(run));
      return l;
    };
    const auto ln = latency_of(near);
    const auto lf = latency_of(far);
    ok = ok && ln < lf;
    pairs += fmt::format(" {}<{}", ln, lf);
  }

  SimConfig base;
  TraceGenSpec spec;
  spec.pattern = TracePattern::Thrash;
  spec.count = 4096;
  spec.inter_arrival = 10;
  SimConfig tl = base;
  tl.dram.mode = DramMode::Tldram;
  // Same addresses in both modes: far rows of the TLDRAM layout.
  auto trace = generate_trace(spec, tl.dram);
  auto rb = execute(base, trace);
  auto rt = execute(tl, trace);
  const double lb = average_latency(rb.result);
  const double lt = average_latency(rt.result);
  const bool thrash_ok = lt > lb;
  const auto far_hits = rt.result.stats.near_hits;
  g_runs.push_back(std::move(rb));
  g_runs.push_back(std::move(rt));
  return {ok && thrash_ok,
          fmt::format("near<far activate+read over {} TLDRAM configs:{}; THRASH 4096 far rows: "
                      "TLDRAM avg {:.2f} vs BASELINE {:.2f} cycles ({} near hits)",
                      configs.size(), pairs, lt, lb, far_hits)};
}

// ---------------------------------------------------------------------------

Outcome criterion_prefetch() {
  const auto start = Clock::now();
  SimConfig off;
  off.dram.mode = DramMode::Tldram;
  off.llc.size_bytes = 16 * 1024;
  off.llc.associativity = 8;
  off.prefetch.accumulation_capacity = 16;
  SimConfig on = off;
  on.prefetch.enabled = true;

  TraceGenSpec spec;
  spec.pattern = TracePattern::FootprintRepeat;
  spec.region_count = 64;
  spec.iterations = 10;
  spec.count = 51200;
  spec.inter_arrival = 30;
  spec.base_address = 16ULL << 20;
  auto trace = generate_trace(spec, off.dram);
  const std::size_t per_pass = trace.size() / spec.iterations;

  // Brute-force replay: blocks each region touched during the first pass.
  std::map<std::uint64_t, std::set<std::uint64_t>> first_pass;
  for (std::size_t i = 0; i < per_pass; ++i) {
    const auto a = trace[i].address;
    first_pass[a & ~std::uint64_t{spec.region_bytes - 1}].insert(a & ~std::uint64_t{63});
  }
  // Short events of the triggers must occupy distinct history slots for
  // exact recall to be possible at all.
  std::set<std::uint32_t> slots;
  for (const auto& [region, blocks] : first_pass) {
    (void)blocks;
    const auto& trigger = *std::find_if(trace.begin(), trace.end(), [&](const MemoryRequest& r) {
      return (r.address & ~std::uint64_t{spec.region_bytes - 1}) == region;
    });
    slots.insert(short_event_index(
        {trigger.pc, static_cast<std::uint32_t>((trigger.address - region) / 64)},
        on.prefetch.history_slots));
  }
  const bool distinct_slots = slots.size() == first_pass.size();

  auto roff = execute(off, trace);
  auto ron = execute(on, trace, true);

  std::uint64_t late_lookups = 0;
  std::uint64_t long_hits = 0;
  std::uint64_t exact = 0;
  for (const auto& d : ron.result.decisions) {
    if (d.request_id < per_pass) continue;
    ++late_lookups;
    if (d.decision.kind != DecisionKind::LongHit) continue;
    ++long_hits;
    std::set<std::uint64_t> predicted(d.decision.blocks.begin(), d.decision.blocks.end());
    if (predicted == first_pass[d.decision.region_base]) ++exact;
  }

  std::uint64_t far_accesses = 0;
  std::uint64_t near_served = 0;
  for (std::size_t i = per_pass; i < ron.result.completions.size(); ++i) {
    const auto& c = ron.result.completions[i];
    if (!c.served_by_dram || !c.far_mapped) continue;
    ++far_accesses;
    near_served += c.source == RowSource::Near;
  }
  const double near_rate = far_accesses == 0 ? 0.0 : static_cast<double>(near_served) / static_cast<double>(far_accesses);
  const double loff = average_latency(roff.result);
  const double lon = average_latency(ron.result);
  const double elapsed = seconds_since(start);

  const bool a = lon < loff;
  const bool b = distinct_slots && late_lookups > 0 && long_hits == late_lookups && exact == long_hits;
  const bool c = far_accesses > 0 && near_rate >= kNearHitRateFloor;
  g_runs.push_back(std::move(roff));
  g_runs.push_back(std::move(ron));
  return {a && b && c && elapsed < kFootprintRuntimeLimitS,
          fmt::format("(a) avg latency {:.2f} with prefetch vs {:.2f} without; (b) pass-2+ lookups "
                      "{}, long hits {}, exact footprints {}, distinct trigger slots {}; (c) near "
                      "hit rate {:.4f} over {} far-mapped DRAM reads (floor {}); {} requests, "
                      "{:.2f} s (limit {:.0f} s)",
                      lon, loff, late_lookups, long_hits, exact, distinct_slots ? "yes" : "no",
                      near_rate, far_accesses, kNearHitRateFloor, trace.size(), elapsed,
                      kFootprintRuntimeLimitS)};
}

// ---------------------------------------------------------------------------

Outcome criterion_crow() {
  SimConfig fast;
  fast.dram.mode = DramMode::Crow;
  fast.dram.hot_activation_threshold = 2;
  fast.llc.enabled = false;
  SimConfig slow = fast;
  slow.dram.crow_trcd_factor = 1.0;
  slow.dram.crow_tras_factor = 1.0;

  AddressMapper mapper(fast.dram);
  std::vector<DramCoord> rows;
  for (std::uint32_t i = 0; i < 100; ++i) {
    rows.push_back(DramCoord{0, 0, i % fast.dram.banks_per_rank,
                             (i / fast.dram.banks_per_rank) % fast.dram.subarrays_per_bank,
                             17 + 3 * (i / (fast.dram.banks_per_rank * fast.dram.subarrays_per_bank)),
                             0});
  }
  std::vector<MemoryRequest> trace;
  for (std::uint32_t pass = 0; pass < 5; ++pass) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto c = rows[i];
      c.column = pass * 7 + 1;
      trace.push_back(MemoryRequest{trace.size(), trace.size() * 60, 0x500000 + 4 * i,
                                    mapper.encode(c), AccessKind::Read, Origin::Demand});
    }
  }
  auto rf = execute(fast, trace);
  auto rs = execute(slow, trace);

  // Every COPY activation must be followed by its column command exactly
  // ceil(factor * tRCD_far) later on the same bank.
  const auto trcd_copy = testing::oracle_scaled(fast.dram.tRCD_far, fast.dram.crow_trcd_factor);
  std::map<std::string, std::uint64_t> copy_act;
  std::uint64_t copy_acts = 0;
  std::uint64_t exact_reads = 0;
  std::istringstream log(rf.audit);
  std::string line;
  while (std::getline(log, line)) {
    std::istringstream in(line);
    std::uint64_t cycle = 0;
    std::string bank, cmd;
    in >> cycle >> bank >> cmd;
    if (cmd == "ACTIVATE") {
      if (line.find("src=COPY") != std::string::npos) {
        ++copy_acts;
        copy_act[bank] = cycle;
      } else {
        copy_act.erase(bank);
      }
    } else if (cmd == "READ") {
      if (auto it = copy_act.find(bank); it != copy_act.end()) {
        exact_reads += cycle == it->second + trcd_copy;
        copy_act.erase(it);
      }
    }
  }
  const double lf = average_latency(rf.result);
  const double ls = average_latency(rs.result);
  const bool ok = copy_acts == 300 && exact_reads == copy_acts && lf < ls;
  g_runs.push_back(std::move(rf));
  g_runs.push_back(std::move(rs));
  return {ok, fmt::format("{} COPY activations (expected 300), {} reads at ACT+{}; avg latency "
                          "{:.2f} with factors 0.62/0.79 vs {:.2f} with 1.0",
                          copy_acts, exact_reads, trcd_copy, lf, ls)};
}

// ---------------------------------------------------------------------------

// A mixed read/write run with refresh, prefetch and a short refresh window so
// the skip rule is exercised, added to the pool checked by criteria 4 to 7.
void add_mixed_runs() {
  for (int m = 0; m < 3; ++m) {
    SimConfig c;
    c.dram.mode = static_cast<DramMode>(m);
    c.dram.refresh_window = 200'000;
    c.dram.tREFI = 2000;
    c.llc.size_bytes = 32 * 1024;
    c.prefetch.enabled = true;
    TraceGenSpec s;
    s.pattern = TracePattern::Random;
    s.count = 6000;
    s.inter_arrival = 25;
    s.write_percent = 30;
    s.span_bytes = 2 << 20;
    s.seed = 77 + static_cast<std::uint64_t>(m);
    auto trace = generate_trace(s, c.dram);
    g_runs.push_back(execute(c, std::move(trace)));

    TraceGenSpec f;
    f.pattern = TracePattern::FootprintRepeat;
    f.count = 12800;
    f.region_count = 32;
    f.iterations = 5;
    f.inter_arrival = 15;
    f.base_address = 8ULL << 20;
    f.seed = 5;
    auto ft = generate_trace(f, c.dram);
    c.prefetch.accumulation_capacity = 8;
    c.llc.size_bytes = 8 * 1024;
    g_runs.push_back(execute(c, std::move(ft)));
  }
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

Outcome criterion_metrics() {
  std::uint64_t violations = 0;
  std::string first;
  std::uint64_t issued_total = 0;
  for (std::size_t i = 0; i < g_runs.size(); ++i) {
    const auto& s = g_runs[i].result.stats;
    const auto r = make_report(g_runs[i].config, s);
    const auto& p = s.prefetch;
    issued_total += p.issued;
    const bool ok = p.useful <= p.issued && p.late <= p.issued && p.late <= p.useful &&
                    in_unit(r.prefetch_accuracy) && in_unit(r.prefetch_coverage) &&
                    in_unit(r.prefetch_lateness) && in_unit(r.prefetch_pollution) &&
                    in_unit(r.llc_hit_rate) && in_unit(r.near_hit_rate);
    if (!ok && violations++ == 0) {
      first = fmt::format(" first: run {} issued {} useful {} late {}", i, p.issued, p.useful, p.late);
    }
  }
  PrefetchMetrics hand;
  for (int i = 0; i < 10; ++i) hand.account(PrefetchEvent::Issued);
  for (int i = 0; i < 6; ++i) hand.account(PrefetchEvent::DemandHit);
  for (int i = 0; i < 2; ++i) hand.account(PrefetchEvent::MergedInFlight);
  const bool lifecycle = hand.issued == 10 && hand.useful == 8 && hand.late == 2 &&
                         std::abs(hand.lateness() - kLatenessExpected) <= kLatenessTolerance;
  return {violations == 0 && lifecycle && issued_total > 0,
          fmt::format("{} runs ({} prefetches issued), {} identity violations; lifecycle 10/8/2 "
                      "lateness {:.6f} (expected {}){}",
                      g_runs.size(), issued_total, violations, hand.lateness(), kLatenessExpected, first)};
}

Outcome criterion_conservation() {
  std::uint64_t violations = 0;
  std::uint64_t skipped = 0;
  std::string first;
  for (std::size_t i = 0; i < g_runs.size(); ++i) {
    const auto& s = g_runs[i].result.stats;
    skipped += s.refreshes_skipped;
    const bool ok = s.llc.demand_hits + s.llc.demand_misses == s.llc.demand_accesses &&
                    s.refreshes_performed + s.refreshes_skipped == s.refreshes_scheduled &&
                    s.demand_arrived == g_runs[i].trace.size() &&
                    s.demand_completed == s.demand_arrived;
    if (!ok && violations++ == 0) first = fmt::format(" first: run {}", i);
  }
  return {violations == 0 && skipped > 0,
          fmt::format("{} runs, {} violations, {} refreshes skipped in total{}", g_runs.size(),
                      violations, skipped, first)};
}

Outcome criterion_determinism() {
  std::uint64_t differing = 0;
  std::string first;
  for (std::size_t i = 0; i < g_runs.size(); ++i) {
    const auto& original = g_runs[i];
    const auto again = execute(original.config, original.trace);
    const auto j1 = emit(make_report(original.config, original.result.stats), OutputFormat::Json);
    const auto j2 = emit(make_report(again.config, again.result.stats), OutputFormat::Json);
    if ((j1 != j2 || original.audit != again.audit) && differing++ == 0) {
      first = fmt::format(" first: run {}", i);
    }
  }
  return {differing == 0,
          fmt::format("{} runs repeated, {} differ in JSON report or audit log{}", g_runs.size(),
                      differing, first)};
}

Outcome criterion_validator() {
  std::uint64_t commands = 0;
  std::uint64_t violations = 0;
  std::string first;
  for (const auto& run : g_runs) {
    std::istringstream log(run.audit);
    const auto v = testing::validate_audit_log(log, run.config.dram);
    commands += v.commands;
    if (!v.ok() && violations == 0) first = " first: " + v.violations.front();
    violations += v.violations.size();
  }
  return {violations == 0 && commands > 0,
          fmt::format("{} audit logs, {} commands replayed, {} violations{}", g_runs.size(),
                      commands, violations, first)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  std::vector<Criterion> order = {
      {1, "oracle equivalence", criterion_oracle},
      {2, "tier ordering", criterion_tiers},
      {3, "prefetcher benefit", criterion_prefetch},
      {8, "CROW copy rows", criterion_crow},
  };
  std::map<int, std::pair<std::string, Outcome>> outcomes;
  auto record = [&](int id, const char* name, const std::function<Outcome()>& check) {
    try {
      outcomes[id] = {name, check()};
    } catch (const std::exception& e) {
      outcomes[id] = {name, Outcome{false, std::string("exception: ") + e.what()}};
    }
  };
  for (const auto& c : order) record(c.id, c.name, c.check);
  try {
    add_mixed_runs();
  } catch (const std::exception& e) {
    std::printf("mixed runs failed: %s\n", e.what());
  }
  record(4, "metric identities", criterion_metrics);
  record(5, "conservation", criterion_conservation);
  record(6, "determinism", criterion_determinism);
  record(7, "timing validator", criterion_validator);

  int failures = 0;
  for (const auto& [id, entry] : outcomes) {
    const auto& [name, outcome] = entry;
    failures += outcome.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", outcome.pass ? "PASS" : "FAIL", id, name.c_str(),
                outcome.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
