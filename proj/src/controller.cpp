#include "tiersim/controller.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <ostream>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "tiersim/errors.hpp"
#include "tiersim/near_cache.hpp"

namespace tiersim {

void SimConfig::validate() const {
  dram.validate();
  llc.validate();
  prefetch.validate(dram);
  if (llc.line_bytes != dram.cacheline_bytes) {
    throw InputError(fmt::format("llc.line_bytes ({}) must equal geometry.cacheline_bytes ({})",
                                 llc.line_bytes, dram.cacheline_bytes));
  }
}

std::size_t latency_bucket(Cycle latency) {
  if (latency < 16) return 0;
  const auto log = static_cast<std::size_t>(std::bit_width(latency) - 1);
  return std::min(log - 3, kLatencyBuckets - 1);
}

namespace {

enum class DramSource : std::uint8_t { DemandFill, DemandDirect, Writeback, Prefetch };

bool is_demand(DramSource s) { return s == DramSource::DemandFill || s == DramSource::DemandDirect; }

std::string_view origin_label(DramSource s) {
  return s == DramSource::Prefetch ? to_string(Origin::PrefetchLlc) : to_string(Origin::Demand);
}

struct DramRequest {
  WorkTicket ticket;
  std::uint64_t block = 0;
  DramCoord coord;
  AccessKind kind = AccessKind::Read;
  DramSource source = DramSource::DemandFill;
  std::uint64_t trace_index = 0;  // DemandDirect only
};

struct MigrationJob {
  WorkTicket ticket;
  bool copy_row = false;  // CROW duplication, else TLDRAM near-segment fill
  bool prefetch = false;  // triggered by a short-event match
  bool touched = false;   // demand-touched while still in flight
};

// Outstanding LLC miss for one block.
struct MissEntry {
  bool prefetch = false;
  bool demand_merged = false;
  bool dirty = false;
  std::uint64_t request_seq = 0;
  std::uint32_t bank = 0;
  std::vector<std::uint64_t> waiters;  // trace indices
};

struct IssuedIo {
  DramRequest request;
  RowSource source = RowSource::Far;
};

struct Bank {
  BankState state;
  DramCoord id;  // channel / rank / bank fields
  std::deque<DramRequest> demand;
  std::deque<DramRequest> prefetch;
  std::deque<MigrationJob> migration;
  bool refresh_pending = false;
  std::uint64_t refresh_rows = 0;
  Cycle wakeup = kNever;
  std::optional<MigrationJob> migrating;
  std::uint32_t migrating_slot = 0;
  std::vector<std::int64_t> last_refresh;
  std::size_t refresh_cursor = 0;
};

// Lower rank runs first among events of the same cycle: completions become
// visible before anything that might observe them.
enum class EventType : std::uint8_t { IoDone, MigrationDone, RefreshTick, Arrival, Wakeup };

struct Event {
  Cycle cycle = 0;
  EventType type = EventType::Wakeup;
  std::uint64_t seq = 0;
  std::uint32_t bank = 0;
  std::uint64_t payload = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.cycle, a.type, a.seq) > std::tie(b.cycle, b.type, b.seq);
  }
};

class Engine {
 public:
  Engine(const SimConfig& config, std::span<const MemoryRequest> trace, const SimOptions& options)
      : config_((config.validate(), config)),
        dram_(config_.dram),
        options_(options),
        trace_(trace),
        mapper_(dram_),
        llc_(config_.llc),
        subarrays_(dram_.subarrays_per_bank),
        rows_in_bank_(std::uint64_t{dram_.subarrays_per_bank} *
                      (dram_.rows_per_subarray + dram_.reserved_rows_per_subarray())) {
    const auto total_subarrays = dram_.total_banks() * dram_.subarrays_per_bank;
    if (dram_.mode == DramMode::Tldram) near_.emplace(total_subarrays, dram_.near_rows_per_subarray);
    if (dram_.mode == DramMode::Crow) copies_.emplace(total_subarrays, dram_.copy_rows_per_subarray);
    if (config_.prefetch.enabled) prefetcher_.emplace(config_.prefetch, dram_);

    banks_.resize(dram_.total_banks());
    for (std::uint32_t ch = 0; ch < dram_.channels; ++ch) {
      for (std::uint32_t rk = 0; rk < dram_.ranks_per_channel; ++rk) {
        for (std::uint32_t bk = 0; bk < dram_.banks_per_rank; ++bk) {
          DramCoord id{ch, rk, bk, 0, 0, 0};
          banks_[mapper_.flat_bank(id)].id = id;
        }
      }
    }
    if (dram_.refresh_enabled) {
      // Stagger the rows so that their windows expire evenly over one window.
      const auto window = static_cast<std::int64_t>(dram_.refresh_window);
      for (auto& bank : banks_) {
        bank.last_refresh.resize(rows_in_bank_);
        for (std::uint64_t i = 0; i < rows_in_bank_; ++i) {
          const auto phase = static_cast<std::int64_t>(
              i * dram_.refresh_window / rows_in_bank_);
          bank.last_refresh[i] = phase - window;
        }
      }
    }
    if (options_.record_completions) result_.completions.resize(trace_.size());
  }

  SimResult run() {
    if (!trace_.empty()) {
      push(Event{trace_[0].arrival_cycle, EventType::Arrival, 0, 0, 0});
      if (dram_.refresh_enabled) push(Event{dram_.tREFI, EventType::RefreshTick, 0, 0, 0});
    }
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      if (ev.type == EventType::Wakeup && ev.cycle != banks_[ev.bank].wakeup) continue;
      stats_.cycles = std::max(stats_.cycles, ev.cycle);
      switch (ev.type) {
        case EventType::Arrival: on_arrival(ev.payload, ev.cycle); break;
        case EventType::Wakeup: on_wakeup(ev.bank, ev.cycle); break;
        case EventType::IoDone: on_io_done(ev.payload, ev.cycle); break;
        case EventType::MigrationDone: on_migration_done(ev.bank, ev.cycle); break;
        case EventType::RefreshTick: on_refresh_tick(ev.cycle); break;
      }
    }
    finish_checks();
    stats_.llc = llc_.counters();
    result_.stats = stats_;
    return std::move(result_);
  }

 private:
  // ---- bookkeeping helpers -------------------------------------------------

  void push(Event ev) {
    ev.seq = event_seq_++;
    events_.push(ev);
  }

  void wake(std::uint32_t bank_index, Cycle at) {
    auto& bank = banks_[bank_index];
    if (at >= bank.wakeup) return;
    bank.wakeup = at;
    push(Event{at, EventType::Wakeup, 0, bank_index, 0});
  }

  std::uint32_t subarray_key(std::uint32_t bank_index, std::uint32_t subarray) const {
    return bank_index * subarrays_ + subarray;
  }

  static std::uint64_t row_key(std::uint32_t bank_index, std::uint32_t subarray, std::uint32_t row) {
    return (std::uint64_t{bank_index} << 48) | (std::uint64_t{subarray} << 24) | row;
  }

  bool far_mapped(const DramCoord& c) const {
    return dram_.mode == DramMode::Tldram && c.row >= dram_.near_rows_per_subarray;
  }

  WorkTicket ticket(const DramCoord& c, Cycle now) { return WorkTicket{work_seq_++, now, c.subarray, c.row}; }

  void audit(Cycle cycle, const Bank& bank, DramCommand cmd, std::string_view subarray,
             std::string_view row, std::string_view origin, std::string_view detail) {
    if (options_.audit == nullptr) return;
    *options_.audit << fmt::format("{} {}.{}.{} {} {} {} {} {}\n", cycle, bank.id.channel,
                                   bank.id.rank, bank.id.bank, to_string(cmd), subarray, row,
                                   origin, detail);
  }

  void audit(Cycle cycle, const Bank& bank, DramCommand cmd, std::uint32_t subarray,
             std::uint32_t row, std::string_view origin, std::string_view detail) {
    if (options_.audit == nullptr) return;
    audit(cycle, bank, cmd, std::to_string(subarray), std::to_string(row), origin, detail);
  }

  void complete(std::uint64_t index, Cycle finish, RequestCompletion info) {
    const auto& req = trace_[index];
    info.id = req.id;
    info.arrival = req.arrival_cycle;
    info.finish = finish;
    info.kind = req.kind;
    ++stats_.demand_completed;
    if (req.kind == AccessKind::Read) {
      const auto latency = finish - req.arrival_cycle;
      ++stats_.reads_completed;
      stats_.read_latency_sum += latency;
      stats_.read_latency_max = std::max(stats_.read_latency_max, latency);
      ++stats_.latency_histogram[latency_bucket(latency)];
      if (info.served_by_dram && !info.merged) {
        stats_.dram_read_latency_min = stats_.dram_reads_completed == 0
                                           ? latency
                                           : std::min(stats_.dram_read_latency_min, latency);
        ++stats_.dram_reads_completed;
      }
    }
    if (options_.record_completions) result_.completions[index] = info;
  }

  void enqueue_request(DramRequest req, Cycle now) {
    const auto b = mapper_.flat_bank(req.coord);
    if (req.source == DramSource::Prefetch) {
      ++stats_.dram_prefetch_requests;
      banks_[b].prefetch.push_back(req);
    } else {
      if (req.source == DramSource::Writeback) {
        ++stats_.dram_writebacks;
      } else {
        ++stats_.dram_demand_requests;
      }
      banks_[b].demand.push_back(req);
    }
    ++outstanding_;
    wake(b, now);
  }

  bool migration_pending(std::uint32_t bank_index, std::uint32_t subarray, std::uint32_t row) const {
    return pending_migrations_.contains(row_key(bank_index, subarray, row));
  }

  void enqueue_migration(std::uint32_t bank_index, const DramCoord& c, bool prefetch, Cycle now) {
    MigrationJob job{ticket(c, now), dram_.mode == DramMode::Crow, prefetch, false};
    pending_migrations_.insert(row_key(bank_index, c.subarray, c.row));
    banks_[bank_index].migration.push_back(job);
    ++outstanding_;
    if (prefetch) stats_.prefetch.account(PrefetchEvent::Issued);
    wake(bank_index, now);
  }

  // ---- demand path ---------------------------------------------------------

  void on_arrival(std::uint64_t index, Cycle now) {
    if (index + 1 < trace_.size()) {
      const auto next = trace_[index + 1].arrival_cycle;
      if (next < now) {
        throw InputError(fmt::format("trace record {} arrives before its predecessor", index + 1));
      }
      push(Event{next, EventType::Arrival, 0, 0, index + 1});
    }
    const auto& req = trace_[index];
    ++stats_.demand_arrived;
    ++(req.kind == AccessKind::Read ? stats_.demand_reads : stats_.demand_writes);

    const auto coord = mapper_.map(req.address);
    const auto block = llc_.block_of(req.address);

    if (!config_.llc.enabled) {
      DramRequest dr{ticket(coord, now), block, coord, req.kind, DramSource::DemandDirect, index};
      enqueue_request(dr, now);
      observe(req, now);
      return;
    }

    const auto res = llc_.access(block, req.kind, now);
    if (res.hit) {
      RequestCompletion info;
      info.llc_hit = true;
      complete(index, now + config_.llc.hit_latency, info);
      if (res.useful_prefetch) {
        stats_.prefetch.account(PrefetchEvent::DemandHit);
        observe(req, now);
      }
      return;
    }

    if (auto it = misses_.find(block); it != misses_.end()) {
      auto& miss = it->second;
      if (miss.prefetch && !miss.demand_merged) {
        stats_.prefetch.account(PrefetchEvent::MergedInFlight);
        miss.demand_merged = true;
        promote(miss);
      } else {
        stats_.prefetch.account(PrefetchEvent::UncoveredMiss);
      }
      miss.waiters.push_back(index);
      miss.dirty |= req.kind == AccessKind::Write;
    } else {
      DramRequest dr{ticket(coord, now), block, coord, AccessKind::Read, DramSource::DemandFill, 0};
      MissEntry miss;
      miss.dirty = req.kind == AccessKind::Write;
      miss.request_seq = dr.ticket.seq;
      miss.bank = mapper_.flat_bank(coord);
      miss.waiters.push_back(index);
      misses_.emplace(block, std::move(miss));
      enqueue_request(dr, now);
    }
    observe(req, now);
  }

  // A demand merged into a queued prefetch inherits demand priority.
  void promote(const MissEntry& miss) {
    auto& bank = banks_[miss.bank];
    auto it = std::find_if(bank.prefetch.begin(), bank.prefetch.end(),
                           [&](const DramRequest& r) { return r.ticket.seq == miss.request_seq; });
    if (it == bank.prefetch.end()) return;  // already issued
    bank.demand.push_back(*it);
    bank.prefetch.erase(it);
  }

  void observe(const MemoryRequest& req, Cycle now) {
    if (!prefetcher_) return;
    stats_.generations_committed += prefetcher_->tick(now).size();
    if (!prefetcher_->tracking(req.address)) {
      ++stats_.prefetch_lookups;
      auto decision = prefetcher_->lookup(req.pc, req.address);
      execute(decision, now);
      if (options_.record_decisions) {
        result_.decisions.push_back(
            DecisionRecord{req.id, now, req.pc, req.address, std::move(decision)});
      }
    }
    if (prefetcher_->record_access(req.pc, req.address, now)) ++stats_.generations_committed;
  }

  void execute(const PrefetchDecision& decision, Cycle now) {
    switch (decision.kind) {
      case DecisionKind::None: return;
      case DecisionKind::LongHit: {
        ++stats_.long_hits;
        if (!config_.llc.enabled) return;
        std::uint32_t sent = 0;
        for (const auto block : decision.blocks) {
          if (sent >= config_.prefetch.max_block_prefetches) break;
          if (block >= mapper_.capacity()) break;
          if (llc_.contains(block) || misses_.contains(block)) continue;
          if (prefetches_in_flight_ >= config_.prefetch.mshr_capacity) {
            ++stats_.prefetches_dropped;
            continue;
          }
          const auto coord = mapper_.map(block);
          DramRequest dr{ticket(coord, now), block, coord, AccessKind::Read, DramSource::Prefetch, 0};
          MissEntry miss;
          miss.prefetch = true;
          miss.request_seq = dr.ticket.seq;
          miss.bank = mapper_.flat_bank(coord);
          misses_.emplace(block, std::move(miss));
          ++prefetches_in_flight_;
          ++sent;
          stats_.prefetch.account(PrefetchEvent::Issued);
          enqueue_request(dr, now);
        }
        return;
      }
      case DecisionKind::ShortHit: {
        ++stats_.short_hits;
        for (const auto& coord : decision.rows) {
          const auto b = mapper_.flat_bank(coord);
          if (migration_pending(b, coord.subarray, coord.row)) continue;
          if (dram_.mode == DramMode::Tldram) {
            if (near_->contains(subarray_key(b, coord.subarray), coord.row)) continue;
          } else if (dram_.mode == DramMode::Crow) {
            if (copies_->contains(subarray_key(b, coord.subarray), coord.row)) continue;
          } else {
            continue;
          }
          enqueue_migration(b, coord, true, now);
        }
        return;
      }
    }
  }

  // ---- bank scheduling -----------------------------------------------------

  void on_wakeup(std::uint32_t bank_index, Cycle now) {
    banks_[bank_index].wakeup = kNever;
    const auto next = try_issue(bank_index, now);
    if (next != kNever) wake(bank_index, next);
  }

  // Issues at most one command at `now`. Returns the next cycle worth
  // revisiting the bank, or kNever when it has nothing to do.
  Cycle try_issue(std::uint32_t bank_index, Cycle now) {
    auto& bank = banks_[bank_index];
    auto& state = bank.state;
    const auto& open = state.open_row();

    if (bank.refresh_pending) {
      const auto cmd = open ? DramCommand::Precharge : DramCommand::Refresh;
      const auto at = state.earliest_issue(cmd, now);
      if (at > now) return at;
      if (cmd == DramCommand::Precharge) {
        const auto sa = open->subarray;
        const auto row = open->row;
        state.issue(cmd, now, dram_, {});
        ++stats_.precharges;
        audit(now, bank, cmd, sa, row, "REFRESH", "-");
      } else {
        const auto occupancy = refresh_occupancy(bank.refresh_rows, rows_in_bank_, dram_);
        state.issue(cmd, now, dram_, CommandArgs{0, 0, RowSource::Far, {}, occupancy});
        ++stats_.refresh_commands;
        audit(now, bank, cmd, "-", "-", "REFRESH", fmt::format("rows={}", bank.refresh_rows));
        bank.refresh_pending = false;
        bank.refresh_rows = 0;
      }
      return std::max(now + 1, state.busy_until());
    }

    const auto sel = select_work(bank.demand, bank.migration, bank.prefetch, open, now,
                                 config_.scheduler);
    if (!sel) return kNever;

    if (sel->cls == WorkClass::Migration) {
      const auto cmd = open ? DramCommand::Precharge : DramCommand::Migrate;
      const auto at = state.earliest_issue(cmd, now);
      if (at > now) return at;
      if (cmd == DramCommand::Precharge) {
        precharge(bank, now, to_string(Origin::Migration));
      } else {
        start_migration(bank_index, sel->index, now);
      }
      return std::max(now + 1, state.busy_until());
    }

    auto& queue = sel->cls == WorkClass::Demand ? bank.demand : bank.prefetch;
    const auto& req = queue[sel->index];
    const auto origin = origin_label(req.source);
    DramCommand cmd;
    if (open && open->subarray == req.coord.subarray && open->row == req.coord.row) {
      cmd = req.kind == AccessKind::Read ? DramCommand::Read : DramCommand::Write;
    } else if (open) {
      cmd = DramCommand::Precharge;
    } else {
      cmd = DramCommand::Activate;
    }
    const auto at = state.earliest_issue(cmd, now);
    if (at == kNever) {
      throw InvariantFault(fmt::format("{} can never issue on bank {}", to_string(cmd), bank_index));
    }
    if (at > now) return at;
    switch (cmd) {
      case DramCommand::Precharge: precharge(bank, now, origin); break;
      case DramCommand::Activate: activate(bank_index, req, now); break;
      default: {
        DramRequest copy = req;
        queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(sel->index));
        column_access(bank_index, copy, cmd, now);
        break;
      }
    }
    return std::max(now + 1, state.busy_until());
  }

  void precharge(Bank& bank, Cycle now, std::string_view origin) {
    const auto sa = bank.state.open_row()->subarray;
    const auto row = bank.state.open_row()->row;
    bank.state.issue(DramCommand::Precharge, now, dram_, {});
    ++stats_.precharges;
    audit(now, bank, DramCommand::Precharge, sa, row, origin, "-");
  }

  void activate(std::uint32_t bank_index, const DramRequest& req, Cycle now) {
    auto& bank = banks_[bank_index];
    const auto& c = req.coord;
    const auto key = subarray_key(bank_index, c.subarray);
    RowSource source = RowSource::Far;
    switch (dram_.mode) {
      case DramMode::Tldram:
        if (c.row < dram_.near_rows_per_subarray || near_->lookup(key, c.row, now)) {
          source = RowSource::Near;
        }
        break;
      case DramMode::Crow:
        if (copies_->touch(key, c.row, now) != nullptr) {
          source = RowSource::Copy;
          ++stats_.copy_activations;
        }
        break;
      case DramMode::Baseline: break;
    }
    const auto timing = activation_timing(source, dram_);
    bank.state.issue(DramCommand::Activate, now, dram_,
                     CommandArgs{c.subarray, c.row, source, timing, 0});
    ++stats_.activations;
    audit(now, bank, DramCommand::Activate, c.subarray, c.row, origin_label(req.source),
          fmt::format("src={}", to_string(source)));

    if (dram_.mode == DramMode::Crow && source != RowSource::Copy &&
        bank.state.activation_count(c.subarray, c.row) >= dram_.hot_activation_threshold &&
        !migration_pending(bank_index, c.subarray, c.row)) {
      enqueue_migration(bank_index, c, false, now);
    }
  }

  MigrationJob* find_pending_job(std::uint32_t bank_index, std::uint32_t subarray, std::uint32_t row) {
    auto& bank = banks_[bank_index];
    for (auto& job : bank.migration) {
      if (job.ticket.subarray == subarray && job.ticket.row == row) return &job;
    }
    return nullptr;
  }

  void column_access(std::uint32_t bank_index, const DramRequest& req, DramCommand cmd, Cycle now) {
    auto& bank = banks_[bank_index];
    const auto& c = req.coord;
    const auto key = subarray_key(bank_index, c.subarray);
    const auto source = bank.state.open_row()->source;
    const auto done = bank.state.issue(cmd, now, dram_, CommandArgs{c.subarray, c.row});
    ++(cmd == DramCommand::Read ? stats_.column_reads : stats_.column_writes);
    audit(now, bank, cmd, c.subarray, c.row, origin_label(req.source), "-");

    // Whether this access is the first demand touch of a prefetched row.
    bool prefetched_row = false;
    if (dram_.mode == DramMode::Tldram && far_mapped(c) && source == RowSource::Near) {
      if (auto slot = near_->lookup(key, c.row, now)) {
        auto& s = near_->slot(key, *slot);
        if (cmd == DramCommand::Write) s.dirty = true;
        if (is_demand(req.source) && s.prefetched) {
          s.prefetched = false;
          prefetched_row = true;
        }
      }
    } else if (dram_.mode == DramMode::Crow && source == RowSource::Copy) {
      if (auto* s = copies_->touch(key, c.row, now); s != nullptr && is_demand(req.source) && s->prefetched) {
        s->prefetched = false;
        prefetched_row = true;
      }
    }

    if (is_demand(req.source)) {
      if (far_mapped(c)) {
        ++(source == RowSource::Near ? stats_.near_hits : stats_.near_misses);
      } else if (dram_.mode == DramMode::Tldram) {
        ++stats_.near_row_accesses;
      }
      // Classify against the prefetcher: hit on a prefetched row, demand that
      // caught a prefetch migration in flight, or an uncovered miss.
      MigrationJob* job = migration_pending(bank_index, c.subarray, c.row)
                              ? find_pending_job(bank_index, c.subarray, c.row)
                              : nullptr;
      if (prefetched_row) {
        stats_.prefetch.account(PrefetchEvent::DemandHit);
      } else if (job != nullptr && job->prefetch && !job->touched) {
        job->touched = true;
        stats_.prefetch.account(PrefetchEvent::MergedInFlight);
      } else {
        stats_.prefetch.account(PrefetchEvent::UncoveredMiss);
      }
      // Demand-triggered caching of far rows in the near segment.
      if (far_mapped(c) && source == RowSource::Far && !migration_pending(bank_index, c.subarray, c.row) &&
          !near_->contains(key, c.row)) {
        enqueue_migration(bank_index, c, false, now);
      }
    }

    const auto seq = req.ticket.seq;
    inflight_.emplace(seq, IssuedIo{req, source});
    push(Event{done, EventType::IoDone, 0, bank_index, seq});
  }

  void start_migration(std::uint32_t bank_index, std::size_t queue_index, Cycle now) {
    auto& bank = banks_[bank_index];
    const MigrationJob job = bank.migration[queue_index];
    bank.migration.erase(bank.migration.begin() + static_cast<std::ptrdiff_t>(queue_index));
    const auto sa = job.ticket.subarray;
    const auto row = job.ticket.row;
    const auto key = subarray_key(bank_index, sa);
    const bool install_prefetched = job.prefetch && !job.touched;
    Cycle occupancy = dram_.tMIG;
    std::string detail;

    if (job.copy_row) {
      const auto displaced = copies_->install(key, row, now, install_prefetched);
      ++(job.prefetch ? stats_.copy_installs_prefetch : stats_.copy_installs_hot);
      if (displaced && displaced->prefetched) stats_.prefetch.account(PrefetchEvent::EvictedUnused);
      detail = fmt::format("kind=copy victim={} wb=0",
                           displaced ? std::to_string(displaced->row) : std::string("none"));
    } else {
      const auto res = near_->begin_fill(key, row, now, install_prefetched);
      const bool writeback = res.victim && res.victim->dirty;
      if (writeback) {
        occupancy = 2 * dram_.tMIG;
        ++stats_.migration_writebacks;
      }
      if (res.victim && res.victim->prefetched) stats_.prefetch.account(PrefetchEvent::EvictedUnused);
      ++(job.prefetch ? stats_.migrations_prefetch : stats_.migrations_demand);
      bank.migrating_slot = res.slot;
      detail = fmt::format("kind=near slot={} victim={} wb={}", res.slot,
                           res.victim ? std::to_string(*res.victim->far_row) : std::string("none"),
                           writeback ? 1 : 0);
    }
    const auto done = bank.state.issue(DramCommand::Migrate, now, dram_,
                                       CommandArgs{sa, row, RowSource::Far, {}, occupancy});
    audit(now, bank, DramCommand::Migrate, sa, row, to_string(Origin::Migration), detail);
    bank.migrating = job;
    push(Event{done, EventType::MigrationDone, 0, bank_index, 0});
  }

  // ---- completions ---------------------------------------------------------

  void on_io_done(std::uint64_t seq, Cycle now) {
    auto node = inflight_.extract(seq);
    if (node.empty()) throw InvariantFault(fmt::format("completion for unknown request {}", seq));
    const auto io = node.mapped();
    const auto& req = io.request;
    --outstanding_;

    RequestCompletion info;
    info.served_by_dram = true;
    info.source = io.source;
    info.far_mapped = dram_.mode == DramMode::Tldram ? far_mapped(req.coord) : true;

    switch (req.source) {
      case DramSource::Writeback: return;
      case DramSource::DemandDirect: complete(req.trace_index, now, info); return;
      case DramSource::DemandFill:
      case DramSource::Prefetch: break;
    }

    auto mnode = misses_.extract(req.block);
    if (mnode.empty()) throw InvariantFault(fmt::format("fill for untracked block {:#x}", req.block));
    const auto& miss = mnode.mapped();
    if (miss.prefetch) --prefetches_in_flight_;
    const bool as_prefetch = miss.prefetch && !miss.demand_merged;
    const auto victim =
        llc_.fill(req.block, as_prefetch ? Origin::PrefetchLlc : Origin::Demand, now, miss.dirty);
    if (victim) {
      if (victim->prefetched) stats_.prefetch.account(PrefetchEvent::EvictedUnused);
      if (victim->dirty) {
        const auto coord = mapper_.map(victim->block);
        enqueue_request(DramRequest{ticket(coord, now), victim->block, coord, AccessKind::Write,
                                    DramSource::Writeback, 0},
                        now);
      }
    }
    info.merged_into_prefetch = miss.prefetch;
    for (std::size_t i = 0; i < miss.waiters.size(); ++i) {
      info.merged = miss.prefetch || i > 0;
      complete(miss.waiters[i], now, info);
    }
  }

  void on_migration_done(std::uint32_t bank_index, Cycle now) {
    auto& bank = banks_[bank_index];
    if (!bank.migrating) throw InvariantFault("migration completion without a running migration");
    const auto job = *bank.migrating;
    bank.migrating.reset();
    if (!job.copy_row) {
      near_->complete_fill(subarray_key(bank_index, job.ticket.subarray), bank.migrating_slot, now);
    }
    pending_migrations_.erase(row_key(bank_index, job.ticket.subarray, job.ticket.row));
    --outstanding_;
  }

  // ---- refresh -------------------------------------------------------------

  RowRefreshState refresh_state(std::uint32_t bank_index, std::uint64_t index) const {
    const auto& bank = banks_[bank_index];
    const auto per_subarray = dram_.rows_per_subarray + dram_.reserved_rows_per_subarray();
    const auto sa = static_cast<std::uint32_t>(index / per_subarray);
    const auto r = static_cast<std::uint32_t>(index % per_subarray);
    RowRefreshState st;
    st.last_refresh = bank.last_refresh[index];
    if (r < dram_.rows_per_subarray) return st;
    const auto slot = r - dram_.rows_per_subarray;
    const auto key = subarray_key(bank_index, sa);
    if (dram_.mode == DramMode::Tldram) {
      const auto& s = near_->slot(key, slot);
      st.duplicate_slot = s.far_row.has_value() && !s.inflight;
      if (st.duplicate_slot) st.last_access = s.last_access;
    } else if (dram_.mode == DramMode::Crow) {
      const auto& s = copies_->slot(key, slot);
      st.duplicate_slot = s.valid;
      if (s.valid) st.last_access = s.last_access;
    }
    return st;
  }

  void on_refresh_tick(Cycle now) {
    ++stats_.refresh_ticks;
    for (std::uint32_t b = 0; b < banks_.size(); ++b) {
      auto& bank = banks_[b];
      std::uint64_t performed = 0;
      for (std::uint64_t checked = 0; checked < rows_in_bank_; ++checked) {
        const auto index = bank.refresh_cursor;
        const auto st = refresh_state(b, index);
        if (!refresh_window_elapsed(st, now, dram_)) break;
        ++stats_.refreshes_scheduled;
        if (refresh_due(st, now, dram_)) {
          ++performed;
          ++stats_.refreshes_performed;
        } else {
          ++stats_.refreshes_skipped;
        }
        bank.last_refresh[index] = static_cast<std::int64_t>(now);
        bank.refresh_cursor = (index + 1) % rows_in_bank_;
      }
      if (performed > 0) {
        bank.refresh_pending = true;
        bank.refresh_rows += performed;
        wake(b, now);
      }
    }
    if (next_arrival_pending() || outstanding_ > 0) {
      if (events_.empty() && !next_arrival_pending()) check_progress();
      push(Event{now + dram_.tREFI, EventType::RefreshTick, 0, 0, 0});
    }
  }

  // With nothing but refresh ticks left, every outstanding item must belong
  // to a bank that is still scheduled to act.
  void check_progress() const {
    for (std::uint32_t b = 0; b < banks_.size(); ++b) {
      const auto& bank = banks_[b];
      const bool queued = !bank.demand.empty() || !bank.prefetch.empty() ||
                          !bank.migration.empty() || bank.refresh_pending;
      if (queued && bank.wakeup == kNever) {
        throw InvariantFault(fmt::format(
            "bank {} stalled with {} demand, {} prefetch, {} migration items queued", b,
            bank.demand.size(), bank.prefetch.size(), bank.migration.size()));
      }
    }
    if (!inflight_.empty() || !misses_.empty()) {
      throw InvariantFault(fmt::format("{} misses and {} DRAM accesses never completed",
                                       misses_.size(), inflight_.size()));
    }
    throw InvariantFault(fmt::format("{} DRAM work items never completed", outstanding_));
  }

  bool next_arrival_pending() const { return stats_.demand_arrived < trace_.size(); }

  void finish_checks() const {
    if (stats_.demand_completed != stats_.demand_arrived) {
      throw InvariantFault(fmt::format("{} of {} demand requests never completed",
                                       stats_.demand_arrived - stats_.demand_completed,
                                       stats_.demand_arrived));
    }
    if (outstanding_ != 0 || !misses_.empty() || !inflight_.empty()) {
      throw InvariantFault("simulation ended with outstanding DRAM work");
    }
  }

  SimConfig config_;
  const DramConfig& dram_;
  SimOptions options_;
  std::span<const MemoryRequest> trace_;
  AddressMapper mapper_;
  LastLevelCache llc_;
  std::optional<NearCache> near_;
  std::optional<CopyRowTable> copies_;
  std::optional<SpatialPrefetcher> prefetcher_;
  std::uint32_t subarrays_;
  std::uint64_t rows_in_bank_;
  std::vector<Bank> banks_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::uint64_t event_seq_ = 0;
  std::uint64_t work_seq_ = 0;
  std::uint64_t outstanding_ = 0;
  std::uint64_t prefetches_in_flight_ = 0;
  std::unordered_map<std::uint64_t, MissEntry> misses_;
  std::unordered_map<std::uint64_t, IssuedIo> inflight_;
  std::unordered_set<std::uint64_t> pending_migrations_;

  SimStats stats_;
  SimResult result_;
};

}  // namespace

SimResult simulate(const SimConfig& config, std::span<const MemoryRequest> trace,
                   const SimOptions& options) {
  return Engine(config, trace, options).run();
}

}  // namespace tiersim
