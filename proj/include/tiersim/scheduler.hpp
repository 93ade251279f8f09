#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "tiersim/dram.hpp"

namespace tiersim {

enum class SchedulingPolicy { Fcfs, FrFcfs };

std::string_view to_string(SchedulingPolicy policy);

struct SchedulerConfig {
  SchedulingPolicy policy = SchedulingPolicy::FrFcfs;
  /// Work that has waited longer than this many cycles issues next,
  /// regardless of class or row-buffer state.
  Cycle starvation_limit = 2000;
};

enum class WorkClass { Demand, Migration, Prefetch };

/// Scheduling view of one queued piece of bank work.
struct WorkTicket {
  std::uint64_t seq = 0;
  Cycle enqueue_cycle = 0;
  std::uint32_t subarray = 0;
  std::uint32_t row = 0;
};

struct WorkSelection {
  WorkClass cls = WorkClass::Demand;
  std::size_t index = 0;

  friend bool operator==(const WorkSelection&, const WorkSelection&) = default;
};

namespace detail {

inline bool older(const WorkTicket& a, const WorkTicket& b) {
  return a.enqueue_cycle != b.enqueue_cycle ? a.enqueue_cycle < b.enqueue_cycle : a.seq < b.seq;
}

template <class Queue>
void oldest_in(const Queue& q, WorkClass cls, std::optional<WorkSelection>& best,
               const WorkTicket*& best_ticket) {
  for (std::size_t i = 0; i < q.size(); ++i) {
    const WorkTicket& t = q[i].ticket;
    if (best_ticket == nullptr || older(t, *best_ticket)) {
      best = WorkSelection{cls, i};
      best_ticket = &t;
    }
  }
}

template <class Queue>
std::optional<std::size_t> pick_ready(const Queue& q, const std::optional<OpenRow>& open,
                                      SchedulingPolicy policy) {
  if (q.empty()) return std::nullopt;
  std::size_t oldest = 0;
  std::optional<std::size_t> oldest_hit;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const WorkTicket& t = q[i].ticket;
    if (older(t, q[oldest].ticket)) oldest = i;
    if (policy == SchedulingPolicy::FrFcfs && open && open->subarray == t.subarray &&
        open->row == t.row && (!oldest_hit || older(t, q[*oldest_hit].ticket))) {
      oldest_hit = i;
    }
  }
  return oldest_hit ? *oldest_hit : oldest;
}

}  // namespace detail

/// Chooses the next piece of work for one bank.
///
/// Priority is demand > migration > prefetch. Within demand and prefetch
/// queues, FR-FCFS lets the oldest row-buffer hit bypass older conflicts;
/// FCFS takes the oldest. Any item older than starvation_limit wins outright.
/// Queue elements expose a `ticket` member of type WorkTicket.
template <class DemandQ, class MigrationQ, class PrefetchQ>
std::optional<WorkSelection> select_work(const DemandQ& demand, const MigrationQ& migration,
                                         const PrefetchQ& prefetch,
                                         const std::optional<OpenRow>& open_row, Cycle now,
                                         const SchedulerConfig& config) {
  std::optional<WorkSelection> oldest;
  const WorkTicket* oldest_ticket = nullptr;
  detail::oldest_in(demand, WorkClass::Demand, oldest, oldest_ticket);
  detail::oldest_in(migration, WorkClass::Migration, oldest, oldest_ticket);
  detail::oldest_in(prefetch, WorkClass::Prefetch, oldest, oldest_ticket);
  if (!oldest) return std::nullopt;
  if (now - oldest_ticket->enqueue_cycle > config.starvation_limit) return oldest;

  if (auto i = detail::pick_ready(demand, open_row, config.policy)) {
    return WorkSelection{WorkClass::Demand, *i};
  }
  if (!migration.empty()) {
    std::size_t first = 0;
    for (std::size_t i = 1; i < migration.size(); ++i) {
      if (detail::older(migration[i].ticket, migration[first].ticket)) first = i;
    }
    return WorkSelection{WorkClass::Migration, first};
  }
  if (auto i = detail::pick_ready(prefetch, open_row, config.policy)) {
    return WorkSelection{WorkClass::Prefetch, *i};
  }
  return std::nullopt;
}

}  // namespace tiersim
