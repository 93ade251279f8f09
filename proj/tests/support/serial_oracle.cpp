#include "serial_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>

namespace tiersim::testing {

DramCoord oracle_map(std::uint64_t address, const DramConfig& d) {
  // Mixed-radix decomposition by division.
  DramCoord c;
  std::uint64_t rest = address / d.cacheline_bytes;
  c.column = static_cast<std::uint32_t>(rest % d.columns_per_row);
  rest /= d.columns_per_row;
  c.channel = static_cast<std::uint32_t>(rest % d.channels);
  rest /= d.channels;
  c.bank = static_cast<std::uint32_t>(rest % d.banks_per_rank);
  rest /= d.banks_per_rank;
  c.rank = static_cast<std::uint32_t>(rest % d.ranks_per_channel);
  rest /= d.ranks_per_channel;
  c.row = static_cast<std::uint32_t>(rest % d.rows_per_subarray);
  rest /= d.rows_per_subarray;
  c.subarray = static_cast<std::uint32_t>(rest);
  return c;
}

std::uint32_t oracle_scaled(std::uint32_t base, double factor) {
  const auto millionths = static_cast<std::uint64_t>(std::llround(factor * 1'000'000.0));
  return static_cast<std::uint32_t>((base * millionths + 999'999) / 1'000'000);
}

namespace {

using BankKey = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;
using SubarrayKey = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>;

struct OracleBank {
  bool open = false;
  std::uint32_t subarray = 0;
  std::uint32_t row = 0;
  std::uint64_t act_cycle = 0;
  std::uint32_t tras = 0;
  std::uint64_t free_at = 0;
};

// Most recently used first.
class LruList {
 public:
  explicit LruList(std::size_t capacity) : capacity_(capacity) {}

  bool touch(std::uint64_t key) {
    auto it = std::find(items_.begin(), items_.end(), key);
    if (it == items_.end()) return false;
    items_.splice(items_.begin(), items_, it);
    return true;
  }
  void insert(std::uint64_t key) {
    items_.push_front(key);
    if (items_.size() > capacity_) items_.pop_back();
  }

 private:
  std::size_t capacity_;
  std::list<std::uint64_t> items_;
};

}  // namespace

std::vector<std::uint64_t> serial_latencies(const SimConfig& config,
                                            std::span<const MemoryRequest> trace) {
  const auto& d = config.dram;
  if (d.refresh_enabled || config.prefetch.enabled) {
    throw std::invalid_argument("serial oracle needs refresh and prefetch disabled");
  }
  const std::uint64_t line = config.llc.line_bytes;
  const std::uint64_t ways = config.llc.associativity;
  const std::uint64_t sets = config.llc.size_bytes / (line * ways);
  std::vector<LruList> llc(sets, LruList(ways));

  std::map<BankKey, OracleBank> banks;
  std::map<SubarrayKey, LruList> segment;  // near-segment copies or CROW copy rows
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>,
           std::uint64_t>
      activations;
  const std::uint32_t slots =
      d.mode == DramMode::Tldram ? d.near_rows_per_subarray : d.copy_rows_per_subarray;

  std::vector<std::uint64_t> out;
  out.reserve(trace.size());
  for (const auto& req : trace) {
    if (req.kind != AccessKind::Read) throw std::invalid_argument("serial oracle needs reads only");
    const std::uint64_t t = req.arrival_cycle;
    const std::uint64_t block = req.address / line;

    if (config.llc.enabled) {
      auto& set = llc[block % sets];
      if (set.touch(block)) {
        out.push_back(config.llc.hit_latency);
        continue;
      }
      set.insert(block);
    }

    const auto c = oracle_map(req.address, d);
    auto& bank = banks[{c.channel, c.rank, c.bank}];
    if (t < bank.free_at) {
      throw std::invalid_argument("request " + std::to_string(req.id) + " overlaps its predecessor");
    }
    auto [seg_it, inserted] = segment.try_emplace({c.channel, c.rank, c.bank, c.subarray}, slots);
    auto& seg = seg_it->second;
    (void)inserted;

    const std::uint32_t column_latency = d.tCL + d.tBUS;
    if (bank.open && bank.subarray == c.subarray && bank.row == c.row) {
      if (d.mode != DramMode::Baseline) seg.touch(c.row);
      out.push_back(column_latency);
      bank.free_at = t + column_latency;
      continue;
    }

    std::uint64_t pre = 0;
    if (bank.open) {
      if (t < bank.act_cycle + bank.tras) throw std::invalid_argument("precharge before tRAS");
      pre = d.tRP;
    }
    std::uint32_t trcd = d.tRCD_far;
    std::uint32_t tras = d.tRAS_far;
    bool far_source = true;
    bool copy_source = false;
    if (d.mode == DramMode::Tldram && (c.row < d.near_rows_per_subarray || seg.touch(c.row))) {
      trcd = d.tRCD_near;
      tras = d.tRAS_near;
      far_source = false;
    } else if (d.mode == DramMode::Crow && seg.touch(c.row)) {
      trcd = oracle_scaled(d.tRCD_far, d.crow_trcd_factor);
      tras = oracle_scaled(d.tRAS_far, d.crow_tras_factor);
      far_source = false;
      copy_source = true;
    }
    const std::uint64_t act = t + pre;
    const std::uint64_t read = act + trcd;
    const auto count = ++activations[{c.channel, c.rank, c.bank, c.subarray, c.row}];
    out.push_back(read + column_latency - t);

    const bool migrate =
        (d.mode == DramMode::Tldram && far_source) ||
        (d.mode == DramMode::Crow && !copy_source && count >= d.hot_activation_threshold);
    if (migrate) {
      // The row closes right after the read, then the bank copies it.
      const std::uint64_t precharge = std::max(read + d.tBUS, act + tras);
      const std::uint64_t start = precharge + d.tRP;
      seg.insert(c.row);
      bank.open = false;
      bank.free_at = start + d.tMIG;
    } else {
      bank.open = true;
      bank.subarray = c.subarray;
      bank.row = c.row;
      bank.act_cycle = act;
      bank.tras = tras;
      bank.free_at = read + column_latency;
    }
  }
  return out;
}

}  // namespace tiersim::testing
