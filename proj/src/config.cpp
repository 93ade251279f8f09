#include "tiersim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

std::string_view to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::Json: return "json";
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Text: return "text";
  }
  return "?";
}

OutputFormat parse_output_format(std::string_view text) {
  if (text == "json") return OutputFormat::Json;
  if (text == "csv") return OutputFormat::Csv;
  if (text == "text") return OutputFormat::Text;
  throw InputError(fmt::format("output format must be json, csv or text, not '{}'", text));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::uint64_t to_u64(std::string_view v) {
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    v.remove_prefix(2);
    base = 16;
  }
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out, base);
  if (v.empty() || ec != std::errc{} || ptr != end) throw InputError("expected a non-negative integer");
  return out;
}

std::uint32_t to_u32(std::string_view v) {
  const auto x = to_u64(v);
  if (x > std::numeric_limits<std::uint32_t>::max()) throw InputError("value exceeds 32 bits");
  return static_cast<std::uint32_t>(x);
}

double to_double(std::string_view v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc{} || ptr != end) throw InputError("expected a number");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw InputError("expected true or false");
}

DramMode to_mode(std::string_view v) {
  if (v == "baseline") return DramMode::Baseline;
  if (v == "tldram") return DramMode::Tldram;
  if (v == "crow") return DramMode::Crow;
  throw InputError("mode must be baseline, tldram or crow");
}

SchedulingPolicy to_policy(std::string_view v) {
  if (v == "fcfs") return SchedulingPolicy::Fcfs;
  if (v == "frfcfs" || v == "fr-fcfs") return SchedulingPolicy::FrFcfs;
  throw InputError("policy must be fcfs or frfcfs");
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto u32 = [&t](const char* key, std::uint32_t DramConfig::*field) {
      t[key] = [field](RunConfig& c, std::string_view v) { c.sim.dram.*field = to_u32(v); };
    };
    t["mode"] = [](RunConfig& c, std::string_view v) { c.sim.dram.mode = to_mode(v); };
    u32("geometry.channels", &DramConfig::channels);
    u32("geometry.ranks_per_channel", &DramConfig::ranks_per_channel);
    u32("geometry.banks_per_rank", &DramConfig::banks_per_rank);
    u32("geometry.subarrays_per_bank", &DramConfig::subarrays_per_bank);
    u32("geometry.rows_per_subarray", &DramConfig::rows_per_subarray);
    u32("geometry.near_rows_per_subarray", &DramConfig::near_rows_per_subarray);
    u32("geometry.columns_per_row", &DramConfig::columns_per_row);
    u32("geometry.cacheline_bytes", &DramConfig::cacheline_bytes);
    u32("geometry.copy_rows_per_subarray", &DramConfig::copy_rows_per_subarray);
    u32("timing.tRCD_near", &DramConfig::tRCD_near);
    u32("timing.tRCD_far", &DramConfig::tRCD_far);
    u32("timing.tRAS_near", &DramConfig::tRAS_near);
    u32("timing.tRAS_far", &DramConfig::tRAS_far);
    u32("timing.tRP", &DramConfig::tRP);
    u32("timing.tCL", &DramConfig::tCL);
    u32("timing.tBUS", &DramConfig::tBUS);
    u32("timing.tMIG", &DramConfig::tMIG);
    u32("timing.tRFC", &DramConfig::tRFC);
    u32("timing.tREFI", &DramConfig::tREFI);
    t["timing.refresh_window"] = [](RunConfig& c, std::string_view v) {
      c.sim.dram.refresh_window = to_u64(v);
    };
    t["refresh.enabled"] = [](RunConfig& c, std::string_view v) {
      c.sim.dram.refresh_enabled = to_bool(v);
    };
    t["crow.trcd_factor"] = [](RunConfig& c, std::string_view v) {
      c.sim.dram.crow_trcd_factor = to_double(v);
    };
    t["crow.tras_factor"] = [](RunConfig& c, std::string_view v) {
      c.sim.dram.crow_tras_factor = to_double(v);
    };
    u32("crow.hot_activation_threshold", &DramConfig::hot_activation_threshold);

    t["llc.size_bytes"] = [](RunConfig& c, std::string_view v) { c.sim.llc.size_bytes = to_u64(v); };
    t["llc.associativity"] = [](RunConfig& c, std::string_view v) {
      c.sim.llc.associativity = to_u32(v);
    };
    t["llc.line_bytes"] = [](RunConfig& c, std::string_view v) { c.sim.llc.line_bytes = to_u32(v); };
    t["llc.enabled"] = [](RunConfig& c, std::string_view v) { c.sim.llc.enabled = to_bool(v); };
    t["llc.hit_latency"] = [](RunConfig& c, std::string_view v) { c.sim.llc.hit_latency = to_u32(v); };

    auto pf = [&t](const char* key, std::uint32_t PrefetchConfig::*field) {
      t[key] = [field](RunConfig& c, std::string_view v) { c.sim.prefetch.*field = to_u32(v); };
    };
    t["prefetch.enabled"] = [](RunConfig& c, std::string_view v) {
      c.sim.prefetch.enabled = to_bool(v);
    };
    pf("prefetch.region_bytes", &PrefetchConfig::region_bytes);
    pf("prefetch.history_slots", &PrefetchConfig::history_slots);
    pf("prefetch.accumulation_capacity", &PrefetchConfig::accumulation_capacity);
    t["prefetch.gen_timeout"] = [](RunConfig& c, std::string_view v) {
      c.sim.prefetch.gen_timeout = to_u64(v);
    };
    pf("prefetch.max_block_prefetches", &PrefetchConfig::max_block_prefetches);
    pf("prefetch.max_row_migrations", &PrefetchConfig::max_row_migrations);
    pf("prefetch.mshr_capacity", &PrefetchConfig::mshr_capacity);

    t["controller.policy"] = [](RunConfig& c, std::string_view v) {
      c.sim.scheduler.policy = to_policy(v);
    };
    t["controller.starvation_limit"] = [](RunConfig& c, std::string_view v) {
      c.sim.scheduler.starvation_limit = to_u64(v);
    };
    t["run.output"] = [](RunConfig& c, std::string_view v) { c.output = parse_output_format(v); };
    t["run.seed"] = [](RunConfig& c, std::string_view v) { c.seed = to_u64(v); };
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InputError(fmt::format("expected 'key = value' at line {}", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (value.empty()) throw InputError(fmt::format("missing value for '{}' at line {}", key, line_no));
    if (!seen.emplace(key).second) {
      throw InputError(fmt::format("duplicate key '{}' at line {}", key, line_no));
    }
    if (key == "run.trace") {
      std::filesystem::path p{std::string(value)};
      config.trace = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      continue;
    }
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw InputError(fmt::format("unknown key '{}' at line {}", key, line_no));
    try {
      it->second(config, value);
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}: {} (got '{}') at line {}", key, e.what(), value, line_no));
    }
  }
  config.sim.validate();
  if (config.trace && !std::filesystem::exists(*config.trace)) {
    throw InputError(fmt::format("run.trace: file {} does not exist", config.trace->string()));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot read config file {}", path.string()));
  return parse_config(in, path.parent_path());
}

}  // namespace tiersim
