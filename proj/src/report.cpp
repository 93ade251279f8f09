#include "tiersim/report.hpp"

#include <future>

#include <fmt/format.h>

#include "tiersim/errors.hpp"

namespace tiersim {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

using Kind = ReportField::Kind;

class FieldList {
 public:
  explicit FieldList(std::vector<ReportField>& out) : out_(out) {}

  void section(std::string name) { section_ = std::move(name); }

  void count(std::string key, std::uint64_t v) {
    ReportField f = base(std::move(key), Kind::Count);
    f.count = v;
    out_.push_back(std::move(f));
  }
  void rate(std::string key, double v) {
    ReportField f = base(std::move(key), Kind::Rate);
    f.real = v;
    out_.push_back(std::move(f));
  }
  void latency(std::string key, std::optional<double> v) {
    ReportField f = base(std::move(key), Kind::Latency);
    f.real = v;
    out_.push_back(std::move(f));
  }
  void label(std::string key, std::string v) {
    ReportField f = base(std::move(key), Kind::Label);
    f.label = std::move(v);
    out_.push_back(std::move(f));
  }

 private:
  ReportField base(std::string key, Kind kind) const {
    ReportField f;
    f.section = section_;
    f.key = std::move(key);
    f.kind = kind;
    return f;
  }

  std::vector<ReportField>& out_;
  std::string section_;
};

std::string json_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string value_text(const ReportField& f, bool json) {
  switch (f.kind) {
    case Kind::Count: return fmt::format("{}", f.count);
    case Kind::SignedCount: return fmt::format("{}", f.signed_count);
    case Kind::Rate: return fmt::format("{:.6f}", f.real.value_or(0.0));
    case Kind::Latency:
      if (!f.real) return json ? "null" : "";
      return fmt::format("{:.2f}", *f.real);
    case Kind::Label: return json ? fmt::format("\"{}\"", json_escape(f.label)) : f.label;
  }
  return {};
}

// Fields grouped by section, emitted as one JSON object per section.
void append_json_object(std::string& out, const std::vector<ReportField>& fields, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  out += "{\n";
  for (std::size_t i = 0; i < fields.size();) {
    const auto& section = fields[i].section;
    out += fmt::format("{}  \"{}\": {{\n", pad, section);
    std::size_t j = i;
    for (; j < fields.size() && fields[j].section == section; ++j) {
      const bool last = j + 1 == fields.size() || fields[j + 1].section != section;
      out += fmt::format("{}    \"{}\": {}{}\n", pad, fields[j].key, value_text(fields[j], true),
                         last ? "" : ",");
    }
    out += fmt::format("{}  }}{}\n", pad, j == fields.size() ? "" : ",");
    i = j;
  }
  out += pad + "}";
}

std::string emit_csv(const std::vector<std::pair<std::string, std::vector<ReportField>>>& groups) {
  std::string header;
  std::string row;
  for (const auto& [prefix, fields] : groups) {
    for (const auto& f : fields) {
      if (!header.empty()) {
        header += ',';
        row += ',';
      }
      header += prefix + f.section + "." + f.key;
      row += value_text(f, false);
    }
  }
  return header + "\n" + row + "\n";
}

std::vector<ReportField> deltas(const std::vector<ReportField>& a, const std::vector<ReportField>& b) {
  if (a.size() != b.size()) throw InvariantFault("reports with different field layouts");
  std::vector<ReportField> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& fa = a[i];
    const auto& fb = b[i];
    if (fa.kind == Kind::Label) continue;
    ReportField d;
    d.section = fa.section;
    d.key = fa.key;
    d.kind = fa.kind;
    switch (fa.kind) {
      case Kind::Count:
        d.kind = Kind::SignedCount;
        d.signed_count = static_cast<std::int64_t>(fb.count) - static_cast<std::int64_t>(fa.count);
        break;
      case Kind::SignedCount: d.signed_count = fb.signed_count - fa.signed_count; break;
      case Kind::Rate:
      case Kind::Latency:
        if (fa.real && fb.real) d.real = *fb.real - *fa.real;
        break;
      case Kind::Label: break;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string emit_text_rows(const std::vector<std::vector<ReportField>>& columns,
                           const std::vector<std::string>& titles) {
  std::string out;
  std::size_t width = 0;
  for (const auto& f : columns.front()) width = std::max(width, f.section.size() + f.key.size() + 1);
  if (!titles.empty()) {
    out += fmt::format("{:<{}}", "", width);
    for (const auto& t : titles) out += fmt::format("  {:>14}", t);
    out += '\n';
  }
  std::string current;
  for (std::size_t i = 0; i < columns.front().size(); ++i) {
    const auto& f = columns.front()[i];
    if (f.section != current) {
      current = f.section;
      out += fmt::format("[{}]\n", current);
    }
    out += fmt::format("{:<{}}", "  " + f.key, width);
    for (const auto& col : columns) {
      std::string v = "-";
      for (const auto& g : col) {
        if (g.section == f.section && g.key == f.key) {
          v = value_text(g, false);
          if (v.empty()) v = "n/a";
          break;
        }
      }
      out += fmt::format("  {:>14}", v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

Report make_report(const SimConfig& config, const SimStats& stats) {
  Report r;
  r.mode = config.dram.mode;
  r.prefetch_enabled = config.prefetch.enabled;
  if (stats.reads_completed > 0) {
    r.avg_read_latency =
        static_cast<double>(stats.read_latency_sum) / static_cast<double>(stats.reads_completed);
  }
  r.llc_hit_rate = ratio(stats.llc.demand_hits, stats.llc.demand_accesses);
  r.near_hit_rate = ratio(stats.near_hits, stats.near_hits + stats.near_misses);
  r.migrations_demand = stats.migrations_demand + stats.copy_installs_hot;
  r.migrations_prefetch = stats.migrations_prefetch + stats.copy_installs_prefetch;
  r.refreshes_performed = stats.refreshes_performed;
  r.refreshes_skipped = stats.refreshes_skipped;
  r.prefetch_accuracy = stats.prefetch.accuracy();
  r.prefetch_coverage = stats.prefetch.coverage();
  r.prefetch_lateness = stats.prefetch.lateness();
  r.prefetch_pollution = pollution_ratio(stats.llc.pollution_misses, stats.llc.demand_misses);
  r.stats = stats;
  return r;
}

std::vector<ReportField> report_fields(const Report& r) {
  std::vector<ReportField> out;
  FieldList f(out);
  const auto& s = r.stats;

  f.section("config");
  f.label("mode", std::string(to_string(r.mode)));
  f.label("prefetch", r.prefetch_enabled ? "on" : "off");

  f.section("metrics");
  f.latency("avg_read_latency", r.avg_read_latency);
  f.rate("llc_hit_rate", r.llc_hit_rate);
  f.rate("near_hit_rate", r.near_hit_rate);
  f.count("migrations_demand", r.migrations_demand);
  f.count("migrations_prefetch", r.migrations_prefetch);
  f.count("refreshes_performed", r.refreshes_performed);
  f.count("refreshes_skipped", r.refreshes_skipped);
  f.rate("accuracy", r.prefetch_accuracy);
  f.rate("coverage", r.prefetch_coverage);
  f.rate("lateness", r.prefetch_lateness);
  f.rate("pollution", r.prefetch_pollution);

  f.section("demand");
  f.count("arrived", s.demand_arrived);
  f.count("completed", s.demand_completed);
  f.count("reads", s.demand_reads);
  f.count("writes", s.demand_writes);

  f.section("latency");
  f.count("reads_completed", s.reads_completed);
  f.count("read_latency_sum", s.read_latency_sum);
  f.latency("read_latency_max",
            s.reads_completed ? std::optional<double>(static_cast<double>(s.read_latency_max))
                              : std::nullopt);
  f.count("dram_reads_completed", s.dram_reads_completed);
  f.latency("dram_read_latency_min",
            s.dram_reads_completed
                ? std::optional<double>(static_cast<double>(s.dram_read_latency_min))
                : std::nullopt);
  for (std::size_t i = 0; i < kLatencyBuckets; ++i) {
    f.count(fmt::format("histogram_{:02}", i), s.latency_histogram[i]);
  }

  f.section("llc");
  f.count("demand_accesses", s.llc.demand_accesses);
  f.count("demand_hits", s.llc.demand_hits);
  f.count("demand_misses", s.llc.demand_misses);
  f.count("demand_fills", s.llc.demand_fills);
  f.count("prefetch_fills", s.llc.prefetch_fills);
  f.count("useful_prefetches", s.llc.useful_prefetches);
  f.count("prefetch_evicted_unused", s.llc.prefetch_evicted_unused);
  f.count("pollution_misses", s.llc.pollution_misses);
  f.count("dirty_evictions", s.llc.dirty_evictions);

  f.section("dram");
  f.count("activations", s.activations);
  f.count("precharges", s.precharges);
  f.count("column_reads", s.column_reads);
  f.count("column_writes", s.column_writes);
  f.count("demand_requests", s.dram_demand_requests);
  f.count("prefetch_requests", s.dram_prefetch_requests);
  f.count("writebacks", s.dram_writebacks);

  f.section("near");
  f.count("hits", s.near_hits);
  f.count("misses", s.near_misses);
  f.count("near_row_accesses", s.near_row_accesses);

  f.section("migration");
  f.count("near_demand", s.migrations_demand);
  f.count("near_prefetch", s.migrations_prefetch);
  f.count("near_writebacks", s.migration_writebacks);
  f.count("copy_hot", s.copy_installs_hot);
  f.count("copy_prefetch", s.copy_installs_prefetch);
  f.count("copy_activations", s.copy_activations);

  f.section("refresh");
  f.count("ticks", s.refresh_ticks);
  f.count("scheduled", s.refreshes_scheduled);
  f.count("performed", s.refreshes_performed);
  f.count("skipped", s.refreshes_skipped);
  f.count("commands", s.refresh_commands);

  f.section("prefetch");
  f.count("lookups", s.prefetch_lookups);
  f.count("long_hits", s.long_hits);
  f.count("short_hits", s.short_hits);
  f.count("dropped", s.prefetches_dropped);
  f.count("generations", s.generations_committed);
  f.count("issued", s.prefetch.issued);
  f.count("useful", s.prefetch.useful);
  f.count("late", s.prefetch.late);
  f.count("evicted_unused", s.prefetch.evicted_unused);
  f.count("uncovered_misses", s.prefetch.uncovered_misses);

  f.section("run");
  f.count("cycles", s.cycles);
  return out;
}

std::string emit(const Report& report, OutputFormat format) {
  const auto fields = report_fields(report);
  switch (format) {
    case OutputFormat::Json: {
      std::string out;
      append_json_object(out, fields, 0);
      return out + "\n";
    }
    case OutputFormat::Csv: return emit_csv({{"", fields}});
    case OutputFormat::Text: return emit_text_rows({fields}, {});
  }
  return {};
}

Comparison compare(const SimConfig& a, const SimConfig& b, std::span<const MemoryRequest> trace) {
  SimOptions options;
  options.record_completions = false;
  auto run = [&](const SimConfig& config) {
    return make_report(config, simulate(config, trace, options).stats);
  };
  auto future_b = std::async(std::launch::async, run, std::cref(b));
  Report ra = run(a);
  return Comparison{std::move(ra), future_b.get()};
}

std::string emit(const Comparison& c, OutputFormat format) {
  const auto fa = report_fields(c.a);
  const auto fb = report_fields(c.b);
  const auto fd = deltas(fa, fb);
  switch (format) {
    case OutputFormat::Json: {
      std::string out = "{\n  \"a\": ";
      std::string part;
      append_json_object(part, fa, 2);
      out += part + ",\n  \"b\": ";
      part.clear();
      append_json_object(part, fb, 2);
      out += part + ",\n  \"delta\": ";
      part.clear();
      append_json_object(part, fd, 2);
      return out + part + "\n}\n";
    }
    case OutputFormat::Csv: return emit_csv({{"a.", fa}, {"b.", fb}, {"delta.", fd}});
    case OutputFormat::Text: return emit_text_rows({fa, fb, fd}, {"a", "b", "delta (b-a)"});
  }
  return {};
}

}  // namespace tiersim
