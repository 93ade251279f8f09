#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tiersim/config.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/report.hpp"
#include "tiersim/trace.hpp"

namespace {

using namespace tiersim;

std::filesystem::path require_trace(const std::string& flag, const RunConfig& config) {
  if (!flag.empty()) return flag;
  if (config.trace) return *config.trace;
  throw InputError("no trace given: pass --trace or set run.trace in the config");
}

int run_command(const std::string& config_path, const std::string& trace_flag,
                const std::optional<std::string>& out_flag, const std::string& audit_path) {
  const auto config = load_config(config_path);
  const auto trace = load_trace(require_trace(trace_flag, config));
  const auto format = out_flag ? parse_output_format(*out_flag) : config.output;

  std::ofstream audit;
  SimOptions options;
  options.record_completions = false;
  if (!audit_path.empty()) {
    audit.open(audit_path);
    if (!audit) throw InputError(fmt::format("cannot write audit log {}", audit_path));
    options.audit = &audit;
  }
  const auto result = simulate(config.sim, trace, options);
  std::cout << emit(make_report(config.sim, result.stats), format);
  return 0;
}

int compare_command(const std::string& path_a, const std::string& path_b,
                    const std::string& trace_flag, const std::optional<std::string>& out_flag) {
  const auto a = load_config(path_a);
  const auto b = load_config(path_b);
  const auto trace = load_trace(require_trace(trace_flag, a));
  const auto format = out_flag ? parse_output_format(*out_flag) : a.output;
  std::cout << emit(compare(a.sim, b.sim, trace), format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered-latency DRAM and spatial prefetching simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::optional<std::string> out_format;
  std::string audit_path;
  auto* run = app.add_subcommand("run", "Simulate a trace and print a report");
  run->add_option("--config", config_path, "Key-value config file")->required();
  run->add_option("--trace", trace_path, "Trace file (overrides run.trace)");
  run->add_option("--out", out_format, "Report format: json, csv or text");
  run->add_option("--audit-log", audit_path, "Write one line per DRAM command to this file");

  std::string path_a;
  std::string path_b;
  auto* cmp = app.add_subcommand("compare", "Run two configs on one trace and print deltas (b - a)");
  cmp->add_option("--config-a", path_a, "Baseline config")->required();
  cmp->add_option("--config-b", path_b, "Candidate config")->required();
  cmp->add_option("--trace", trace_path, "Trace file (defaults to run.trace of config A)");
  cmp->add_option("--out", out_format, "Report format: json, csv or text");

  TraceGenSpec spec;
  std::string pattern = "stride";
  std::string gen_out;
  std::string gen_config;
  std::optional<std::uint64_t> seed;
  auto* gen = app.add_subcommand("gen", "Write a synthetic trace");
  gen->add_option("--pattern", pattern, "stride, random, footprint_repeat or thrash");
  gen->add_option("--count", spec.count, "Number of records");
  gen->add_option("--base", spec.base_address, "First address");
  gen->add_option("--stride", spec.stride_bytes, "STRIDE step in bytes");
  gen->add_option("--region-count", spec.region_count, "FOOTPRINT_REPEAT regions");
  gen->add_option("--iterations", spec.iterations, "FOOTPRINT_REPEAT passes");
  gen->add_option("--seed", seed, "Generator seed (defaults to run.seed)");
  gen->add_option("--inter-arrival", spec.inter_arrival, "Cycles between records");
  gen->add_option("--span", spec.span_bytes, "RANDOM address span in bytes");
  gen->add_option("--region-bytes", spec.region_bytes, "FOOTPRINT_REPEAT region size");
  gen->add_option("--pc-base", spec.pc_base, "First PC");
  gen->add_option("--write-percent", spec.write_percent, "RANDOM write share in percent");
  gen->add_option("--out", gen_out, "Output trace path")->required();
  gen->add_option("--config", gen_config, "Config supplying the DRAM geometry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_command(config_path, trace_path, out_format, audit_path);
    if (*cmp) return compare_command(path_a, path_b, trace_path, out_format);
    if (*gen) {
      RunConfig config;
      if (!gen_config.empty()) config = load_config(gen_config);
      spec.pattern = parse_pattern(pattern);
      spec.seed = seed.value_or(config.seed);
      const auto trace = generate_trace(spec, config.sim.dram);
      std::ofstream out(gen_out);
      if (!out) throw InputError(fmt::format("cannot write trace {}", gen_out));
      write_trace(out, trace);
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantFault& e) {
    std::cerr << "internal fault: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
