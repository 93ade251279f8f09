#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "tiersim/controller.hpp"

namespace tiersim {

enum class OutputFormat { Json, Csv, Text };

std::string_view to_string(OutputFormat format);
OutputFormat parse_output_format(std::string_view text);

struct RunConfig {
  SimConfig sim;
  /// `run.trace`, resolved relative to the config file's directory.
  std::optional<std::filesystem::path> trace;
  OutputFormat output = OutputFormat::Json;
  /// Default seed for `gen` when the flag is omitted. Simulation itself has
  /// no randomness.
  std::uint64_t seed = 1;
};

/// Parses `section.key = value` lines; `#` starts a comment. Unknown keys,
/// duplicate keys and malformed values are InputErrors naming the line.
/// The result is validated.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tiersim
