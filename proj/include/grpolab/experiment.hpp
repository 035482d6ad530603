#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace grpolab {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::string> format;  // csv, json, both
};

struct RunOutcome {
  int exit_code = 0;      // 0 ok, 2 validation, 3 runtime rejection, 4 internal
  std::string error_json; // machine-readable error on failure
  std::string out_dir;    // created result directory on success
};

// Parses, validates, executes one experiment spec and writes the manifest,
// result files and summary under a fresh timestamped subdirectory.
RunOutcome run_experiment(const std::string& spec_path, const RunOverrides& overrides);

// schema diagnostics only; nothing is executed
std::vector<std::string> validate_experiment(const std::string& spec_path);

}  // namespace grpolab
