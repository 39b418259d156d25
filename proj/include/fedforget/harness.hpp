#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedforget/config.hpp"

namespace fedforget {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr const char* kOutRootEnv = "FLUNLEARN_OUT_ROOT";

/// `FLUNLEARN_OUT_ROOT` when set, otherwise the config's output_dir.
std::filesystem::path output_root(const ScenarioConfig& cfg);

struct MatrixOptions {
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
  bool benign_reference = true;
  /// Per-iteration unlearning diagnostics to <run>/unlearn_diagnostics.jsonl.
  bool diagnostics = false;
  std::ostream* log = nullptr;
};

struct RunStatus {
  std::string cell;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
};

struct MatrixReport {
  std::vector<RunStatus> runs;
  bool all_ok() const;
};

/// Human-readable resolved matrix: a header, then one line per cell with its seeds.
std::string describe_matrix(const Experiment& ex, std::uint64_t seed_offset);

/// Runs every (cell, seed) into <root>/<scenario>/<cell>/<seed>/ and writes
/// <root>/<scenario>/summary.json.
MatrixReport run_experiment(const Experiment& ex, const std::filesystem::path& root,
                            const MatrixOptions& options);

/// Writes rounds.csv, rounds.jsonl, checkpoints and manifest.json for one run.
void write_run_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                         const ScenarioResult& result, const nlohmann::json& cell_assignment);

struct RunSummary {
  std::uint64_t seed = 0;
  double final_acc_main = 0.0;
  double final_acc_backdoor = 0.0;
  double final_acc_backdoor_normal = 0.0;
  std::size_t removal_rounds = 0;
  std::size_t insertion_rounds = 0;
  double stealth_fraction = 0.0;  // removal rounds with the compromised norm inside the band
};

/// Parses a rounds.csv written by write_rounds_csv.
RunSummary summarize_rounds_csv(const std::filesystem::path& csv, std::uint64_t seed);

/// Aggregates every <cell>/<seed>/rounds.csv below `scenario_dir`.
nlohmann::json summarize_directory(const std::filesystem::path& scenario_dir);

}  // namespace fedforget
