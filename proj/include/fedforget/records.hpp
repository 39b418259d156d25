#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedforget/scenario.hpp"

namespace fedforget {

inline constexpr const char* kRoundsCsvHeader =
    "round,phase,acc_main,acc_backdoor_unlearn,acc_backdoor_normal,l2_compromised,"
    "l2_benign_min,l2_benign_max";

/// One CSV row per main-run round. The normal-branch column falls back to the
/// main run before the fork point, where both branches coincide.
void write_rounds_csv(std::ostream& out, const ScenarioResult& result,
                      std::size_t compromised_id);
void write_rounds_jsonl(std::ostream& out, const std::vector<RoundRecord>& records,
                        const std::string& branch);

nlohmann::json record_to_json(const RoundRecord& r);
nlohmann::json diagnostics_to_json(std::uint64_t round, const IterationDiagnostics& d);

struct Checkpoint {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  EngineState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ck);
/// Throws ArgumentError on bad magic or version mismatch.
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Shortest round-trip decimal form, used for every real in the outputs.
std::string format_real(double v);

}  // namespace fedforget
