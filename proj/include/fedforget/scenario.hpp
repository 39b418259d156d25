#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedforget/adversary.hpp"
#include "fedforget/dataset.hpp"
#include "fedforget/fl.hpp"
#include "fedforget/mlp.hpp"
#include "fedforget/unlearner.hpp"

namespace fedforget {

enum class Phase { kWarmup, kInsert, kGap, kRemove, kPost };
const char* phase_name(Phase p) noexcept;
Phase parse_phase(const std::string& s);

struct PhaseConfig {
  std::size_t warmup_rounds = 30;
  double insert_target = 0.90;
  std::size_t insert_cap = 200;
  std::size_t gap_rounds = 5;
  /// Unset: 300 rounds for continuous removal, 500 otherwise.
  std::optional<std::size_t> remove_cap;
  /// Unset: 1 / num_classes.
  std::optional<double> remove_threshold;
  std::size_t post_rounds = 10;
};

struct ScenarioConfig {
  std::string name = "scenario";
  TaskParams task;
  std::vector<std::size_t> hidden_dims{64, 64};
  Activation activation = Activation::kRelu;
  std::size_t n = 100;
  std::size_t m = 10;
  std::size_t compromised_id = 0;
  LocalTrainConfig local;
  TriggerSpec trigger;
  AttackPlan attack;
  UnlearnPlan unlearn;
  bool removal_scaled = true;
  /// Only kind and f are read; m and the seed come from the scenario.
  SelectionPolicy selection_insert{SelectionKind::kContinuous};
  SelectionPolicy selection_remove{SelectionKind::kContinuous};
  double noise_sigma = 0.0;
  PhaseConfig phases;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output_dir = "out";
  bool adversary_enabled = true;

  MlpArchitecture architecture() const;
  std::size_t remove_cap() const;
  double remove_threshold() const;
  /// Throws ArgumentError naming the offending field.
  void validate() const;
};

/// Deterministic per-(config, seed) world: data, trigger set, partition, init.
struct Environment {
  MlpArchitecture arch;
  Task task;
  DatasetSlice trigger;   // D_t
  Partition partition;    // over the clean pool
  DatasetSlice poisoned;  // D_pc + D_t, adversary's insertion data
  ParamVector initial;

  const DatasetSlice& compromised_slice(std::size_t id) const {
    return partition.per_participant.at(id);
  }
};

Environment build_environment(const ScenarioConfig& cfg, std::uint64_t seed);

enum class AdversaryAction { kNone, kBenign, kPoison, kUnlearn };
const char* action_name(AdversaryAction a) noexcept;

struct RoundRecord {
  std::uint64_t round = 0;
  Phase phase = Phase::kWarmup;
  std::vector<std::size_t> selected;
  bool compromised_selected = false;
  AdversaryAction action = AdversaryAction::kNone;
  double global_params_norm = 0.0;
  std::map<std::size_t, double> update_l2;  // unscaled ||L_i - G||
  double acc_main = 0.0;
  double acc_backdoor = 0.0;
  /// Mean ||L_pc - L_i|| over the benign participants of the round.
  std::optional<double> l2_compromised_to_benign;
  std::size_t unlearn_steps = 0;
  std::vector<std::string> flags;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct EngineState {
  std::uint64_t round = 0;  // next round to execute
  Phase phase = Phase::kWarmup;
  std::size_t phase_rounds = 0;
  bool finished = false;
  ParamVector global;
  std::vector<std::string> flags;

  friend bool operator==(const EngineState&, const EngineState&) = default;
};

enum class ExecutionMode { kSerial, kParallel };

using RoundObserver = std::function<void(std::uint64_t round, const IterationDiagnostics&)>;

/// Runs one seeded scenario round by round.
///
/// Local training of the selected participants is independent per
/// participant and runs in parallel in kParallel mode; aggregation is a
/// single ordered reduction, so both modes produce identical records.
class ScenarioEngine {
 public:
  ScenarioEngine(ScenarioConfig cfg, std::uint64_t seed,
                 ExecutionMode mode = ExecutionMode::kParallel);
  /// Shares an already-built environment (must come from the same config/seed).
  ScenarioEngine(ScenarioConfig cfg, std::uint64_t seed,
                 std::shared_ptr<const Environment> env,
                 ExecutionMode mode = ExecutionMode::kParallel);

  RoundRecord step();
  bool finished() const noexcept { return state_.finished; }

  const EngineState& state() const noexcept { return state_; }
  void restore(EngineState s);

  /// Forces the phase of each absolute round; the run finishes after the last
  /// scheduled round.
  void set_schedule(std::vector<Phase> schedule);
  void set_adversary_enabled(bool on) noexcept { adversary_enabled_ = on; }
  void set_observer(RoundObserver obs) { observer_ = std::move(obs); }

  const ScenarioConfig& config() const noexcept { return cfg_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Environment& environment() const noexcept { return *env_; }
  std::shared_ptr<const Environment> shared_environment() const noexcept { return env_; }

 private:
  Phase current_phase() const;
  SelectionPolicy policy_for(Phase p) const;
  void advance(Phase ran, double acc_b);
  void skip_empty_phases();

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  std::shared_ptr<const Environment> env_;
  ExecutionMode mode_;
  EngineState state_;
  std::optional<std::vector<Phase>> schedule_;
  bool adversary_enabled_ = true;
  RoundObserver observer_;
};

struct PhaseCheckpoint {
  Phase entering = Phase::kWarmup;
  EngineState state;
};

struct ScenarioResult {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  /// Adversary idle from the start of removal onward; same rounds as the main run.
  std::vector<RoundRecord> normal_branch;
  /// Adversary benign throughout, following the main run's phase schedule.
  std::vector<RoundRecord> benign_reference;
  std::vector<PhaseCheckpoint> checkpoints;
  std::vector<std::string> flags;
};

struct RunOptions {
  bool fork_normal_branch = true;
  bool benign_reference = false;
  ExecutionMode mode = ExecutionMode::kParallel;
  RoundObserver observer;
};

/// Full phase schedule warmup -> insert -> gap -> remove -> post.
ScenarioResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                            const RunOptions& options = {});

/// Continues `state` for up to `rounds` rounds.
std::vector<RoundRecord> replay(const ScenarioConfig& cfg, std::uint64_t seed,
                                const EngineState& state, std::size_t rounds,
                                bool adversary_enabled = true);

}  // namespace fedforget
