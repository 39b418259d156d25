#include "fedforget/scenario.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <string>

#include "fedforget/common.hpp"
#include "fedforget/metrics.hpp"

namespace fedforget {

const char* phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::kWarmup: return "warmup";
    case Phase::kInsert: return "insert";
    case Phase::kGap: return "gap";
    case Phase::kRemove: return "remove";
    case Phase::kPost: return "post";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  for (Phase p : {Phase::kWarmup, Phase::kInsert, Phase::kGap, Phase::kRemove, Phase::kPost}) {
    if (s == phase_name(p)) return p;
  }
  throw ArgumentError("unknown phase '" + s + "'");
}

const char* action_name(AdversaryAction a) noexcept {
  switch (a) {
    case AdversaryAction::kNone: return "none";
    case AdversaryAction::kBenign: return "benign";
    case AdversaryAction::kPoison: return "poison";
    case AdversaryAction::kUnlearn: return "unlearn";
  }
  return "?";
}

MlpArchitecture ScenarioConfig::architecture() const {
  MlpArchitecture a;
  a.input_dim = task.input_dim;
  a.hidden_dims = hidden_dims;
  a.num_classes = static_cast<std::size_t>(task.num_classes);
  a.activation = activation;
  return a;
}

std::size_t ScenarioConfig::remove_cap() const {
  if (phases.remove_cap) return *phases.remove_cap;
  return selection_remove.kind == SelectionKind::kContinuous ? 300 : 500;
}

double ScenarioConfig::remove_threshold() const {
  if (phases.remove_threshold) return *phases.remove_threshold;
  return 1.0 / static_cast<double>(task.num_classes);
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ArgumentError(field + ": " + why);
  };
  if (name.empty()) fail("name", "must not be empty");
  if (task.num_classes < 2) fail("task.num_classes", "must be >= 2");
  if (task.input_dim == 0) fail("task.input_dim", "must be positive");
  if (task.subclusters < 1) fail("task.subclusters", "must be >= 1");
  if (task.train_size < n) fail("task.train_size", "smaller than population");
  if (task.test_size == 0) fail("task.test_size", "must be positive");
  if (!(task.noise_sigma > 0)) fail("task.noise_sigma", "must be positive");
  if (n < 2) fail("population.n", "must be >= 2");
  if (m < 1 || m > n) fail("population.m", "must be in [1, n]");
  if (compromised_id >= n) fail("population.compromised_id", "must be < n");
  if (local.batch_size == 0) fail("local.batch_size", "must be positive");
  if (local.lr < 0) fail("local.lr", "must be >= 0");
  if (trigger.source_class < 0 || trigger.source_class >= task.num_classes)
    fail("trigger.source_class", "out of range");
  if (trigger.target_label < 0 || trigger.target_label >= task.num_classes)
    fail("trigger.target_label", "out of range");
  if (trigger.target_label == trigger.source_class)
    fail("trigger.target_label", "must differ from source_class");
  if (trigger.subcluster >= task.subclusters ||
      (trigger.subcluster < 0 && trigger.kind == TriggerKind::kSemanticSubpopulation))
    fail("trigger.subcluster", "out of range");
  if (trigger.kind == TriggerKind::kEdgeCase && !std::holds_alternative<TriggerCount>(trigger.size))
    fail("trigger.size", "edge_case requires an explicit count");
  if (!(noise_sigma >= 0)) fail("defense.noise_sigma", "must be >= 0");
  if (!(phases.insert_target > 0 && phases.insert_target <= 1))
    fail("phases.insert_target", "must be in (0, 1]");
  if (phases.insert_cap == 0) fail("phases.insert_cap", "must be positive");
  try {
    attack.validate();
  } catch (const std::exception& e) {
    fail("attack", e.what());
  }
  try {
    unlearn.validate();
  } catch (const std::exception& e) {
    fail("unlearn", e.what());
  }
  for (const auto* p : {&selection_insert, &selection_remove}) {
    SelectionPolicy probe = *p;
    probe.m = m;
    try {
      probe.validate(n);
    } catch (const std::exception& e) {
      fail(p == &selection_insert ? "selection.insert" : "selection.remove", e.what());
    }
  }
  if (seeds.empty()) fail("seeds", "must not be empty");
}

Environment build_environment(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Environment env;
  env.arch = cfg.architecture();
  env.task = generate_task(cfg.task, derive_seed(seed, Stream::kTask));
  TriggerSplit split = build_trigger_set(env.task.train, cfg.trigger, env.task.generator,
                                         derive_seed(seed, Stream::kTrigger));
  env.trigger = std::move(split.trigger);
  env.partition = partition_iid(split.clean, cfg.n, derive_seed(seed, Stream::kPartition));
  env.poisoned = craft_poisoned_slice(env.compromised_slice(cfg.compromised_id), env.trigger,
                                      derive_seed(seed, Stream::kAdversary, 0xC0FFEE));
  env.initial = init_params(env.arch, derive_seed(seed, Stream::kInit));
  return env;
}

ScenarioEngine::ScenarioEngine(ScenarioConfig cfg, std::uint64_t seed, ExecutionMode mode)
    : ScenarioEngine(cfg, seed, std::make_shared<const Environment>(build_environment(cfg, seed)),
                     mode) {}

ScenarioEngine::ScenarioEngine(ScenarioConfig cfg, std::uint64_t seed,
                               std::shared_ptr<const Environment> env, ExecutionMode mode)
    : cfg_(std::move(cfg)), seed_(seed), env_(std::move(env)), mode_(mode) {
  if (!env_) throw ArgumentError("ScenarioEngine: null environment");
  adversary_enabled_ = cfg_.adversary_enabled;
  state_.global = env_->initial;
  skip_empty_phases();
}

void ScenarioEngine::restore(EngineState s) {
  s.global.require_layout(env_->initial, "ScenarioEngine::restore");
  state_ = std::move(s);
}

void ScenarioEngine::set_schedule(std::vector<Phase> schedule) {
  schedule_ = std::move(schedule);
  if (state_.round >= schedule_->size()) state_.finished = true;
}

Phase ScenarioEngine::current_phase() const {
  if (schedule_) return schedule_->at(state_.round);
  return state_.phase;
}

SelectionPolicy ScenarioEngine::policy_for(Phase p) const {
  SelectionPolicy pol;
  switch (p) {
    case Phase::kInsert: pol = cfg_.selection_insert; break;
    case Phase::kRemove: pol = cfg_.selection_remove; break;
    default: pol.kind = SelectionKind::kRandom; break;
  }
  pol.m = cfg_.m;
  pol.seed = derive_seed(seed_, Stream::kSelection, static_cast<std::uint64_t>(p));
  return pol;
}

namespace {

std::size_t phase_length(const ScenarioConfig& cfg, Phase p) {
  switch (p) {
    case Phase::kWarmup: return cfg.phases.warmup_rounds;
    case Phase::kGap: return cfg.phases.gap_rounds;
    case Phase::kPost: return cfg.phases.post_rounds;
    default: return 1;  // open-ended phases never skip
  }
}

Phase next_phase(Phase p) {
  switch (p) {
    case Phase::kWarmup: return Phase::kInsert;
    case Phase::kInsert: return Phase::kGap;
    case Phase::kGap: return Phase::kRemove;
    default: return Phase::kPost;
  }
}

}  // namespace

void ScenarioEngine::skip_empty_phases() {
  while (!state_.finished && phase_length(cfg_, state_.phase) == 0) {
    if (state_.phase == Phase::kPost) {
      state_.finished = true;
      break;
    }
    state_.phase = next_phase(state_.phase);
    state_.phase_rounds = 0;
  }
}

void ScenarioEngine::advance(Phase ran, double acc_b) {
  ++state_.round;
  if (schedule_) {
    state_.phase = state_.round < schedule_->size() ? (*schedule_)[state_.round] : ran;
    state_.phase_rounds = (state_.phase == ran) ? state_.phase_rounds + 1 : 0;
    if (state_.round >= schedule_->size()) state_.finished = true;
    return;
  }
  ++state_.phase_rounds;
  bool move = false;
  switch (ran) {
    case Phase::kWarmup:
    case Phase::kGap:
      move = state_.phase_rounds >= phase_length(cfg_, ran);
      break;
    case Phase::kInsert:
      if (acc_b >= cfg_.phases.insert_target) {
        move = true;
      } else if (state_.phase_rounds >= cfg_.phases.insert_cap) {
        state_.flags.push_back("insertion_cap_reached");
        state_.finished = true;
      }
      break;
    case Phase::kRemove:
      if (acc_b <= cfg_.remove_threshold()) {
        move = true;
      } else if (state_.phase_rounds >= cfg_.remove_cap()) {
        state_.flags.push_back("removal_cap_reached");
        move = true;
      }
      break;
    case Phase::kPost:
      if (state_.phase_rounds >= cfg_.phases.post_rounds) state_.finished = true;
      break;
  }
  if (move) {
    state_.phase = next_phase(ran);
    state_.phase_rounds = 0;
    skip_empty_phases();
  }
}

RoundRecord ScenarioEngine::step() {
  if (state_.finished) throw ArgumentError("ScenarioEngine::step: scenario finished");
  const Environment& env = *env_;
  const ParamVector& global = state_.global;
  const Phase phase = current_phase();
  const std::uint64_t round = state_.round;
  const std::size_t cid = cfg_.compromised_id;

  RoundRecord rec;
  rec.round = round;
  rec.phase = phase;
  rec.selected = select_participants(policy_for(phase), round, cfg_.n, cid);
  const std::size_t k = rec.selected.size();

  AdversaryAction adv = AdversaryAction::kBenign;
  if (adversary_enabled_ && phase == Phase::kInsert) adv = AdversaryAction::kPoison;
  if (adversary_enabled_ && phase == Phase::kRemove) adv = AdversaryAction::kUnlearn;

  std::vector<ParamVector> locals(k);
  std::vector<std::exception_ptr> errors(k);
  std::vector<std::vector<IterationDiagnostics>> diags(k);
  std::vector<std::size_t> steps(k, 0);

  auto train_one = [&](std::size_t slot) {
    const std::size_t id = rec.selected[slot];
    const DatasetSlice& data = env.partition.per_participant[id];
    const std::uint64_t s = derive_seed(seed_, Stream::kLocal, round, id);
    try {
      if (id != cid || adv == AdversaryAction::kBenign) {
        locals[slot] = local_train(global, env.arch, data, cfg_.local, s);
      } else if (adv == AdversaryAction::kPoison) {
        locals[slot] = train_malicious(global, env.arch, env.poisoned, data, cfg_.attack,
                                       derive_seed(seed_, Stream::kAdversary, round));
      } else {
        UnlearnObserver obs;
        if (observer_) obs = [&diags, slot](const IterationDiagnostics& d) {
          diags[slot].push_back(d);
        };
        UnlearnOutcome out = run_unlearning(global, env.arch, data, env.trigger, cfg_.unlearn,
                                            derive_seed(seed_, Stream::kUnlearn, round), obs);
        steps[slot] = out.steps;
        locals[slot] = std::move(out.local);
      }
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };

  if (mode_ == ExecutionMode::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t slot = 0; slot < k; ++slot) train_one(slot);
  } else {
    for (std::size_t slot = 0; slot < k; ++slot) train_one(slot);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t n_sel = 0;
  for (std::size_t id : rec.selected) n_sel += env.partition.sizes[id];

  std::vector<ClientUpdate> updates;
  updates.reserve(k);
  std::optional<std::size_t> cslot;
  for (std::size_t slot = 0; slot < k; ++slot) {
    const std::size_t id = rec.selected[slot];
    const std::size_t n_i = env.partition.sizes[id];
    rec.update_l2[id] = update_l2(locals[slot], global);
    ParamVector u;
    if (id == cid) {
      cslot = slot;
      rec.compromised_selected = true;
      rec.action = adv;
      rec.unlearn_steps = steps[slot];
      if (adv == AdversaryAction::kPoison && cfg_.attack.scale_mode == ScaleMode::kFullReplacement) {
        u = replacement_update(locals[slot], global, n_i, n_sel);
      } else if (adv == AdversaryAction::kUnlearn) {
        u = removal_update(locals[slot], global, n_i, n_sel, cfg_.removal_scaled);
      }
    }
    if (u.size() == 0) u = locals[slot] - global;
    updates.push_back({id, std::move(u), n_i});
  }

  if (cslot && k > 1) {
    double sum = 0.0;
    for (std::size_t slot = 0; slot < k; ++slot) {
      if (slot != *cslot) sum += l2_distance(locals[*cslot], locals[slot]);
    }
    rec.l2_compromised_to_benign = sum / static_cast<double>(k - 1);
  }

  DefenseConfig defense{cfg_.noise_sigma, derive_seed(seed_, Stream::kNoise)};
  state_.global = fedavg_aggregate(global, std::move(updates), defense, round);

  rec.global_params_norm = l2_norm(state_.global);
  rec.acc_main = accuracy(state_.global, env.arch, env.task.test.view());
  rec.acc_backdoor = acc_backdoor(state_.global, env.arch, env.trigger);

  if (observer_) {
    for (const auto& list : diags) {
      for (const auto& d : list) observer_(round, d);
    }
  }

  const std::size_t nflags = state_.flags.size();
  advance(phase, rec.acc_backdoor);
  rec.flags.assign(state_.flags.begin() + static_cast<std::ptrdiff_t>(nflags), state_.flags.end());
  return rec;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                            const RunOptions& options) {
  ScenarioResult result;
  result.seed = seed;
  ScenarioEngine engine(cfg, seed, options.mode);
  engine.set_observer(options.observer);
  result.checkpoints.push_back({engine.state().phase, engine.state()});

  std::optional<EngineState> fork_point;
  while (!engine.finished()) {
    const Phase before = engine.state().phase;
    result.records.push_back(engine.step());
    const EngineState& st = engine.state();
    if (!st.finished && st.phase != before) {
      result.checkpoints.push_back({st.phase, st});
      if (st.phase == Phase::kRemove && !fork_point) fork_point = st;
    }
  }
  result.flags = engine.state().flags;

  std::vector<Phase> schedule;
  schedule.reserve(result.records.size());
  for (const auto& r : result.records) schedule.push_back(r.phase);

  if (options.fork_normal_branch && fork_point) {
    ScenarioEngine branch(cfg, seed, engine.shared_environment(), options.mode);
    branch.restore(*fork_point);
    branch.set_schedule(schedule);
    branch.set_adversary_enabled(false);
    while (!branch.finished()) result.normal_branch.push_back(branch.step());
  }
  if (options.benign_reference) {
    ScenarioEngine ref(cfg, seed, engine.shared_environment(), options.mode);
    ref.set_schedule(schedule);
    ref.set_adversary_enabled(false);
    while (!ref.finished()) result.benign_reference.push_back(ref.step());
  }
  return result;
}

std::vector<RoundRecord> replay(const ScenarioConfig& cfg, std::uint64_t seed,
                                const EngineState& state, std::size_t rounds,
                                bool adversary_enabled) {
  ScenarioEngine engine(cfg, seed);
  engine.restore(state);
  engine.set_adversary_enabled(adversary_enabled);
  std::vector<RoundRecord> out;
  while (out.size() < rounds && !engine.finished()) out.push_back(engine.step());
  return out;
}

}  // namespace fedforget
