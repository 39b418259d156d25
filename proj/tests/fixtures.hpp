#pragma once

#include "fedforget/dataset.hpp"
#include "fedforget/fl.hpp"
#include "fedforget/mlp.hpp"

namespace fedforget::testing {

/// Small semantic-backdoor task with a centrally trained, backdoored model.
struct BackdooredModel {
  MlpArchitecture arch{20, {64, 64}, 10, Activation::kRelu};
  Task task;
  TriggerSplit split;
  DatasetSlice benign;  // a participant-sized slice of the clean data
  ParamVector clean_model;
  ParamVector model;
};

inline BackdooredModel make_backdoored_model(std::uint64_t seed) {
  BackdooredModel m;
  TaskParams tp;
  tp.train_size = 4000;
  tp.test_size = 1000;
  m.task = generate_task(tp, seed);
  m.split = build_trigger_set(m.task.train, TriggerSpec{}, m.task.generator, seed);
  m.benign.examples.assign(m.split.clean.examples.begin(),
                           m.split.clean.examples.begin() + 100);
  LocalTrainConfig central{10, 0.05, 32};
  m.clean_model = local_train(init_params(m.arch, seed), m.arch, m.split.clean, central, seed);
  m.model = local_train(m.clean_model, m.arch, concat(m.split.clean, m.split.trigger),
                        LocalTrainConfig{3, 0.05, 32}, seed + 1);
  return m;
}

}  // namespace fedforget::testing

#include <map>
#include <memory>

#include "fedforget/scenario.hpp"

namespace fedforget::testing {

/// Global models of the reference scenario at phase boundaries, cached per seed.
struct ReferenceModels {
  std::shared_ptr<const Environment> env;
  ParamVector warm;           // end of warmup
  ParamVector removal_entry;  // end of the gap, as handed to the unlearner
};

inline const ReferenceModels& reference_models(std::uint64_t seed) {
  static std::map<std::uint64_t, ReferenceModels> cache;
  auto it = cache.find(seed);
  if (it != cache.end()) return it->second;
  ScenarioEngine e(ScenarioConfig{}, seed);
  ReferenceModels m;
  m.env = e.shared_environment();
  while (e.state().phase == Phase::kWarmup) e.step();
  m.warm = e.state().global;
  while (!e.finished() && e.state().phase != Phase::kRemove) e.step();
  m.removal_entry = e.state().global;
  return cache.emplace(seed, std::move(m)).first->second;
}

}  // namespace fedforget::testing
