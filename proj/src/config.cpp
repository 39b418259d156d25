#include "fedforget/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fedforget {

using nlohmann::json;

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Walks one JSON object, remembering which keys were consumed so that
// leftovers (typos, stale fields) can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(has(key) ? j_.at(key) : empty, join(path_, key));
  }

  double real(const std::string& key, double def) {
    if (!has(key)) return mark(key, def);
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t def) {
    if (!has(key)) return mark(key, def);
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(join(path_, key), "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  int integer(const std::string& key, int def) {
    if (!has(key)) return mark(key, def);
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
    return v.get<int>();
  }

  bool flag(const std::string& key, bool def) {
    if (!has(key)) return mark(key, def);
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) {
    if (!has(key)) return mark(key, def);
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
    return v.get<std::string>();
  }

  std::string required_text(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "required field is missing");
    return text(key, "");
  }

  template <class E>
  E choice(const std::string& key, E def,
           std::initializer_list<std::pair<const char*, E>> options) {
    if (!has(key)) return mark(key, def);
    const std::string s = text(key, "");
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      allowed += allowed.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(join(path_, key), "unknown value '" + s + "' (expected one of " + allowed + ")");
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown field");
    }
  }

  const std::string& path() const noexcept { return path_; }

 private:
  template <class T>
  T mark(const std::string& key, T def) {
    seen_.insert(key);
    return def;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr std::initializer_list<std::pair<const char*, TriggerKind>> kTriggerKinds = {
    {"semantic_subpopulation", TriggerKind::kSemanticSubpopulation},
    {"label_flip_subset", TriggerKind::kLabelFlipSubset},
    {"edge_case", TriggerKind::kEdgeCase}};
constexpr std::initializer_list<std::pair<const char*, AttackMethod>> kAttackMethods = {
    {"constrain_and_scale", AttackMethod::kConstrainAndScale},
    {"neurotoxin", AttackMethod::kNeurotoxinMask}};
constexpr std::initializer_list<std::pair<const char*, ScaleMode>> kScaleModes = {
    {"full", ScaleMode::kFullReplacement}, {"none", ScaleMode::kNone}};
constexpr std::initializer_list<std::pair<const char*, UnlearnVariant>> kVariants = {
    {"naive_ga", UnlearnVariant::kNaiveGa},
    {"memory_preserve", UnlearnVariant::kMemoryPreserve},
    {"mp_penalty_unweighted", UnlearnVariant::kPenaltyUnweighted},
    {"mp_penalty_weighted", UnlearnVariant::kPenaltyWeighted}};
constexpr std::initializer_list<std::pair<const char*, SelectionKind>> kSelections = {
    {"continuous", SelectionKind::kContinuous},
    {"fixed_frequency", SelectionKind::kFixedFrequency},
    {"random", SelectionKind::kRandom}};
constexpr std::initializer_list<std::pair<const char*, Activation>> kActivations = {
    {"relu", Activation::kRelu}, {"tanh", Activation::kTanh}};

template <class E>
const char* name_of(E value, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

std::vector<std::string> attack_setting_ids() { return {"id1", "id2", "id3", "id4"}; }

void apply_attack_setting(const std::string& id, json& j) {
  json preset;
  if (id == "id1") {
    preset["trigger"] = {{"kind", "semantic_subpopulation"}};
    preset["attack"] = {{"method", "constrain_and_scale"}};
  } else if (id == "id2") {
    preset["trigger"] = {{"kind", "label_flip_subset"}};
    preset["attack"] = {{"method", "neurotoxin"}};
  } else if (id == "id3") {
    preset["trigger"] = {{"kind", "edge_case"}};
    preset["attack"] = {{"method", "neurotoxin"}};
  } else if (id == "id4") {
    preset["trigger"] = {{"kind", "label_flip_subset"}};
    preset["attack"] = {{"method", "neurotoxin"}};
    preset["task"] = {{"num_classes", 20}, {"input_dim", 30}};
  } else {
    throw ConfigError("attack_setting", "unknown attack setting '" + id + "'");
  }
  // Explicit fields in the scenario win over the preset.
  preset.merge_patch(j);
  j = std::move(preset);
}

ScenarioConfig config_from_json(const json& input) {
  json j = input;
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  if (j.contains("attack_setting")) {
    if (!j["attack_setting"].is_string()) {
      throw ConfigError("attack_setting", "expected a string");
    }
    const std::string id = j["attack_setting"].get<std::string>();
    j.erase("attack_setting");
    apply_attack_setting(id, j);
  }

  ScenarioConfig c;
  Reader root(j, "");
  c.name = root.required_text("name");
  if (!root.has("trigger")) throw ConfigError("trigger", "required field is missing");

  {
    Reader r = root.child("task");
    c.task.num_classes = r.integer("num_classes", c.task.num_classes);
    c.task.input_dim = r.count("input_dim", c.task.input_dim);
    c.task.train_size = r.count("train_size", c.task.train_size);
    c.task.test_size = r.count("test_size", c.task.test_size);
    c.task.subclusters = r.integer("subclusters", c.task.subclusters);
    c.task.class_sep = r.real("class_sep", c.task.class_sep);
    c.task.subcluster_radius = r.real("subcluster_radius", c.task.subcluster_radius);
    c.task.noise_sigma = r.real("noise_sigma", c.task.noise_sigma);
    r.finish();
  }
  {
    Reader r = root.child("model");
    if (r.has("hidden")) {
      const json& h = r.raw("hidden");
      if (!h.is_array()) throw ConfigError("model.hidden", "expected an array of widths");
      c.hidden_dims.clear();
      for (const auto& w : h) {
        if (!w.is_number_integer() || w.get<long long>() <= 0) {
          throw ConfigError("model.hidden", "widths must be positive integers");
        }
        c.hidden_dims.push_back(w.get<std::size_t>());
      }
    }
    c.activation = r.choice("activation", c.activation, kActivations);
    r.finish();
  }
  {
    Reader r = root.child("population");
    c.n = r.count("n", c.n);
    c.m = r.count("m", c.m);
    c.compromised_id = r.count("compromised_id", c.compromised_id);
    r.finish();
  }
  {
    Reader r = root.child("local");
    c.local.epochs = r.count("epochs", c.local.epochs);
    c.local.lr = r.real("lr", c.local.lr);
    c.local.batch_size = r.count("batch_size", c.local.batch_size);
    r.finish();
  }
  {
    Reader r = root.child("trigger");
    c.trigger.kind = r.choice("kind", c.trigger.kind, kTriggerKinds);
    c.trigger.source_class = r.integer("source_class", c.trigger.source_class);
    c.trigger.target_label = r.integer("target_label", c.trigger.target_label);
    c.trigger.subcluster = r.integer("subcluster", c.trigger.subcluster);
    c.trigger.tail_threshold = r.real("tail_threshold", c.trigger.tail_threshold);
    if (r.has("fraction") && r.has("count")) {
      throw ConfigError("trigger.count", "give either fraction or count, not both");
    }
    // Per-kind sizing defaults.
    switch (c.trigger.kind) {
      case TriggerKind::kSemanticSubpopulation: c.trigger.size = TriggerFraction{1.0}; break;
      case TriggerKind::kLabelFlipSubset: c.trigger.size = TriggerFraction{0.95}; break;
      case TriggerKind::kEdgeCase: c.trigger.size = TriggerCount{200}; break;
    }
    // Far out along the edge direction of one subcluster; the region between
    // subclusters is shared by every class.
    if (c.trigger.kind == TriggerKind::kEdgeCase && !r.has("tail_threshold")) {
      c.trigger.tail_threshold = 6.0;
    }
    if (r.has("fraction")) c.trigger.size = TriggerFraction{r.real("fraction", 0.0)};
    if (r.has("count")) c.trigger.size = TriggerCount{r.count("count", 0)};
    r.finish();
  }
  {
    Reader r = root.child("attack");
    c.attack.method = r.choice("method", c.attack.method, kAttackMethods);
    c.attack.poison_epochs = r.count("poison_epochs", c.attack.poison_epochs);
    c.attack.poison_lr = r.real("poison_lr", c.attack.poison_lr);
    c.attack.batch_size = r.count("batch_size", c.attack.batch_size);
    c.attack.alpha = r.real("alpha", c.attack.alpha);
    c.attack.mask_ratio = r.real("mask_ratio", c.attack.mask_ratio);
    c.attack.scale_mode = r.choice("scale_mode", c.attack.scale_mode, kScaleModes);
    r.finish();
  }
  {
    Reader r = root.child("unlearn");
    c.unlearn.variant = r.choice("variant", c.unlearn.variant, kVariants);
    c.unlearn.gamma = r.real("gamma", c.unlearn.gamma);
    c.unlearn.epochs = r.count("epochs", c.unlearn.epochs);
    c.unlearn.lr0 = r.real("lr0", c.unlearn.lr0);
    c.unlearn.lr_decay_every = r.count("lr_decay_every", c.unlearn.lr_decay_every);
    c.unlearn.lr_decay_factor = r.real("lr_decay_factor", c.unlearn.lr_decay_factor);
    c.unlearn.batch_size = r.count("batch_size", c.unlearn.batch_size);
    c.unlearn.epsilon_importance = r.real("epsilon_importance", c.unlearn.epsilon_importance);
    c.unlearn.omega_clip = r.real("omega_clip", c.unlearn.omega_clip);
    c.unlearn.early_stop = r.flag("early_stop", c.unlearn.early_stop);
    c.unlearn.early_stop_tolerance = r.real("early_stop_tolerance", c.unlearn.early_stop_tolerance);
    c.removal_scaled = r.flag("scaled", c.removal_scaled);
    r.finish();
  }
  {
    Reader r = root.child("selection");
    c.selection_insert.kind = r.choice("insert", c.selection_insert.kind, kSelections);
    c.selection_remove.kind = r.choice("remove", c.selection_remove.kind, kSelections);
    const std::size_t f = r.count("frequency", c.selection_insert.f);
    c.selection_insert.f = f;
    c.selection_remove.f = f;
    r.finish();
  }
  {
    Reader r = root.child("defense");
    c.noise_sigma = r.real("noise_sigma", c.noise_sigma);
    r.finish();
  }
  {
    Reader r = root.child("phases");
    c.phases.warmup_rounds = r.count("warmup", c.phases.warmup_rounds);
    c.phases.insert_target = r.real("insert_target", c.phases.insert_target);
    c.phases.insert_cap = r.count("insert_cap", c.phases.insert_cap);
    c.phases.gap_rounds = r.count("gap", c.phases.gap_rounds);
    if (r.has("remove_cap")) c.phases.remove_cap = r.count("remove_cap", 0);
    else r.count("remove_cap", 0);
    if (r.has("remove_threshold")) c.phases.remove_threshold = r.real("remove_threshold", 0.0);
    else r.real("remove_threshold", 0.0);
    c.phases.post_rounds = r.count("post", c.phases.post_rounds);
    r.finish();
  }
  if (root.has("seeds")) {
    const json& s = root.raw("seeds");
    c.seeds.clear();
    if (s.is_array()) {
      for (const auto& v : s) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw ConfigError("seeds", "seeds must be non-negative integers");
        }
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (s.is_object()) {
      Reader r(s, "seeds");
      const std::size_t count = r.count("count", 10);
      const std::size_t start = r.count("start", 0);
      r.finish();
      for (std::size_t i = 0; i < count; ++i) c.seeds.push_back(start + i);
    } else {
      throw ConfigError("seeds", "expected an array or {count, start}");
    }
  } else {
    root.count("seeds", 0);
  }
  c.output_dir = root.text("output_dir", c.output_dir);
  c.adversary_enabled = root.flag("adversary_enabled", c.adversary_enabled);
  root.finish();

  try {
    c.validate();
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon == std::string::npos) throw ConfigError("<root>", msg);
    throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
  }
  return c;
}

json config_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["task"] = {{"num_classes", c.task.num_classes},
               {"input_dim", c.task.input_dim},
               {"train_size", c.task.train_size},
               {"test_size", c.task.test_size},
               {"subclusters", c.task.subclusters},
               {"class_sep", c.task.class_sep},
               {"subcluster_radius", c.task.subcluster_radius},
               {"noise_sigma", c.task.noise_sigma}};
  j["model"] = {{"hidden", c.hidden_dims}, {"activation", name_of(c.activation, kActivations)}};
  j["population"] = {{"n", c.n}, {"m", c.m}, {"compromised_id", c.compromised_id}};
  j["local"] = {{"epochs", c.local.epochs}, {"lr", c.local.lr}, {"batch_size", c.local.batch_size}};
  j["trigger"] = {{"kind", name_of(c.trigger.kind, kTriggerKinds)},
                  {"source_class", c.trigger.source_class},
                  {"target_label", c.trigger.target_label},
                  {"subcluster", c.trigger.subcluster},
                  {"tail_threshold", c.trigger.tail_threshold}};
  if (const auto* f = std::get_if<TriggerFraction>(&c.trigger.size)) {
    j["trigger"]["fraction"] = f->value;
  } else {
    j["trigger"]["count"] = std::get<TriggerCount>(c.trigger.size).value;
  }
  j["attack"] = {{"method", name_of(c.attack.method, kAttackMethods)},
                 {"poison_epochs", c.attack.poison_epochs},
                 {"poison_lr", c.attack.poison_lr},
                 {"batch_size", c.attack.batch_size},
                 {"alpha", c.attack.alpha},
                 {"mask_ratio", c.attack.mask_ratio},
                 {"scale_mode", name_of(c.attack.scale_mode, kScaleModes)}};
  j["unlearn"] = {{"variant", name_of(c.unlearn.variant, kVariants)},
                  {"gamma", c.unlearn.gamma},
                  {"epochs", c.unlearn.epochs},
                  {"lr0", c.unlearn.lr0},
                  {"lr_decay_every", c.unlearn.lr_decay_every},
                  {"lr_decay_factor", c.unlearn.lr_decay_factor},
                  {"batch_size", c.unlearn.batch_size},
                  {"epsilon_importance", c.unlearn.epsilon_importance},
                  {"omega_clip", c.unlearn.omega_clip},
                  {"early_stop", c.unlearn.early_stop},
                  {"early_stop_tolerance", c.unlearn.early_stop_tolerance},
                  {"scaled", c.removal_scaled}};
  j["selection"] = {{"insert", name_of(c.selection_insert.kind, kSelections)},
                    {"remove", name_of(c.selection_remove.kind, kSelections)},
                    {"frequency", c.selection_insert.f}};
  j["defense"] = {{"noise_sigma", c.noise_sigma}};
  j["phases"] = {{"warmup", c.phases.warmup_rounds},
                 {"insert_target", c.phases.insert_target},
                 {"insert_cap", c.phases.insert_cap},
                 {"gap", c.phases.gap_rounds},
                 {"post", c.phases.post_rounds}};
  if (c.phases.remove_cap) j["phases"]["remove_cap"] = *c.phases.remove_cap;
  if (c.phases.remove_threshold) j["phases"]["remove_threshold"] = *c.phases.remove_threshold;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["adversary_enabled"] = c.adversary_enabled;
  return j;
}

namespace {

json parse_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed config: ") + e.what());
  }
}

void set_path(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("ablate", "empty field path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("ablate." + dotted, "path crosses a non-object");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

std::string cell_token(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_';
    if (!ok) ch = '_';
  }
  return s;
}

}  // namespace

Experiment parse_experiment(const std::string& text) {
  Experiment ex;
  ex.base = parse_text(text);
  if (!ex.base.is_object()) throw ConfigError("<root>", "expected an object");
  if (ex.base.contains("ablate")) {
    const json ab = ex.base["ablate"];
    ex.base.erase("ablate");
    if (!ab.is_object()) throw ConfigError("ablate", "expected an object of field paths");
    for (const auto& [path, values] : ab.items()) {
      if (!values.is_array() || values.empty()) {
        throw ConfigError("ablate." + path, "expected a non-empty array of values");
      }
      ex.axes.push_back({path, std::vector<json>(values.begin(), values.end())});
    }
  }
  if (!ex.base.contains("name") || !ex.base["name"].is_string()) {
    throw ConfigError("name", "required field is missing");
  }
  ex.name = ex.base["name"].get<std::string>();

  std::vector<std::size_t> idx(ex.axes.size(), 0);
  for (;;) {
    ExperimentCell cell;
    json j = ex.base;
    std::string id;
    for (std::size_t a = 0; a < ex.axes.size(); ++a) {
      const auto& axis = ex.axes[a];
      const json& v = axis.values[idx[a]];
      set_path(j, axis.path, v);
      cell.assignment.emplace_back(axis.path, v);
      if (!id.empty()) id += "__";
      id += axis.path + "-" + cell_token(v);
    }
    cell.id = id.empty() ? "base" : id;
    cell.config = config_from_json(j);
    ex.cells.push_back(std::move(cell));

    std::size_t a = ex.axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < ex.axes[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return ex;
    }
    if (ex.axes.empty()) return ex;
  }
}

Experiment load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

std::string serialize_config(const ScenarioConfig& cfg) { return config_to_json(cfg).dump(2); }

ScenarioConfig parse_config(const std::string& text) { return config_from_json(parse_text(text)); }

std::uint64_t config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fedforget
