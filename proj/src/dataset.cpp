#include "fedforget/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedforget/common.hpp"

namespace fedforget {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Random unit vector supported on dims [lo, hi), orthogonalised against
// `basis` (assumed orthonormal). Falls back to the raw draw when the basis
// already spans the subspace.
std::vector<double> random_direction(Rng& rng, std::size_t dim, std::size_t lo,
                                     std::size_t hi,
                                     const std::vector<std::vector<double>>& basis) {
  std::normal_distribution<double> n01;
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> v(dim, 0.0);
    for (std::size_t i = lo; i < hi; ++i) v[i] = n01(rng);
    std::vector<double> raw = v;
    for (const auto& b : basis) {
      double p = 0.0;
      for (std::size_t i = 0; i < dim; ++i) p += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    double nv = norm(v);
    if (nv < 1e-9) {
      v = raw;
      nv = norm(v);
    }
    if (nv > 1e-12) {
      for (double& x : v) x /= nv;
      return v;
    }
  }
  throw ArgumentError("could not draw a random direction");
}

LabeledExample sample_at(Rng& rng, std::span<const double> mean, double sigma, int label) {
  std::normal_distribution<double> n01;
  LabeledExample ex;
  ex.features.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) ex.features[i] = mean[i] + sigma * n01(rng);
  ex.label = label;
  return ex;
}

// Standard normal conditioned on x >= a, a >= 0: exponential proposal with
// the optimal rate (Robert 1995).
double sample_normal_tail(Rng& rng, double a) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log1p(-u01(rng)) / rate;
    const double d = z - rate;
    if (u01(rng) <= std::exp(-0.5 * d * d)) return z;
  }
}

void validate_task(const TaskParams& p) {
  if (p.num_classes < 2) throw ArgumentError("task.num_classes must be >= 2");
  if (p.input_dim < 2) throw ArgumentError("task.input_dim must be >= 2");
  if (p.train_size == 0 || p.test_size == 0) {
    throw ArgumentError("task sizes must be positive");
  }
  if (p.subclusters < 1) throw ArgumentError("task.subclusters must be >= 1");
  if (!(p.noise_sigma > 0.0) || !std::isfinite(p.noise_sigma)) {
    throw ArgumentError("task.noise_sigma must be positive");
  }
}

}  // namespace

void DatasetSlice::require_homogeneous() const {
  const std::size_t d = dim();
  for (const auto& ex : examples) {
    if (ex.features.size() != d) throw ArgumentError("mixed feature dimensions in slice");
  }
}

DatasetSlice concat(const DatasetSlice& a, const DatasetSlice& b) {
  if (!a.empty() && !b.empty() && a.dim() != b.dim()) {
    throw ShapeError("cannot concatenate slices of different feature dimension");
  }
  DatasetSlice out;
  out.examples.reserve(a.size() + b.size());
  out.examples.insert(out.examples.end(), a.examples.begin(), a.examples.end());
  out.examples.insert(out.examples.end(), b.examples.begin(), b.examples.end());
  return out;
}

int GeneratorState::nearest_subcluster(int k, std::span<const double> x) const {
  const auto& subs = subcluster_means.at(static_cast<std::size_t>(k));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < subs.size(); ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = x[i] - subs[j][i];
      d += t * t;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

double GeneratorState::mahalanobis(int k, int j, std::span<const double> x) const {
  const auto& m = subcluster_means.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(j));
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - m[i];
    d += t * t;
  }
  return std::sqrt(d) / params.noise_sigma;
}

Task generate_task(const TaskParams& params, std::uint64_t seed) {
  validate_task(params);
  const auto C = static_cast<std::size_t>(params.num_classes);
  const auto S = static_cast<std::size_t>(params.subclusters);
  const std::size_t D = params.input_dim;
  Rng rng = make_rng(seed, Stream::kTask);

  Task task;
  auto& g = task.generator;
  g.params = params;
  g.seed = seed;

  // Class means: scaled standard simplex when there is room, random otherwise.
  g.class_means.assign(C, std::vector<double>(D, 0.0));
  for (std::size_t k = 0; k < C; ++k) {
    if (D >= C) {
      g.class_means[k][k] = params.class_sep;
    } else {
      auto dir = random_direction(rng, D, 0, D, {});
      for (std::size_t i = 0; i < D; ++i) g.class_means[k][i] = params.class_sep * dir[i];
    }
  }

  // Subclusters live in the dims left over by the simplex.
  const std::size_t lo = D > C ? C : 0;
  g.subcluster_means.assign(C, {});
  g.edge_directions.assign(C, {});
  for (std::size_t k = 0; k < C; ++k) {
    std::vector<std::vector<double>> basis;
    for (std::size_t j = 0; j < S; ++j) {
      auto dir = random_direction(rng, D, lo, D, basis);
      basis.push_back(dir);
      std::vector<double> m = g.class_means[k];
      for (std::size_t i = 0; i < D; ++i) m[i] += params.subcluster_radius * dir[i];
      g.subcluster_means[k].push_back(std::move(m));
    }
    g.edge_directions[k] = random_direction(rng, D, lo, D, basis);
  }

  std::uniform_int_distribution<int> pick_class(0, params.num_classes - 1);
  std::uniform_int_distribution<int> pick_sub(0, params.subclusters - 1);
  auto draw = [&](std::size_t count, DatasetSlice& out) {
    out.examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int k = pick_class(rng);
      const int j = pick_sub(rng);
      out.examples.push_back(sample_at(rng, g.subcluster_means[k][j], params.noise_sigma, k));
    }
  };
  draw(params.train_size, task.train);
  draw(params.test_size, task.test);
  return task;
}

TriggerSplit build_trigger_set(const DatasetSlice& train, const TriggerSpec& spec,
                               const GeneratorState& generator, std::uint64_t seed) {
  const int C = generator.params.num_classes;
  if (spec.source_class < 0 || spec.source_class >= C || spec.target_label < 0 ||
      spec.target_label >= C) {
    throw ArgumentError("trigger classes out of range");
  }
  if (spec.subcluster >= generator.params.subclusters ||
      (spec.subcluster < 0 && spec.kind == TriggerKind::kSemanticSubpopulation)) {
    throw ArgumentError("trigger subcluster out of range");
  }
  if (spec.kind != TriggerKind::kEdgeCase && spec.target_label == spec.source_class) {
    throw ArgumentError("trigger target must differ from the source class");
  }
  Rng rng = make_rng(seed, Stream::kTrigger);

  auto relabel = [&](LabeledExample ex) {
    ex.label = spec.target_label;
    ex.tag = ExampleTag::kTrigger;
    return ex;
  };

  TriggerSplit split;
  if (spec.kind == TriggerKind::kEdgeCase) {
    const auto* count = std::get_if<TriggerCount>(&spec.size);
    if (!count || count->value == 0) {
      throw ArgumentError("edge-case trigger needs a positive count");
    }
    if (!(spec.tail_threshold >= 0.0)) throw ArgumentError("tail_threshold must be >= 0");
    const auto& mean = spec.subcluster >= 0
                           ? generator.subcluster_means[spec.source_class][spec.subcluster]
                           : generator.class_means[spec.source_class];
    const auto& dir = generator.edge_directions[spec.source_class];
    const double sigma = generator.params.noise_sigma;
    std::normal_distribution<double> n01;
    for (std::size_t i = 0; i < count->value; ++i) {
      std::vector<double> z(mean.size());
      for (double& v : z) v = n01(rng);
      double along = 0.0;
      for (std::size_t d = 0; d < z.size(); ++d) along += z[d] * dir[d];
      const double tail = sample_normal_tail(rng, spec.tail_threshold);
      LabeledExample ex;
      ex.features.resize(mean.size());
      for (std::size_t d = 0; d < z.size(); ++d) {
        ex.features[d] = mean[d] + sigma * (z[d] + (tail - along) * dir[d]);
      }
      split.trigger.examples.push_back(relabel(std::move(ex)));
    }
    split.clean = train;
    return split;
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& ex = train.examples[i];
    if (ex.label != spec.source_class) continue;
    if (spec.subcluster >= 0 &&
        generator.nearest_subcluster(spec.source_class, ex.features) != spec.subcluster) {
      continue;
    }
    eligible.push_back(i);
  }

  std::vector<char> chosen(train.size(), 0);
  if (spec.kind == TriggerKind::kSemanticSubpopulation) {
    for (std::size_t i : eligible) chosen[i] = 1;
    if (eligible.empty()) throw ArgumentError("semantic trigger selects no examples");
  } else {
    std::size_t want = 0;
    if (const auto* c = std::get_if<TriggerCount>(&spec.size)) {
      want = c->value;
    } else {
      const double f = std::get<TriggerFraction>(spec.size).value;
      if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("trigger fraction must be in [0, 1]");
      want = static_cast<std::size_t>(std::llround(f * static_cast<double>(eligible.size())));
    }
    if (want == 0) throw ArgumentError("label-flip trigger selects no examples");
    if (want > eligible.size()) {
      throw ArgumentError("label-flip trigger wants " + std::to_string(want) +
                          " examples but only " + std::to_string(eligible.size()) +
                          " are eligible");
    }
    std::shuffle(eligible.begin(), eligible.end(), rng);
    for (std::size_t i = 0; i < want; ++i) chosen[eligible[i]] = 1;
  }

  for (std::size_t i = 0; i < train.size(); ++i) {
    if (chosen[i]) {
      split.trigger.examples.push_back(relabel(train.examples[i]));
    } else {
      split.clean.examples.push_back(train.examples[i]);
    }
  }
  return split;
}

Partition partition_iid(const DatasetSlice& train, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("partition needs at least one participant");
  if (n > train.size()) {
    throw ArgumentError("cannot split " + std::to_string(train.size()) +
                        " examples across " + std::to_string(n) + " participants");
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::kPartition);
  std::shuffle(order.begin(), order.end(), rng);

  Partition p;
  p.per_participant.resize(n);
  p.sizes.resize(n);
  const std::size_t base = train.size() / n;
  const std::size_t extra = train.size() % n;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    auto& slice = p.per_participant[i].examples;
    slice.reserve(len);
    for (std::size_t k = 0; k < len; ++k) slice.push_back(train.examples[order[pos++]]);
    p.sizes[i] = len;
  }
  return p;
}

}  // namespace fedforget
