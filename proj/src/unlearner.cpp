#include "fedforget/unlearner.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedforget/adversary.hpp"
#include "fedforget/common.hpp"
#include "fedforget/fl.hpp"

namespace fedforget {

namespace {

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// Cycles through reshuffled passes over [0, count).
class BatchCycler {
 public:
  BatchCycler(std::size_t count, std::size_t batch, Rng& rng)
      : count_(count), batch_(batch), rng_(rng) {}

  std::vector<std::size_t> next() {
    if (pos_ >= batches_.size()) {
      batches_ = shuffled_batches(count_, batch_, rng_);
      pos_ = 0;
    }
    return batches_[pos_++];
  }

 private:
  std::size_t count_;
  std::size_t batch_;
  Rng& rng_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t pos_ = 0;
};

}  // namespace

void UnlearnPlan::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("unlearn.gamma must be >= 0");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ArgumentError("unlearn.lr0 must be positive");
  if (lr_decay_every == 0) throw ArgumentError("unlearn.lr_decay_every must be >= 1");
  if (!(lr_decay_factor >= 1.0)) throw ArgumentError("unlearn.lr_decay_factor must be >= 1");
  if (batch_size == 0) throw ArgumentError("unlearn.batch_size must be positive");
  if (!(epsilon_importance > 0.0)) throw ArgumentError("unlearn.epsilon_importance must be > 0");
  if (!(omega_clip > 0.0)) throw ArgumentError("unlearn.omega_clip must be > 0");
}

double UnlearnPlan::lr_at(std::size_t epoch) const {
  return lr0 / std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
}

ImportancePair compute_importance(const ParamVector& params, const MlpArchitecture& arch,
                                  const DatasetSlice& benign, const DatasetSlice& trigger,
                                  double epsilon, double clip) {
  if (benign.empty() || trigger.empty()) {
    throw ArgumentError("compute_importance needs non-empty benign and trigger sets");
  }
  return importance_from_gradients(forward_loss_grad(params, arch, benign.view()).grad,
                                   forward_loss_grad(params, arch, trigger.view()).grad,
                                   epsilon, clip);
}

ImportancePair importance_from_gradients(const ParamVector& grad_benign,
                                         const ParamVector& grad_trigger, double epsilon,
                                         double clip) {
  grad_benign.require_layout(grad_trigger, "importance_from_gradients");
  ImportancePair imp;
  imp.i_benign = grad_benign;
  imp.i_trigger = grad_trigger;
  imp.omega = ParamVector(grad_benign.shapes());
  for (std::size_t i = 0; i < grad_benign.size(); ++i) {
    imp.i_benign[i] = std::abs(imp.i_benign[i]);
    imp.i_trigger[i] = std::abs(imp.i_trigger[i]);
    imp.omega[i] = std::min(imp.i_benign[i] / (imp.i_trigger[i] + epsilon), clip);
  }
  return imp;
}

GradResult unlearn_loss_grad(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> benign_batch,
                             std::span<const LabeledExample> trigger_batch,
                             const ParamVector& global, const ParamVector* omega,
                             const UnlearnPlan& plan, UnlearnTerms* terms) {
  if (trigger_batch.empty()) throw ArgumentError("unlearning needs a trigger batch");
  const bool naive = plan.variant == UnlearnVariant::kNaiveGa;
  if (!naive && benign_batch.empty()) {
    throw ArgumentError("this unlearning variant needs a benign batch");
  }
  params.require_layout(global, "unlearn_loss_grad");
  const bool weighted = plan.variant == UnlearnVariant::kPenaltyWeighted;
  if (weighted) {
    if (!omega) throw ArgumentError("weighted penalty needs omega");
    params.require_layout(*omega, "unlearn_loss_grad");
  }

  UnlearnTerms t;
  GradResult trig = forward_loss_grad(params, arch, trigger_batch);
  t.ce_trigger = trig.loss;
  GradResult out;
  if (naive) {
    out.grad = std::move(trig.grad);
    out.grad *= -1.0;
    out.loss = -t.ce_trigger;
  } else {
    out = forward_loss_grad(params, arch, benign_batch);
    t.ce_benign = out.loss;
    out.grad -= trig.grad;
    out.loss = t.ce_benign - t.ce_trigger;
  }

  if (plan.uses_penalty() && plan.gamma != 0.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double w = weighted ? (*omega)[i] : 1.0;
      const double d = params[i] - global[i];
      sum += w * std::abs(d);
      const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      out.grad[i] += plan.gamma * (w * sign);
    }
    t.penalty = plan.gamma * sum;
    out.loss += t.penalty;
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite unlearning loss");
  out.grad.require_finite("unlearn_loss_grad");
  if (terms) *terms = t;
  return out;
}

UnlearnOutcome run_unlearning(const ParamVector& global, const MlpArchitecture& arch,
                              const DatasetSlice& benign, const DatasetSlice& trigger,
                              const UnlearnPlan& plan, std::uint64_t seed,
                              const UnlearnObserver& observer) {
  plan.validate();
  if (trigger.empty()) throw ArgumentError("run_unlearning: empty trigger set");
  const bool naive = plan.variant == UnlearnVariant::kNaiveGa;
  if (!naive && benign.empty()) throw ArgumentError("run_unlearning: empty benign set");

  UnlearnOutcome res;
  res.local = global;
  const bool have_benign = !benign.empty();
  res.acc_trigger_entry = accuracy(global, arch, trigger.view());
  res.acc_benign_entry = have_benign ? accuracy(global, arch, benign.view()) : 0.0;
  res.acc_trigger_exit = res.acc_trigger_entry;
  res.acc_benign_exit = res.acc_benign_entry;
  if (plan.epochs == 0) return res;

  const double chance = 1.0 / static_cast<double>(arch.num_classes);
  Rng rng = make_rng(seed, Stream::kUnlearn);
  BatchCycler trigger_batches(trigger.size(), plan.batch_size, rng);
  const DatasetSlice& driver = have_benign ? benign : trigger;

  ParamVector& local = res.local;
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    const double lr = plan.lr_at(epoch);
    for (const auto& bidx : shuffled_batches(driver.size(), plan.batch_size, rng)) {
      const auto tidx = trigger_batches.next();
      const auto tb = gather(trigger, tidx);
      std::vector<LabeledExample> bb;
      if (!naive) bb = gather(benign, bidx);

      ImportancePair imp;
      const ParamVector* omega = nullptr;
      if (plan.variant == UnlearnVariant::kPenaltyWeighted) {
        imp = compute_importance(local, arch, benign, trigger, plan.epsilon_importance,
                                 plan.omega_clip);
        omega = &imp.omega;
      }
      UnlearnTerms terms;
      const auto g = unlearn_loss_grad(local, arch, bb, tb, global, omega, plan, &terms);
      local.axpy(-lr, g.grad);
      ++res.steps;

      if (observer) {
        IterationDiagnostics diag;
        diag.epoch = epoch;
        diag.step = res.steps;
        diag.lr = lr;
        diag.loss = g.loss;
        diag.terms = terms;
        diag.benign_batch = bb.size();
        diag.trigger_batch = tb.size();
        if (omega) {
          std::vector<double> w(omega->values().begin(), omega->values().end());
          diag.omega_p50 = percentile(w, 0.50);
          diag.omega_p90 = percentile(w, 0.90);
          diag.omega_p99 = percentile(w, 0.99);
        }
        observer(diag);
      }
    }
    // Checked once per epoch, after a full pass over the benign data.
    if (plan.early_stop) {
      res.acc_trigger_exit = accuracy(local, arch, trigger.view());
      res.acc_benign_exit = have_benign ? accuracy(local, arch, benign.view()) : 0.0;
      if (res.acc_trigger_exit <= chance &&
          res.acc_benign_exit >= res.acc_benign_entry - plan.early_stop_tolerance) {
        res.stopped_early = epoch + 1 < plan.epochs;
        return res;
      }
    }
  }
  res.acc_trigger_exit = accuracy(local, arch, trigger.view());
  res.acc_benign_exit = have_benign ? accuracy(local, arch, benign.view()) : 0.0;
  return res;
}

ParamVector removal_update(const ParamVector& local, const ParamVector& global,
                           std::size_t n_pc, std::size_t n_sm, bool scaled) {
  if (n_pc == 0 || n_sm == 0) throw ArgumentError("removal_update: zero dataset size");
  if (scaled) return replacement_update(local, global, n_pc, n_sm);
  return local - global;
}

}  // namespace fedforget
