#include "fedforget/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedforget/common.hpp"
#include "fedforget/kernels.hpp"

namespace fedforget {

namespace {

struct Layer {
  kernels::Dims dims;
  std::span<const double> w;
  std::span<const double> b;
  std::size_t w_offset;
  std::size_t b_offset;
};

std::vector<Layer> layers_of(const ParamVector& params, const MlpArchitecture& arch,
                             std::size_t rows) {
  std::vector<Layer> out;
  std::size_t in = arch.input_dim;
  std::size_t off = 0;
  auto vals = params.values();
  auto add = [&](std::size_t width) {
    Layer l;
    l.dims = {rows, in, width};
    l.w_offset = off;
    l.w = vals.subspan(off, in * width);
    off += in * width;
    l.b_offset = off;
    l.b = vals.subspan(off, width);
    off += width;
    out.push_back(l);
    in = width;
  };
  for (std::size_t h : arch.hidden_dims) add(h);
  add(arch.num_classes);
  return out;
}

void check_inputs(const ParamVector& params, const MlpArchitecture& arch,
                  std::span<const LabeledExample> batch, bool need_labels) {
  if (params.shapes() != arch.param_shapes()) {
    throw ShapeError("parameters do not match the architecture");
  }
  if (batch.empty()) throw ArgumentError("empty batch");
  for (const auto& ex : batch) {
    if (ex.features.size() != arch.input_dim) {
      throw ShapeError("feature dimension " + std::to_string(ex.features.size()) +
                       " does not match input_dim " + std::to_string(arch.input_dim));
    }
    if (need_labels &&
        (ex.label < 0 || static_cast<std::size_t>(ex.label) >= arch.num_classes)) {
      throw ArgumentError("label out of range: " + std::to_string(ex.label));
    }
  }
}

void forward_layer(kernels::Dims d, std::span<const double> x, const Layer& l,
                   std::span<double> z) {
  if (d.rows >= kernels::kParallelRowThreshold) {
    kernels::parallel::dense_forward(d, x, l.w, l.b, z);
  } else {
    kernels::serial::dense_forward(d, x, l.w, l.b, z);
  }
}

void activate(Activation act, std::span<double> z) {
  if (act == Activation::kRelu) {
    for (double& v : z) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : z) v = std::tanh(v);
  }
}

// acts[0] is the input matrix, acts[l + 1] the output of layer l (the final
// entry holds the logits).
std::vector<std::vector<double>> forward(const ParamVector& params,
                                         const MlpArchitecture& arch,
                                         std::span<const LabeledExample> batch) {
  const std::size_t rows = batch.size();
  const auto layers = layers_of(params, arch, rows);
  std::vector<std::vector<double>> acts;
  acts.reserve(layers.size() + 1);
  std::vector<double> x(rows * arch.input_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(batch[r].features.begin(), batch[r].features.end(),
              x.begin() + static_cast<std::ptrdiff_t>(r * arch.input_dim));
  }
  acts.push_back(std::move(x));
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    std::vector<double> z(rows * l.dims.out);
    forward_layer(l.dims, acts.back(), l, z);
    if (li + 1 < layers.size()) activate(arch.activation, z);
    acts.push_back(std::move(z));
  }
  for (double v : acts.back()) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
  }
  return acts;
}

// Mean cross-entropy; writes (softmax - onehot) / rows into dz when non-null.
double cross_entropy(std::span<const double> z, std::size_t rows, std::size_t classes,
                     std::span<const LabeledExample> batch, std::vector<double>* dz) {
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(rows);
  if (dz) dz->assign(rows * classes, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * classes;
    const double mx = *std::max_element(zr, zr + classes);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) sum += std::exp(zr[j] - mx);
    const double lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(batch[r].label);
    total += lse - zr[y];
    if (dz) {
      double* g = dz->data() + r * classes;
      for (std::size_t j = 0; j < classes; ++j) g[j] = std::exp(zr[j] - lse) * inv;
      g[y] -= inv;
    }
  }
  const double loss = total * inv;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

}  // namespace

void MlpArchitecture::validate() const {
  if (input_dim == 0) throw ArgumentError("input_dim must be positive");
  if (hidden_dims.empty()) throw ArgumentError("at least one hidden layer required");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ArgumentError("hidden widths must be positive");
  }
  if (num_classes < 2) throw ArgumentError("num_classes must be >= 2");
}

std::vector<Shape> MlpArchitecture::param_shapes() const {
  std::vector<Shape> shapes;
  std::size_t in = input_dim;
  for (std::size_t h : hidden_dims) {
    shapes.push_back({in, h});
    shapes.push_back({h});
    in = h;
  }
  shapes.push_back({in, num_classes});
  shapes.push_back({num_classes});
  return shapes;
}

std::size_t MlpArchitecture::param_count() const {
  return ParamVector::count_for(param_shapes());
}

ParamVector init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  ParamVector p(arch.param_shapes());
  Rng rng = make_rng(seed, Stream::kInit);
  const double gain = arch.activation == Activation::kRelu ? 6.0 : 3.0;
  for (std::size_t t = 0; t < p.shapes().size(); t += 2) {
    const auto& s = p.shapes()[t];
    const double limit = std::sqrt(gain / static_cast<double>(s[0]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t off = p.offset_of(t);
    for (std::size_t i = 0; i < s[0] * s[1]; ++i) p[off + i] = dist(rng);
  }
  return p;
}

GradResult forward_loss_grad(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> batch) {
  check_inputs(params, arch, batch, true);
  const std::size_t rows = batch.size();
  const auto layers = layers_of(params, arch, rows);
  const auto acts = forward(params, arch, batch);

  GradResult res;
  std::vector<double> dz;
  res.loss = cross_entropy(acts.back(), rows, arch.num_classes, batch, &dz);
  res.grad = ParamVector(arch.param_shapes());
  auto g = res.grad.values();

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    const auto& a_in = acts[li];
    auto dw = g.subspan(l.w_offset, l.dims.in * l.dims.out);
    auto db = g.subspan(l.b_offset, l.dims.out);
    const bool par = rows >= kernels::kParallelRowThreshold;
    if (par) {
      kernels::parallel::dense_grad_weights(l.dims, a_in, dz, dw, db);
    } else {
      kernels::serial::dense_grad_weights(l.dims, a_in, dz, dw, db);
    }
    if (li == 0) break;
    std::vector<double> da(rows * l.dims.in);
    if (par) {
      kernels::parallel::dense_grad_input(l.dims, dz, l.w, da);
    } else {
      kernels::serial::dense_grad_input(l.dims, dz, l.w, da);
    }
    // Back through the activation of the previous hidden layer.
    if (arch.activation == Activation::kRelu) {
      for (std::size_t i = 0; i < da.size(); ++i) {
        if (a_in[i] <= 0.0) da[i] = 0.0;
      }
    } else {
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 1.0 - a_in[i] * a_in[i];
    }
    dz = std::move(da);
  }
  res.grad.require_finite("forward_loss_grad");
  return res;
}

double mean_loss(const ParamVector& params, const MlpArchitecture& arch,
                 std::span<const LabeledExample> batch) {
  check_inputs(params, arch, batch, true);
  const auto acts = forward(params, arch, batch);
  return cross_entropy(acts.back(), batch.size(), arch.num_classes, batch, nullptr);
}

std::vector<double> logits(const ParamVector& params, const MlpArchitecture& arch,
                           std::span<const LabeledExample> batch) {
  check_inputs(params, arch, batch, false);
  auto acts = forward(params, arch, batch);
  return std::move(acts.back());
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ArgumentError("learning rate must be finite and non-negative");
  }
  ParamVector out = params;
  out.axpy(-lr, grad);
  return out;
}

std::vector<int> predict_all(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> batch) {
  const auto z = logits(params, arch, batch);
  std::vector<int> out(batch.size());
  if (batch.size() >= kernels::kParallelRowThreshold) {
    kernels::parallel::argmax_rows(batch.size(), arch.num_classes, z, out);
  } else {
    kernels::serial::argmax_rows(batch.size(), arch.num_classes, z, out);
  }
  return out;
}

int predict(const ParamVector& params, const MlpArchitecture& arch,
            const LabeledExample& example) {
  return predict_all(params, arch, std::span(&example, 1)).front();
}

double accuracy(const ParamVector& params, const MlpArchitecture& arch,
                std::span<const LabeledExample> batch) {
  if (batch.empty()) throw ArgumentError("accuracy of an empty slice");
  const auto pred = predict_all(params, arch, batch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (pred[i] == batch[i].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

}  // namespace fedforget
