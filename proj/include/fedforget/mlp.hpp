#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedforget/dataset.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

enum class Activation { kRelu, kTanh };

struct MlpArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;
  Activation activation = Activation::kRelu;

  /// Throws ArgumentError unless there is >= 1 hidden layer, every width is
  /// positive and num_classes >= 2.
  void validate() const;
  /// Weight (in x out) then bias (out) for every layer, input to output.
  std::vector<Shape> param_shapes() const;
  std::size_t param_count() const;

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

struct GradResult {
  double loss = 0.0;
  ParamVector grad;
};

/// Fan-in uniform init (He for ReLU, LeCun for tanh); biases are zero.
ParamVector init_params(const MlpArchitecture& arch, std::uint64_t seed);

/// Mean softmax cross-entropy over `batch` and its exact gradient.
GradResult forward_loss_grad(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> batch);

/// Mean cross-entropy only.
double mean_loss(const ParamVector& params, const MlpArchitecture& arch,
                 std::span<const LabeledExample> batch);

/// Output logits, rows x num_classes, row-major.
std::vector<double> logits(const ParamVector& params, const MlpArchitecture& arch,
                           std::span<const LabeledExample> batch);

/// params - lr * grad. Plain SGD.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr);

int predict(const ParamVector& params, const MlpArchitecture& arch,
            const LabeledExample& example);
std::vector<int> predict_all(const ParamVector& params, const MlpArchitecture& arch,
                             std::span<const LabeledExample> batch);
/// Fraction of correctly classified examples; throws on an empty slice.
double accuracy(const ParamVector& params, const MlpArchitecture& arch,
                std::span<const LabeledExample> batch);

}  // namespace fedforget
