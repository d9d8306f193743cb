#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim {

enum class Padding { kValid, kSame };

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  bool has_bias = true;
  bool operator==(const DenseLayer&) const = default;
};

struct Conv2dLayer {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  Padding padding = Padding::kValid;
  bool operator==(const Conv2dLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};

using Layer = std::variant<DenseLayer, Conv2dLayer, ReluLayer>;

/// Channel-major (c, h, w) activation shape; dense layers use (1, 1, dim).
struct TensorShape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int flat() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
};

/// Architecture description. total_params is derived during validation.
struct ModelSpec {
  TensorShape input;
  std::vector<Layer> layers;
  int num_classes = 0;
  std::size_t total_params = 0;

  bool operator==(const ModelSpec&) const = default;

  /// Fully connected net: input_dim -> hidden... -> num_classes, ReLU between.
  static ModelSpec mlp(int input_dim, const std::vector<int>& hidden, int num_classes,
                       bool bias = true);
};

/// Validates layer compatibility and fills in total_params.
/// Throws ConfigError naming the offending layer.
ModelSpec make_model_spec(TensorShape input, std::vector<Layer> layers, int num_classes);

struct LossAcc {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Offset of one layer's parameters inside the flat vector.
struct ParamSlice {
  int layer = 0;
  std::size_t offset = 0;
  std::size_t count = 0;
};

/// Stateless network over flat parameter vectors. All methods are pure and
/// deterministic; safe to call concurrently.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  std::size_t num_params() const { return spec_.total_params; }

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
  ParamVector init_params(std::uint64_t seed) const;

  /// Mean softmax cross-entropy and argmax accuracy on a batch.
  LossAcc forward_loss(const ParamVector& params, const Batch& batch) const;

  /// Gradient of forward_loss's loss wrt params.
  ParamVector grad(const ParamVector& params, const Batch& batch) const;

  /// Argmax class per sample (ties to the lower class index).
  std::vector<int> predict(const ParamVector& params, const Batch& batch) const;

  /// Hessian-vector product via central differences of grad.
  ParamVector hvp(const ParamVector& params, const Batch& batch, const ParamVector& v) const;

  /// Parameter layout, one slice per layer (activation layers own zero).
  const std::vector<ParamSlice>& param_slices() const { return slices_; }

 private:
  struct LayerInfo {
    TensorShape in;
    TensorShape out;
    std::size_t param_offset = 0;
    std::size_t param_count = 0;
  };

  void check_params(const ParamVector& params) const;
  void check_batch(const Batch& batch) const;
  // Runs the net, returning per-layer activations; acts[0] is the input.
  std::vector<std::vector<double>> forward_acts(const ParamVector& params,
                                                const Batch& batch) const;

  ModelSpec spec_;
  std::vector<LayerInfo> info_;
  std::vector<ParamSlice> slices_;
};

/// out[i] = params[i] - lr * grad[i].
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr);

using GradFn = std::function<ParamVector(const ParamVector&)>;

/// (grad(p + eps v) - grad(p - eps v)) / (2 eps), eps = 1e-4 * max(1, |p|_inf).
/// Exact for quadratics; v = 0 returns the zero vector.
ParamVector hvp_central_diff(const GradFn& grad_fn, const ParamVector& params,
                             const ParamVector& v);

}  // namespace fedsim
