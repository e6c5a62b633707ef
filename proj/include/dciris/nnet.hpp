#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dciris/geometry.hpp"
#include "dciris/rng.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

// One learnable parameter pair with its gradient and momentum state.
struct LayerParams {
  std::string name;
  Tensor weights;
  Tensor bias;
  Tensor weight_grad;
  Tensor bias_grad;
  Tensor weight_momentum;
  Tensor bias_momentum;

  void allocate(std::vector<std::size_t> wshape, std::vector<std::size_t> bshape);
  void zero_grad();
};

// weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); bias stays 0
void glorot_init(LayerParams& p, std::size_t fan_in, std::size_t fan_out, SplitRng& rng);

// 2-d convolution over (C, H, W) tensors, square kernel, zero padding.
struct Conv2d {
  LayerParams params;  // weights (Cout, Cin, k, k), bias (Cout)
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  Tensor input_cache;

  Conv2d() = default;
  Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
         std::size_t padding, std::size_t dilation = 1);
  void init(SplitRng& rng);
  Tensor forward(const Tensor& x, bool cache);
  // accumulates parameter gradients, returns gradient w.r.t. the cached input
  Tensor backward(const Tensor& grad_out);
};

// Transposed convolution, kernel == stride (non-overlapping upsample).
struct TransposedConv2d {
  LayerParams params;  // weights (Cin, Cout, k, k), bias (Cout)
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 2;
  Tensor input_cache;

  TransposedConv2d() = default;
  TransposedConv2d(std::string name, std::size_t in, std::size_t out, std::size_t k);
  void init(SplitRng& rng);
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& grad_out);
};

// Fully connected layer on batched rows (B, in) -> (B, out).
struct Fc {
  LayerParams params;  // weights (out, in), bias (out)
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Tensor input_cache;

  Fc() = default;
  Fc(std::string name, std::size_t in, std::size_t out);
  void init(SplitRng& rng);
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& grad_out);
};

// Batch normalization over the batch axis of (B, N) activations. Training
// mode normalizes with batch statistics and updates the running estimates;
// inference mode applies the running estimates.
struct BatchNormFc {
  LayerParams params;  // weights = gamma (N), bias = beta (N)
  Tensor running_mean;
  Tensor running_var;
  double eps = 1e-5;
  double momentum = 0.1;
  std::size_t features = 0;

  Tensor x_hat_cache;
  std::vector<double> inv_std_cache;
  bool trained_forward = false;

  BatchNormFc() = default;
  BatchNormFc(std::string name, std::size_t n);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out);
};

struct Relu {
  Tensor input_cache;
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& grad_out) const;
};

Tensor sigmoid(const Tensor& x);

struct ScalarLoss {
  double loss = 0.0;
  Tensor grad;
};

// Cross entropy of softmax(logits) against an integer label; grad is w.r.t.
// the logits.
ScalarLoss softmax_ce_loss(const Tensor& logits, std::size_t label);

struct SmoothL1Result {
  double loss = 0.0;
  std::array<double, 6> grad{};
};

// Elementwise smooth L1 over the six transform components, transition at 1.
SmoothL1Result smooth_l1(const RegressionTarget& pred, const RegressionTarget& target);

// Mean binary cross entropy of sigmoid(logits) against a binary target of
// the same shape; numerically stable in the logits.
ScalarLoss bce_loss(const Tensor& logits, const Tensor& target);

double multitask_loss(double cls_loss, double reg_loss, double lambda);

// v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v; gradients
// are zeroed afterward.
void sgd_step(const std::vector<LayerParams*>& params, double lr, double momentum = 0.9,
              double weight_decay = 1e-4);

// Binary weight container: magic "DCSW", version, then named f64 tensors.
std::string serialize_weights(const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> parse_weights(const std::string& bytes);
void save_weights(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_weights(const std::string& path);

}  // namespace dciris
