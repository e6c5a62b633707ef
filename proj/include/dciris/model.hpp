#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dciris/nnet.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

struct ModelConfig {
  std::size_t backbone_channels = 24;
  std::size_t rpn_channels = 64;
  std::size_t crn_hidden = 128;
  std::size_t mask_channels = 16;
  std::vector<double> anchor_radii = {16.0, 24.0, 32.0, 48.0, 64.0};
  std::vector<double> anchor_ratios = {0.1, 0.2, 0.5};

  std::size_t anchor_types() const { return anchor_radii.size() * anchor_ratios.size(); }

  static ModelConfig toy() { return ModelConfig{}; }

  // full-width layer sizes; far too slow for desk-scale training but kept
  // selectable
  static ModelConfig paper_scale() {
    ModelConfig c;
    c.backbone_channels = 64;
    c.rpn_channels = 512;
    c.crn_hidden = 1024;
    c.mask_channels = 256;
    return c;
  }
};

// Small stack of stride-2 then dilated stride-1 convolutions producing one
// feature map at 1/4 input resolution with a wide receptive field.
struct ToyBackbone {
  static constexpr double kStride = 4.0;
  Conv2d c1, c2, c3, c4, c5, c6;
  Relu r1, r2, r3, r4, r5, r6;

  explicit ToyBackbone(const ModelConfig& cfg);
  void init(SplitRng& rng);
  Tensor forward(const Tensor& image, bool train);
  void backward(const Tensor& grad_features);
  std::vector<LayerParams*> parameters();
};

struct RpnOutput {
  Tensor scores;  // (2 * anchor_types, H, W)
  Tensor deltas;  // (6 * anchor_types, H, W)
};

struct RpnHead {
  Conv2d conv, cls, reg;
  Relu relu;

  RpnHead(const ModelConfig& cfg);
  void init(SplitRng& rng);
  RpnOutput forward(const Tensor& features, bool train);
  Tensor backward(const Tensor& grad_scores, const Tensor& grad_deltas);
  std::vector<LayerParams*> parameters();
};

struct CrnOutput {
  Tensor cls_logits;  // (B, 2)
  Tensor deltas;      // (B, 6)
};

// Classification + refinement head over flattened 7x7 normalized RoIs.
struct CrnHead {
  std::size_t in_features = 0;
  Fc fc1, fc2, cls, reg;
  BatchNormFc bn1, bn2;
  Relu r1, r2;

  CrnHead(const ModelConfig& cfg);
  void init(SplitRng& rng);
  CrnOutput forward(const Tensor& flat_rois, bool train);  // (B, C*49)
  void backward(const Tensor& grad_cls, const Tensor& grad_deltas);
  // single RoI of shape (C, 7, 7) -> scores (2,), transform
  std::pair<Tensor, RegressionTarget> forward_single(const Tensor& roi_feat);
  std::vector<LayerParams*> parameters();
};

// Per-RoI mask decoder: (C, 16, 32) normalized features -> (1, 32, 64) logits.
struct MaskHead {
  Conv2d c1, c2, c3, c4, out;
  TransposedConv2d up;
  Relu r1, r2, r3, r4;

  MaskHead(const ModelConfig& cfg);
  void init(SplitRng& rng);
  Tensor forward(const Tensor& roi_feat, bool train);
  void backward(const Tensor& grad_logits);
  std::vector<LayerParams*> parameters();
};

struct IrisRcnn {
  ModelConfig config;
  ToyBackbone backbone;
  RpnHead rpn;
  CrnHead crn;
  MaskHead mask;

  IrisRcnn(const ModelConfig& cfg, std::uint64_t init_seed);

  std::vector<LayerParams*> parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  void save(const std::string& path) const;
  static IrisRcnn load(const std::string& path);
};

}  // namespace dciris
