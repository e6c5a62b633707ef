#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dciris/geometry.hpp"
#include "dciris/model.hpp"
#include "dciris/rng.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

inline constexpr std::size_t kNormalizedHeight = 64;
inline constexpr std::size_t kNormalizedWidth = 512;

struct TrainExample {
  Tensor image;  // (1, H, W), values in [0, 1]
  Tensor mask;   // (1, H, W), binary
  DoubleCircle gt;
};

// Epochs are numbered from 0; epochs at index >= lr_drop_epoch run at lr/10.
// lambda scales the gradients of both regression losses; the logged losses
// themselves stay unweighted.
struct TrainConfig {
  std::size_t epochs = 60;
  double lr = 0.001;
  std::size_t lr_drop_epoch = 30;
  double lambda = 1.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t anchor_minibatch = 256;
  double anchor_positive_fraction = 0.5;
  std::size_t rois_per_image = 32;
  double roi_positive_fraction = 0.25;
  std::size_t mask_rois_per_image = 4;
  std::size_t pre_nms_top_n = 200;
  double nms_iou = 0.7;
  double roi_pos_iou = 0.5;
  std::uint64_t seed = 0;
};

// Per-epoch mean losses; components with no contributing step report 0.
struct EpochLoss {
  std::size_t epoch = 0;
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double crn_cls = 0.0;
  double crn_reg = 0.0;
  double mask = 0.0;

  double total() const { return rpn_cls + rpn_reg + crn_cls + crn_reg + mask; }
};

struct AnchorMinibatch {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

// Uniform sample without replacement: at most floor(size * positive_fraction)
// positives, negatives fill the remainder up to size. Ignore-tagged anchors
// are never selected.
AnchorMinibatch sample_anchor_minibatch(const std::vector<AnchorLabel>& labels, std::size_t size,
                                        double positive_fraction, SplitRng& rng);

// Joint single-image-step training of all heads with one optimizer step per
// image. Detection heads see normalized RoI features as constants; only the
// region-proposal losses reach the backbone.
std::vector<EpochLoss> train(IrisRcnn& model, const std::vector<TrainExample>& data,
                             const TrainConfig& cfg,
                             const std::function<void(const EpochLoss&)>& on_epoch = {});

struct SegmentationResult {
  DoubleCircle dc;
  double score = 0.0;      // iris-class probability of the kept candidate
  Tensor normalized_iris;  // (1, kNormalizedHeight, kNormalizedWidth)
  Tensor normalized_mask;  // same shape, binary
};

// Detects the single best double circle, or nothing when every refined
// candidate scores below 0.5.
std::optional<SegmentationResult> segment(IrisRcnn& model, const Tensor& image);

}  // namespace dciris
