#include "dciris/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>

#include "dciris/nnet.hpp"
#include "dciris/rubbersheet.hpp"

namespace dciris {

namespace {

constexpr double kDetectionScoreThreshold = 0.5;
constexpr std::size_t kCrnRoiSize = 7;
constexpr std::size_t kMaskRoiHeight = 16;
constexpr std::size_t kMaskRoiWidth = 32;
constexpr std::size_t kMaskLogitsHeight = 32;
constexpr std::size_t kMaskLogitsWidth = 64;
constexpr std::size_t kSegmentPreNmsTopN = 200;
constexpr double kSegmentNmsIou = 0.7;

struct AnchorField {
  std::size_t feat_h = 0;
  std::size_t feat_w = 0;
  std::size_t types = 0;
  std::vector<DoubleCircle> anchors;
};

AnchorField make_anchor_field(std::size_t feat_h, std::size_t feat_w, const ModelConfig& cfg) {
  AnchorField f;
  f.feat_h = feat_h;
  f.feat_w = feat_w;
  f.types = cfg.anchor_types();
  f.anchors =
      anchor_grid(feat_w, feat_h, ToyBackbone::kStride, cfg.anchor_radii, cfg.anchor_ratios);
  return f;
}

std::pair<std::size_t, std::size_t> feature_dims(const Tensor& image) {
  const auto half = [](std::size_t n) { return (n - 1) / 2 + 1; };
  return {half(half(image.dim(1))), half(half(image.dim(2)))};
}

struct AnchorLoc {
  std::size_t type = 0;
  std::size_t y = 0;
  std::size_t x = 0;
};

AnchorLoc locate(std::size_t k, const AnchorField& f) {
  const std::size_t loc = k / f.types;
  return {k % f.types, loc / f.feat_w, loc % f.feat_w};
}

RegressionTarget read_deltas(const Tensor& deltas, const AnchorLoc& loc) {
  RegressionTarget t;
  t.tx_iris = deltas.at(6 * loc.type + 0, loc.y, loc.x);
  t.ty_iris = deltas.at(6 * loc.type + 1, loc.y, loc.x);
  t.tx_pupil = deltas.at(6 * loc.type + 2, loc.y, loc.x);
  t.ty_pupil = deltas.at(6 * loc.type + 3, loc.y, loc.x);
  t.tr_iris = deltas.at(6 * loc.type + 4, loc.y, loc.x);
  t.tr_pupil = deltas.at(6 * loc.type + 5, loc.y, loc.x);
  return t;
}

bool finite_target(const RegressionTarget& t) {
  return std::isfinite(t.tx_iris) && std::isfinite(t.ty_iris) && std::isfinite(t.tx_pupil) &&
         std::isfinite(t.ty_pupil) && std::isfinite(t.tr_iris) && std::isfinite(t.tr_pupil);
}

double foreground_probability(double bg_logit, double fg_logit) {
  return 1.0 / (1.0 + std::exp(bg_logit - fg_logit));
}

// Decode every anchor, drop invalid double circles, keep the top_n highest
// scoring; output sorted by descending score.
std::vector<ScoredDoubleCircle> decode_proposals(const Tensor& scores, const Tensor& deltas,
                                                 const AnchorField& field, std::size_t top_n) {
  std::vector<ScoredDoubleCircle> out;
  for (std::size_t k = 0; k < field.anchors.size(); ++k) {
    const AnchorLoc loc = locate(k, field);
    const double p =
        foreground_probability(scores.at(2 * loc.type, loc.y, loc.x),
                               scores.at(2 * loc.type + 1, loc.y, loc.x));
    if (!std::isfinite(p)) continue;
    const RegressionTarget t = read_deltas(deltas, loc);
    if (!finite_target(t)) continue;
    const DoubleCircle dc = decode(field.anchors[k], t);
    if (!is_valid_double_circle(dc)) continue;
    out.push_back({dc, p});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDoubleCircle& a, const ScoredDoubleCircle& b) {
                     return a.score > b.score;
                   });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

std::string list_to_string(const std::vector<double>& v) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "}";
  return os.str();
}

void validate_config(const TrainConfig& cfg) {
  require(cfg.epochs >= 1, "train: epochs must be at least 1");
  require(cfg.lr > 0.0, "train: learning rate must be positive");
  require(cfg.lambda >= 0.0, "train: lambda must be non-negative");
  require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "train: momentum must lie in [0, 1)");
  require(cfg.weight_decay >= 0.0, "train: weight decay must be non-negative");
  require(cfg.anchor_minibatch >= 1, "train: anchor minibatch must be at least 1");
  require(cfg.anchor_positive_fraction >= 0.0 && cfg.anchor_positive_fraction <= 1.0,
          "train: anchor positive fraction must lie in [0, 1]");
  require(cfg.rois_per_image >= 1, "train: rois per image must be at least 1");
  require(cfg.roi_positive_fraction >= 0.0 && cfg.roi_positive_fraction <= 1.0,
          "train: roi positive fraction must lie in [0, 1]");
  require(cfg.pre_nms_top_n >= 1, "train: pre-nms proposal count must be at least 1");
  require(cfg.nms_iou > 0.0 && cfg.nms_iou < 1.0, "train: nms iou must lie in (0, 1)");
  require(cfg.roi_pos_iou > 0.0 && cfg.roi_pos_iou <= 1.0,
          "train: roi positive iou must lie in (0, 1]");
}

void validate_example(const TrainExample& ex, std::size_t i) {
  const std::string tag = "train: example " + std::to_string(i);
  require(ex.image.rank() == 3 && ex.image.dim(0) == 1, tag + ": image must be (1, H, W)");
  require(ex.mask.same_shape(ex.image), tag + ": mask shape must match the image");
  require(ex.mask.is_binary(), tag + ": mask must be binary");
  require(is_valid_double_circle(ex.gt), tag + ": ground truth is not a valid double circle");
}

struct StepLosses {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double crn_cls = 0.0;
  double crn_reg = 0.0;
  double mask = 0.0;
  bool has_rpn_reg = false;
  bool has_crn = false;
  bool has_crn_reg = false;
  bool has_mask = false;
};

StepLosses train_step(IrisRcnn& model, const TrainExample& ex, const TrainConfig& cfg,
                      SplitRng& rng) {
  StepLosses out;

  Tensor features = model.backbone.forward(ex.image, true);
  RpnOutput rpn = model.rpn.forward(features, true);
  const AnchorField field = make_anchor_field(features.dim(1), features.dim(2), model.config);
  const std::vector<AnchorLabel> labels = assign_labels(field.anchors, {ex.gt});

  const AnchorMinibatch mb =
      sample_anchor_minibatch(labels, cfg.anchor_minibatch, cfg.anchor_positive_fraction, rng);
  const std::size_t m = mb.positives.size() + mb.negatives.size();

  Tensor grad_scores(rpn.scores.shape());
  Tensor grad_deltas(rpn.deltas.shape());

  if (m > 0) {
    const double inv_m = 1.0 / static_cast<double>(m);
    Tensor logits({2});
    const auto add_cls = [&](std::size_t k, std::size_t want) {
      const AnchorLoc loc = locate(k, field);
      logits[0] = rpn.scores.at(2 * loc.type, loc.y, loc.x);
      logits[1] = rpn.scores.at(2 * loc.type + 1, loc.y, loc.x);
      const ScalarLoss l = softmax_ce_loss(logits, want);
      out.rpn_cls += l.loss * inv_m;
      grad_scores.at(2 * loc.type, loc.y, loc.x) += l.grad[0] * inv_m;
      grad_scores.at(2 * loc.type + 1, loc.y, loc.x) += l.grad[1] * inv_m;
    };
    for (std::size_t k : mb.positives) add_cls(k, 1);
    for (std::size_t k : mb.negatives) add_cls(k, 0);
  }

  if (!mb.positives.empty()) {
    out.has_rpn_reg = true;
    const double inv_p = 1.0 / static_cast<double>(mb.positives.size());
    for (std::size_t k : mb.positives) {
      const AnchorLoc loc = locate(k, field);
      const RegressionTarget pred = read_deltas(rpn.deltas, loc);
      const RegressionTarget target = encode(field.anchors[k], ex.gt);
      const SmoothL1Result r = smooth_l1(pred, target);
      out.rpn_reg += r.loss * inv_p;
      for (std::size_t c = 0; c < 6; ++c)
        grad_deltas.at(6 * loc.type + c, loc.y, loc.x) += r.grad[c] * cfg.lambda * inv_p;
    }
  }

  const Tensor grad_features = model.rpn.backward(grad_scores, grad_deltas);
  model.backbone.backward(grad_features);

  std::vector<ScoredDoubleCircle> proposals =
      decode_proposals(rpn.scores, rpn.deltas, field, cfg.pre_nms_top_n);
  if (proposals.empty()) return out;
  proposals = dc_nms(proposals, cfg.nms_iou, proposals.size());

  std::vector<std::size_t> pos_pool, neg_pool;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const bool positive = double_circle_iou(proposals[i].dc, ex.gt) >= cfg.roi_pos_iou;
    (positive ? pos_pool : neg_pool).push_back(i);
  }
  rng.shuffle(pos_pool);
  rng.shuffle(neg_pool);
  const std::size_t max_pos = static_cast<std::size_t>(
      std::floor(static_cast<double>(cfg.rois_per_image) * cfg.roi_positive_fraction));
  const std::size_t n_pos = std::min(pos_pool.size(), max_pos);
  const std::size_t n_neg = std::min(neg_pool.size(), cfg.rois_per_image - n_pos);
  const std::size_t n_rois = n_pos + n_neg;
  if (n_rois == 0) return out;
  out.has_crn = true;

  std::vector<DoubleCircle> roi_dcs;
  roi_dcs.reserve(n_rois);
  for (std::size_t i = 0; i < n_pos; ++i) roi_dcs.push_back(proposals[pos_pool[i]].dc);
  for (std::size_t i = 0; i < n_neg; ++i) roi_dcs.push_back(proposals[neg_pool[i]].dc);

  const std::size_t c_feat = features.dim(0);
  const std::size_t roi_len = c_feat * kCrnRoiSize * kCrnRoiSize;
  Tensor flat({n_rois, roi_len});
  for (std::size_t b = 0; b < n_rois; ++b) {
    const Tensor roi =
        roi_normalize(features, roi_dcs[b], ToyBackbone::kStride, kCrnRoiSize, kCrnRoiSize);
    std::copy(roi.data(), roi.data() + roi.numel(), flat.data() + b * roi_len);
  }

  const CrnOutput co = model.crn.forward(flat, true);
  Tensor grad_cls({n_rois, 2});
  Tensor grad_roi_deltas({n_rois, 6});
  {
    const double inv_b = 1.0 / static_cast<double>(n_rois);
    Tensor logits({2});
    for (std::size_t b = 0; b < n_rois; ++b) {
      logits[0] = co.cls_logits.at(b, 0);
      logits[1] = co.cls_logits.at(b, 1);
      const ScalarLoss l = softmax_ce_loss(logits, b < n_pos ? 1 : 0);
      out.crn_cls += l.loss * inv_b;
      grad_cls.at(b, 0) = l.grad[0] * inv_b;
      grad_cls.at(b, 1) = l.grad[1] * inv_b;
    }
  }
  if (n_pos > 0) {
    out.has_crn_reg = true;
    const double inv_p = 1.0 / static_cast<double>(n_pos);
    for (std::size_t b = 0; b < n_pos; ++b) {
      RegressionTarget pred;
      pred.tx_iris = co.deltas.at(b, 0);
      pred.ty_iris = co.deltas.at(b, 1);
      pred.tx_pupil = co.deltas.at(b, 2);
      pred.ty_pupil = co.deltas.at(b, 3);
      pred.tr_iris = co.deltas.at(b, 4);
      pred.tr_pupil = co.deltas.at(b, 5);
      const RegressionTarget target = encode(roi_dcs[b], ex.gt);
      const SmoothL1Result r = smooth_l1(pred, target);
      out.crn_reg += r.loss * inv_p;
      for (std::size_t c = 0; c < 6; ++c)
        grad_roi_deltas.at(b, c) = r.grad[c] * cfg.lambda * inv_p;
    }
  }
  model.crn.backward(grad_cls, grad_roi_deltas);

  const std::size_t n_mask = std::min(n_pos, cfg.mask_rois_per_image);
  if (n_mask > 0) {
    out.has_mask = true;
    const double inv_k = 1.0 / static_cast<double>(n_mask);
    for (std::size_t b = 0; b < n_mask; ++b) {
      const Tensor roi =
          roi_normalize(features, roi_dcs[b], ToyBackbone::kStride, kMaskRoiHeight, kMaskRoiWidth);
      const Tensor logits = model.mask.forward(roi, true);
      const NormalizedMap target =
          unwrap_mask(ex.mask, roi_dcs[b], kMaskLogitsHeight, kMaskLogitsWidth);
      ScalarLoss l = bce_loss(logits, target.data);
      out.mask += l.loss * inv_k;
      for (std::size_t g = 0; g < l.grad.numel(); ++g) l.grad[g] *= inv_k;
      model.mask.backward(l.grad);
    }
  }
  return out;
}

}  // namespace

AnchorMinibatch sample_anchor_minibatch(const std::vector<AnchorLabel>& labels, std::size_t size,
                                        double positive_fraction, SplitRng& rng) {
  require(size >= 1, "sample_anchor_minibatch: size must be at least 1");
  require(positive_fraction >= 0.0 && positive_fraction <= 1.0,
          "sample_anchor_minibatch: positive fraction must lie in [0, 1]");
  std::vector<std::size_t> pos, neg;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].tag == AnchorTag::kPositive)
      pos.push_back(k);
    else if (labels[k].tag == AnchorTag::kNegative)
      neg.push_back(k);
  }
  rng.shuffle(pos);
  rng.shuffle(neg);
  const std::size_t max_pos =
      static_cast<std::size_t>(std::floor(static_cast<double>(size) * positive_fraction));
  AnchorMinibatch mb;
  const std::size_t n_pos = std::min(pos.size(), max_pos);
  const std::size_t n_neg = std::min(neg.size(), size - n_pos);
  mb.positives.assign(pos.begin(), pos.begin() + n_pos);
  mb.negatives.assign(neg.begin(), neg.begin() + n_neg);
  return mb;
}

std::vector<EpochLoss> train(IrisRcnn& model, const std::vector<TrainExample>& data,
                             const TrainConfig& cfg,
                             const std::function<void(const EpochLoss&)>& on_epoch) {
  validate_config(cfg);
  require(!data.empty(), "train: dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) validate_example(data[i], i);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [fh, fw] = feature_dims(data[i].image);
    const AnchorField field = make_anchor_field(fh, fw, model.config);
    const std::vector<AnchorLabel> labels = assign_labels(field.anchors, {data[i].gt});
    const bool any_pos =
        std::any_of(labels.begin(), labels.end(),
                    [](const AnchorLabel& l) { return l.tag == AnchorTag::kPositive; });
    require(any_pos, "train: example " + std::to_string(i) +
                         " has no positive anchors; anchor radii " +
                         list_to_string(model.config.anchor_radii) + " with ratios " +
                         list_to_string(model.config.anchor_ratios) +
                         " do not cover its ground truth");
  }

  const std::vector<LayerParams*> params = model.parameters();
  SplitRng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLoss> log;
  log.reserve(cfg.epochs);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = e >= cfg.lr_drop_epoch ? cfg.lr * 0.1 : cfg.lr;
    rng.shuffle(order);

    EpochLoss sums;
    sums.epoch = e;
    std::size_t n_cls = 0, n_rpn_reg = 0, n_crn = 0, n_crn_reg = 0, n_mask = 0;
    for (std::size_t idx : order) {
      const StepLosses sl = train_step(model, data[idx], cfg, rng);
      sgd_step(params, lr, cfg.momentum, cfg.weight_decay);
      sums.rpn_cls += sl.rpn_cls;
      ++n_cls;
      if (sl.has_rpn_reg) {
        sums.rpn_reg += sl.rpn_reg;
        ++n_rpn_reg;
      }
      if (sl.has_crn) {
        sums.crn_cls += sl.crn_cls;
        ++n_crn;
      }
      if (sl.has_crn_reg) {
        sums.crn_reg += sl.crn_reg;
        ++n_crn_reg;
      }
      if (sl.has_mask) {
        sums.mask += sl.mask;
        ++n_mask;
      }
    }
    EpochLoss mean = sums;
    mean.rpn_cls /= static_cast<double>(std::max<std::size_t>(1, n_cls));
    mean.rpn_reg /= static_cast<double>(std::max<std::size_t>(1, n_rpn_reg));
    mean.crn_cls /= static_cast<double>(std::max<std::size_t>(1, n_crn));
    mean.crn_reg /= static_cast<double>(std::max<std::size_t>(1, n_crn_reg));
    mean.mask /= static_cast<double>(std::max<std::size_t>(1, n_mask));
    log.push_back(mean);
    if (on_epoch) on_epoch(mean);
  }
  return log;
}

std::optional<SegmentationResult> segment(IrisRcnn& model, const Tensor& image) {
  require(image.rank() == 3 && image.dim(0) == 1, "segment: image must be (1, H, W)");
  for (std::size_t i = 0; i < image.numel(); ++i)
    require(image[i] >= 0.0 && image[i] <= 1.0, "segment: image values must lie in [0, 1]");

  Tensor features = model.backbone.forward(image, false);
  const RpnOutput rpn = model.rpn.forward(features, false);
  const AnchorField field = make_anchor_field(features.dim(1), features.dim(2), model.config);

  std::vector<ScoredDoubleCircle> proposals =
      decode_proposals(rpn.scores, rpn.deltas, field, kSegmentPreNmsTopN);
  if (proposals.empty()) return std::nullopt;
  proposals = dc_nms(proposals, kSegmentNmsIou, proposals.size());

  bool found = false;
  double best_score = -1.0;
  DoubleCircle best_dc;
  for (const ScoredDoubleCircle& p : proposals) {
    const Tensor roi =
        roi_normalize(features, p.dc, ToyBackbone::kStride, kCrnRoiSize, kCrnRoiSize);
    const auto [scores2, deltas] = model.crn.forward_single(roi);
    if (!finite_target(deltas)) continue;
    const double fg = foreground_probability(scores2[0], scores2[1]);
    if (!std::isfinite(fg)) continue;
    const DoubleCircle refined = decode(p.dc, deltas);
    if (!is_valid_double_circle(refined)) continue;
    if (fg > best_score) {
      best_score = fg;
      best_dc = refined;
      found = true;
    }
  }
  if (!found || best_score < kDetectionScoreThreshold) return std::nullopt;

  SegmentationResult res;
  res.dc = best_dc;
  res.score = best_score;

  const Tensor roi =
      roi_normalize(features, best_dc, ToyBackbone::kStride, kMaskRoiHeight, kMaskRoiWidth);
  const Tensor logits = model.mask.forward(roi, false);
  res.normalized_mask = Tensor({1, kNormalizedHeight, kNormalizedWidth});
  const std::size_t ys = kNormalizedHeight / kMaskLogitsHeight;
  const std::size_t xs = kNormalizedWidth / kMaskLogitsWidth;
  for (std::size_t y = 0; y < kNormalizedHeight; ++y)
    for (std::size_t x = 0; x < kNormalizedWidth; ++x)
      res.normalized_mask.at(0, y, x) = logits.at(0, y / ys, x / xs) >= 0.0 ? 1.0 : 0.0;

  res.normalized_iris = unwrap(image, best_dc, kNormalizedHeight, kNormalizedWidth).data;
  return res;
}

}  // namespace dciris
