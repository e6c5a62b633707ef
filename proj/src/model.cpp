#include "dciris/model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace dciris {

// ----------------------------------------------------------- ToyBackbone

ToyBackbone::ToyBackbone(const ModelConfig& cfg)
    : c1("backbone.c1", 1, 12, 3, 2, 1),
      c2("backbone.c2", 12, cfg.backbone_channels, 3, 2, 1),
      c3("backbone.c3", cfg.backbone_channels, cfg.backbone_channels, 3, 1, 1, 1),
      c4("backbone.c4", cfg.backbone_channels, cfg.backbone_channels, 3, 1, 2, 2),
      c5("backbone.c5", cfg.backbone_channels, cfg.backbone_channels, 3, 1, 4, 4),
      c6("backbone.c6", cfg.backbone_channels, cfg.backbone_channels, 3, 1, 8, 8) {}

void ToyBackbone::init(SplitRng& rng) {
  c1.init(rng);
  c2.init(rng);
  c3.init(rng);
  c4.init(rng);
  c5.init(rng);
  c6.init(rng);
}

Tensor ToyBackbone::forward(const Tensor& image, bool train) {
  require(image.rank() == 3 && image.dim(0) == 1, "backbone: image must have shape (1, H, W)");
  Tensor t = r1.forward(c1.forward(image, train), train);
  t = r2.forward(c2.forward(t, train), train);
  t = r3.forward(c3.forward(t, train), train);
  t = r4.forward(c4.forward(t, train), train);
  t = r5.forward(c5.forward(t, train), train);
  return r6.forward(c6.forward(t, train), train);
}

void ToyBackbone::backward(const Tensor& grad_features) {
  Tensor g = c6.backward(r6.backward(grad_features));
  g = c5.backward(r5.backward(g));
  g = c4.backward(r4.backward(g));
  g = c3.backward(r3.backward(g));
  g = c2.backward(r2.backward(g));
  c1.backward(r1.backward(g));
}

std::vector<LayerParams*> ToyBackbone::parameters() {
  return {&c1.params, &c2.params, &c3.params, &c4.params, &c5.params, &c6.params};
}

// --------------------------------------------------------------- RpnHead

RpnHead::RpnHead(const ModelConfig& cfg)
    : conv("rpn.conv", cfg.backbone_channels, cfg.rpn_channels, 3, 1, 1),
      cls("rpn.cls", cfg.rpn_channels, 2 * cfg.anchor_types(), 1, 1, 0),
      reg("rpn.reg", cfg.rpn_channels, 6 * cfg.anchor_types(), 1, 1, 0) {}

void RpnHead::init(SplitRng& rng) {
  conv.init(rng);
  cls.init(rng);
  reg.init(rng);
}

RpnOutput RpnHead::forward(const Tensor& features, bool train) {
  Tensor mid = relu.forward(conv.forward(features, train), train);
  RpnOutput out;
  out.scores = cls.forward(mid, train);
  out.deltas = reg.forward(mid, train);
  return out;
}

Tensor RpnHead::backward(const Tensor& grad_scores, const Tensor& grad_deltas) {
  Tensor g = cls.backward(grad_scores);
  const Tensor gr = reg.backward(grad_deltas);
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gr[i];
  return conv.backward(relu.backward(g));
}

std::vector<LayerParams*> RpnHead::parameters() {
  return {&conv.params, &cls.params, &reg.params};
}

// --------------------------------------------------------------- CrnHead

CrnHead::CrnHead(const ModelConfig& cfg)
    : in_features(cfg.backbone_channels * 7 * 7),
      fc1("crn.fc1", cfg.backbone_channels * 7 * 7, cfg.crn_hidden),
      fc2("crn.fc2", cfg.crn_hidden, cfg.crn_hidden),
      cls("crn.cls", cfg.crn_hidden, 2),
      reg("crn.reg", cfg.crn_hidden, 6),
      bn1("crn.bn1", cfg.crn_hidden),
      bn2("crn.bn2", cfg.crn_hidden) {}

void CrnHead::init(SplitRng& rng) {
  fc1.init(rng);
  fc2.init(rng);
  cls.init(rng);
  reg.init(rng);
}

CrnOutput CrnHead::forward(const Tensor& flat_rois, bool train) {
  require(flat_rois.rank() == 2 && flat_rois.dim(1) == in_features, "crn_head: bad input shape");
  Tensor t = r1.forward(bn1.forward(fc1.forward(flat_rois, train), train), train);
  t = r2.forward(bn2.forward(fc2.forward(t, train), train), train);
  CrnOutput out;
  out.cls_logits = cls.forward(t, train);
  out.deltas = reg.forward(t, train);
  return out;
}

void CrnHead::backward(const Tensor& grad_cls, const Tensor& grad_deltas) {
  Tensor g = cls.backward(grad_cls);
  const Tensor gr = reg.backward(grad_deltas);
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gr[i];
  g = fc2.backward(bn2.backward(r2.backward(g)));
  fc1.backward(bn1.backward(r1.backward(g)));
}

std::pair<Tensor, RegressionTarget> CrnHead::forward_single(const Tensor& roi_feat) {
  require(roi_feat.rank() == 3 && roi_feat.dim(1) == 7 && roi_feat.dim(2) == 7,
          "crn_head: RoI features must have shape (C, 7, 7)");
  require(roi_feat.numel() == in_features, "crn_head: RoI channel count mismatch");
  const CrnOutput out = forward(roi_feat.reshaped({1, in_features}), false);
  Tensor scores({2});
  scores[0] = out.cls_logits.at(0, 0);
  scores[1] = out.cls_logits.at(0, 1);
  RegressionTarget t;
  t.tx_iris = out.deltas.at(0, 0);
  t.ty_iris = out.deltas.at(0, 1);
  t.tx_pupil = out.deltas.at(0, 2);
  t.ty_pupil = out.deltas.at(0, 3);
  t.tr_iris = out.deltas.at(0, 4);
  t.tr_pupil = out.deltas.at(0, 5);
  return {scores, t};
}

std::vector<LayerParams*> CrnHead::parameters() {
  return {&fc1.params, &bn1.params, &fc2.params, &bn2.params, &cls.params, &reg.params};
}

// -------------------------------------------------------------- MaskHead

MaskHead::MaskHead(const ModelConfig& cfg)
    : c1("mask.c1", cfg.backbone_channels, cfg.mask_channels, 3, 1, 1),
      c2("mask.c2", cfg.mask_channels, cfg.mask_channels, 3, 1, 1),
      c3("mask.c3", cfg.mask_channels, cfg.mask_channels, 3, 1, 1),
      c4("mask.c4", cfg.mask_channels, cfg.mask_channels, 3, 1, 1),
      out("mask.out", cfg.mask_channels, 1, 1, 1, 0),
      up("mask.up", cfg.mask_channels, cfg.mask_channels, 2) {}

void MaskHead::init(SplitRng& rng) {
  c1.init(rng);
  c2.init(rng);
  c3.init(rng);
  c4.init(rng);
  up.init(rng);
  out.init(rng);
}

Tensor MaskHead::forward(const Tensor& roi_feat, bool train) {
  require(roi_feat.rank() == 3, "mask_head: bad input rank");
  Tensor t = r1.forward(c1.forward(roi_feat, train), train);
  t = r2.forward(c2.forward(t, train), train);
  t = r3.forward(c3.forward(t, train), train);
  t = r4.forward(c4.forward(t, train), train);
  t = up.forward(t, train);
  return out.forward(t, train);
}

void MaskHead::backward(const Tensor& grad_logits) {
  Tensor g = up.backward(out.backward(grad_logits));
  g = c4.backward(r4.backward(g));
  g = c3.backward(r3.backward(g));
  g = c2.backward(r2.backward(g));
  c1.backward(r1.backward(g));
}

std::vector<LayerParams*> MaskHead::parameters() {
  return {&c1.params, &c2.params, &c3.params, &c4.params, &up.params, &out.params};
}

// -------------------------------------------------------------- IrisRcnn

IrisRcnn::IrisRcnn(const ModelConfig& cfg, std::uint64_t init_seed)
    : config(cfg), backbone(cfg), rpn(cfg), crn(cfg), mask(cfg) {
  require(!cfg.anchor_radii.empty() && !cfg.anchor_ratios.empty(),
          "model: anchor configuration must be non-empty");
  SplitRng root(init_seed);
  SplitRng b = root.split(1);
  SplitRng r = root.split(2);
  SplitRng c = root.split(3);
  SplitRng m = root.split(4);
  backbone.init(b);
  rpn.init(r);
  crn.init(c);
  mask.init(m);
}

std::vector<LayerParams*> IrisRcnn::parameters() {
  std::vector<LayerParams*> all;
  for (auto* p : backbone.parameters()) all.push_back(p);
  for (auto* p : rpn.parameters()) all.push_back(p);
  for (auto* p : crn.parameters()) all.push_back(p);
  for (auto* p : mask.parameters()) all.push_back(p);
  return all;
}

namespace {

Tensor meta_scalar(double v) {
  Tensor t({1});
  t[0] = v;
  return t;
}

Tensor meta_vector(const std::vector<double>& v) {
  Tensor t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

}  // namespace

std::vector<std::pair<std::string, const Tensor*>> IrisRcnn::named_tensors() const {
  // meta tensors are materialized by save(); this lists only live parameters
  std::vector<std::pair<std::string, const Tensor*>> out;
  auto self = const_cast<IrisRcnn*>(this);
  for (LayerParams* p : self->parameters()) {
    out.emplace_back(p->name + ".weight", &p->weights);
    out.emplace_back(p->name + ".bias", &p->bias);
  }
  out.emplace_back("crn.bn1.running_mean", &crn.bn1.running_mean);
  out.emplace_back("crn.bn1.running_var", &crn.bn1.running_var);
  out.emplace_back("crn.bn2.running_mean", &crn.bn2.running_mean);
  out.emplace_back("crn.bn2.running_var", &crn.bn2.running_var);
  return out;
}

void IrisRcnn::save(const std::string& path) const {
  std::vector<Tensor> meta;
  meta.push_back(meta_scalar(static_cast<double>(config.backbone_channels)));
  meta.push_back(meta_scalar(static_cast<double>(config.rpn_channels)));
  meta.push_back(meta_scalar(static_cast<double>(config.crn_hidden)));
  meta.push_back(meta_scalar(static_cast<double>(config.mask_channels)));
  meta.push_back(meta_vector(config.anchor_radii));
  meta.push_back(meta_vector(config.anchor_ratios));

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  tensors.emplace_back("meta.backbone_channels", &meta[0]);
  tensors.emplace_back("meta.rpn_channels", &meta[1]);
  tensors.emplace_back("meta.crn_hidden", &meta[2]);
  tensors.emplace_back("meta.mask_channels", &meta[3]);
  tensors.emplace_back("meta.anchor_radii", &meta[4]);
  tensors.emplace_back("meta.anchor_ratios", &meta[5]);
  for (auto& nt : named_tensors()) tensors.push_back(nt);
  save_weights(path, tensors);
}

IrisRcnn IrisRcnn::load(const std::string& path) {
  auto tensors = load_weights(path);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : tensors) {
    if (!by_name.emplace(name, std::move(t)).second)
      throw std::runtime_error("weight file: duplicate tensor " + name);
  }
  auto take = [&](const std::string& name) -> Tensor {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("weight file: missing tensor " + name);
    Tensor t = std::move(it->second);
    by_name.erase(it);
    return t;
  };

  ModelConfig cfg;
  cfg.backbone_channels = static_cast<std::size_t>(take("meta.backbone_channels")[0]);
  cfg.rpn_channels = static_cast<std::size_t>(take("meta.rpn_channels")[0]);
  cfg.crn_hidden = static_cast<std::size_t>(take("meta.crn_hidden")[0]);
  cfg.mask_channels = static_cast<std::size_t>(take("meta.mask_channels")[0]);
  Tensor radii = take("meta.anchor_radii");
  Tensor ratios = take("meta.anchor_ratios");
  cfg.anchor_radii.assign(radii.data(), radii.data() + radii.numel());
  cfg.anchor_ratios.assign(ratios.data(), ratios.data() + ratios.numel());

  IrisRcnn model(cfg, 0);
  for (LayerParams* p : model.parameters()) {
    Tensor w = take(p->name + ".weight");
    Tensor b = take(p->name + ".bias");
    if (!w.same_shape(p->weights) || !b.same_shape(p->bias))
      throw std::runtime_error("weight file: shape mismatch for " + p->name);
    p->weights = std::move(w);
    p->bias = std::move(b);
  }
  auto load_bn = [&](BatchNormFc& bn, const std::string& prefix) {
    Tensor m = take(prefix + ".running_mean");
    Tensor v = take(prefix + ".running_var");
    if (!m.same_shape(bn.running_mean) || !v.same_shape(bn.running_var))
      throw std::runtime_error("weight file: shape mismatch for " + prefix);
    bn.running_mean = std::move(m);
    bn.running_var = std::move(v);
  };
  load_bn(model.crn.bn1, "crn.bn1");
  load_bn(model.crn.bn2, "crn.bn2");

  if (!by_name.empty())
    throw std::runtime_error("weight file: unexpected tensor " + by_name.begin()->first);
  return model;
}

}  // namespace dciris
