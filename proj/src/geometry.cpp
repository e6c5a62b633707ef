#include "dciris/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dciris/tensor.hpp"

namespace dciris {

namespace {

bool finite_circle(const Circle& c) {
  return std::isfinite(c.cx) && std::isfinite(c.cy) && std::isfinite(c.r);
}

}  // namespace

std::vector<DoubleCircle> anchor_grid(std::size_t feat_w, std::size_t feat_h, double stride,
                                      const std::vector<double>& radii,
                                      const std::vector<double>& ratios) {
  require(feat_w > 0 && feat_h > 0, "anchor_grid: feature dimensions must be positive");
  require(stride > 0.0, "anchor_grid: stride must be positive");
  require(!radii.empty(), "anchor_grid: radii must be non-empty");
  require(!ratios.empty(), "anchor_grid: ratios must be non-empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, "anchor_grid: radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], "anchor_grid: radii must be strictly ascending");
  }
  for (double q : ratios)
    require(q > 0.0 && q < 1.0, "anchor_grid: ratios must lie in (0, 1)");

  std::vector<DoubleCircle> anchors;
  anchors.reserve(feat_w * feat_h * radii.size() * ratios.size());
  for (std::size_t j = 0; j < feat_h; ++j) {
    for (std::size_t i = 0; i < feat_w; ++i) {
      const double cx = (static_cast<double>(i) + 0.5) * stride;
      const double cy = (static_cast<double>(j) + 0.5) * stride;
      for (double r : radii) {
        for (double q : ratios) {
          DoubleCircle dc;
          dc.iris = {cx, cy, r};
          dc.pupil = {cx, cy, q * r};
          anchors.push_back(dc);
        }
      }
    }
  }
  return anchors;
}

RegressionTarget encode(const DoubleCircle& anchor, const DoubleCircle& gt) {
  require(anchor.iris.r > 0.0 && anchor.pupil.r > 0.0, "encode: anchor radii must be positive");
  require(gt.iris.r > 0.0 && gt.pupil.r > 0.0, "encode: ground-truth radii must be positive");
  RegressionTarget t;
  t.tx_iris = (gt.iris.cx - anchor.iris.cx) / anchor.iris.r;
  t.ty_iris = (gt.iris.cy - anchor.iris.cy) / anchor.iris.r;
  t.tx_pupil = (gt.pupil.cx - anchor.pupil.cx) / anchor.pupil.r;
  t.ty_pupil = (gt.pupil.cy - anchor.pupil.cy) / anchor.pupil.r;
  t.tr_iris = std::log(gt.iris.r / anchor.iris.r);
  t.tr_pupil = std::log(gt.pupil.r / anchor.pupil.r);
  return t;
}

DoubleCircle decode(const DoubleCircle& anchor, const RegressionTarget& t) {
  require(anchor.iris.r > 0.0 && anchor.pupil.r > 0.0, "decode: anchor radii must be positive");
  require(std::isfinite(t.tx_iris) && std::isfinite(t.ty_iris) && std::isfinite(t.tx_pupil) &&
              std::isfinite(t.ty_pupil) && std::isfinite(t.tr_iris) && std::isfinite(t.tr_pupil),
          "decode: transform must be finite");
  DoubleCircle dc;
  dc.iris.cx = anchor.iris.cx + t.tx_iris * anchor.iris.r;
  dc.iris.cy = anchor.iris.cy + t.ty_iris * anchor.iris.r;
  dc.iris.r = anchor.iris.r * std::exp(t.tr_iris);
  dc.pupil.cx = anchor.pupil.cx + t.tx_pupil * anchor.pupil.r;
  dc.pupil.cy = anchor.pupil.cy + t.ty_pupil * anchor.pupil.r;
  dc.pupil.r = anchor.pupil.r * std::exp(t.tr_pupil);
  return dc;
}

double circle_iou_square(const Circle& a, const Circle& b) {
  require(a.r > 0.0 && b.r > 0.0, "circle_iou_square: radii must be positive");
  const double ox = std::min(a.cx + a.r, b.cx + b.r) - std::max(a.cx - a.r, b.cx - b.r);
  const double oy = std::min(a.cy + a.r, b.cy + b.r) - std::max(a.cy - a.r, b.cy - b.r);
  if (ox <= 0.0 || oy <= 0.0) return 0.0;
  const double inter = ox * oy;
  const double uni = 4.0 * a.r * a.r + 4.0 * b.r * b.r - inter;
  return inter / uni;
}

double double_circle_iou(const DoubleCircle& a, const DoubleCircle& b) {
  return 0.5 * (circle_iou_square(a.iris, b.iris) + circle_iou_square(a.pupil, b.pupil));
}

double iou_raster_oracle(const Circle& a, const Circle& b, std::size_t resolution,
                         RasterShape shape) {
  require(resolution >= 64, "iou_raster_oracle: resolution must be at least 64");
  require(a.r > 0.0 && b.r > 0.0, "iou_raster_oracle: radii must be positive");

  const double x0 = std::min(a.cx - a.r, b.cx - b.r);
  const double x1 = std::max(a.cx + a.r, b.cx + b.r);
  const double y0 = std::min(a.cy - a.r, b.cy - b.r);
  const double y1 = std::max(a.cy + a.r, b.cy + b.r);
  const double dx = (x1 - x0) / static_cast<double>(resolution);
  const double dy = (y1 - y0) / static_cast<double>(resolution);

  auto inside = [shape](const Circle& c, double px, double py) {
    const double ex = px - c.cx;
    const double ey = py - c.cy;
    if (shape == RasterShape::kSquare)
      return std::abs(ex) <= c.r && std::abs(ey) <= c.r;
    return ex * ex + ey * ey <= c.r * c.r;
  };

  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    const double py = y0 + (static_cast<double>(iy) + 0.5) * dy;
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      const double px = x0 + (static_cast<double>(ix) + 0.5) * dx;
      const bool in_a = inside(a, px, py);
      const bool in_b = inside(b, px, py);
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<AnchorLabel> assign_labels(const std::vector<DoubleCircle>& anchors,
                                       const std::vector<DoubleCircle>& gts, double pos_thr,
                                       double neg_thr) {
  require(!anchors.empty(), "assign_labels: anchors must be non-empty");
  require(neg_thr >= 0.0 && neg_thr < pos_thr && pos_thr <= 1.0,
          "assign_labels: thresholds must satisfy 0 <= neg < pos <= 1");

  std::vector<AnchorLabel> labels(anchors.size());
  if (gts.empty()) return labels;

  // best anchor per ground truth, for the promotion pass
  std::vector<double> gt_best_iou(gts.size(), 0.0);
  std::vector<std::size_t> gt_best_anchor(gts.size(), 0);

  for (std::size_t k = 0; k < anchors.size(); ++k) {
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = double_circle_iou(anchors[k], gts[g]);
      if (iou > best) {
        best = iou;
        best_g = g;
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = k;
      }
    }
    labels[k].iou = best;
    labels[k].matched_gt = best_g;
    if (best > pos_thr)
      labels[k].tag = AnchorTag::kPositive;
    else if (best < neg_thr)
      labels[k].tag = AnchorTag::kNegative;
    else
      labels[k].tag = AnchorTag::kIgnore;
  }

  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best_iou[g] > 0.0) labels[gt_best_anchor[g]].tag = AnchorTag::kPositive;
  }
  return labels;
}

std::vector<ScoredDoubleCircle> dc_nms(const std::vector<ScoredDoubleCircle>& proposals,
                                       double iou_thr, std::size_t max_keep) {
  require(iou_thr > 0.0 && iou_thr < 1.0, "dc_nms: iou threshold must lie in (0, 1)");
  for (const auto& p : proposals)
    require(std::isfinite(p.score), "dc_nms: scores must be finite");

  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].score > proposals[b].score;
  });

  std::vector<ScoredDoubleCircle> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_keep) break;
    bool suppressed = false;
    for (const auto& k : kept) {
      if (double_circle_iou(proposals[idx].dc, k.dc) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(proposals[idx]);
  }
  return kept;
}

bool is_valid_double_circle(const DoubleCircle& dc) {
  if (!finite_circle(dc.iris) || !finite_circle(dc.pupil)) return false;
  if (dc.pupil.r <= 0.0 || dc.iris.r <= dc.pupil.r) return false;
  const double ex = dc.pupil.cx - dc.iris.cx;
  const double ey = dc.pupil.cy - dc.iris.cy;
  return ex * ex + ey * ey <= dc.iris.r * dc.iris.r;
}

}  // namespace dciris
