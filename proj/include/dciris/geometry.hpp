#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace dciris {

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

// Joint iris/pupil detection target. The pupil circle is expected to lie
// inside the iris circle but the struct itself does not enforce it; see
// is_valid_double_circle.
struct DoubleCircle {
  Circle iris;
  Circle pupil;
};

// Transform from an anchor double-circle to a ground-truth double-circle:
// center offsets in units of the matching anchor radius, radii as log ratios.
struct RegressionTarget {
  double tx_iris = 0.0;
  double ty_iris = 0.0;
  double tx_pupil = 0.0;
  double ty_pupil = 0.0;
  double tr_iris = 0.0;
  double tr_pupil = 0.0;
};

enum class AnchorTag { kPositive, kNegative, kIgnore };

struct AnchorLabel {
  AnchorTag tag = AnchorTag::kNegative;
  std::optional<std::size_t> matched_gt;
  double iou = 0.0;
};

struct ScoredDoubleCircle {
  DoubleCircle dc;
  double score = 0.0;
};

// Concentric double-circle anchors on a feature grid. Anchor (i, j) sits at
// ((i + 0.5) * stride, (j + 0.5) * stride); ordering is row-major over
// locations, then radius, then ratio.
std::vector<DoubleCircle> anchor_grid(std::size_t feat_w, std::size_t feat_h, double stride,
                                      const std::vector<double>& radii,
                                      const std::vector<double>& ratios);

RegressionTarget encode(const DoubleCircle& anchor, const DoubleCircle& gt);
DoubleCircle decode(const DoubleCircle& anchor, const RegressionTarget& t);

// IoU of the axis-aligned squares circumscribing two circles, closed form.
double circle_iou_square(const Circle& a, const Circle& b);

// Mean of the iris-square IoU and the pupil-square IoU.
double double_circle_iou(const DoubleCircle& a, const DoubleCircle& b);

enum class RasterShape { kSquare, kDisk };

// Pixel-count IoU on a resolution x resolution grid over the union's
// bounding box. Slow on purpose; test oracle for circle_iou_square.
double iou_raster_oracle(const Circle& a, const Circle& b, std::size_t resolution,
                         RasterShape shape);

std::vector<AnchorLabel> assign_labels(const std::vector<DoubleCircle>& anchors,
                                       const std::vector<DoubleCircle>& gts,
                                       double pos_thr = 0.7, double neg_thr = 0.3);

// Greedy non-maximum suppression on double-circle IoU; result sorted by
// descending score, ties broken by input order.
std::vector<ScoredDoubleCircle> dc_nms(const std::vector<ScoredDoubleCircle>& proposals,
                                       double iou_thr, std::size_t max_keep);

// Finite values, positive radii, pupil smaller than iris, pupil center
// within the iris circle.
bool is_valid_double_circle(const DoubleCircle& dc);

}  // namespace dciris
