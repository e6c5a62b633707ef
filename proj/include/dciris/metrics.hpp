#pragma once

#include <cstddef>
#include <vector>

#include "dciris/geometry.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

// Pixel-count intersection over union of two binary masks of equal shape.
// Both masks empty counts as perfect agreement (1.0).
double iou_seg(const Tensor& detected, const Tensor& labelled);

// Binary image of the annulus between the pupil and iris circles: a pixel is
// set iff its center lies inside the iris circle and on or outside the pupil
// circle.
Tensor rasterize_double_circle(const DoubleCircle& dc, std::size_t height, std::size_t width);

// Fraction of disagreeing pixels (mean XOR) between two binary masks.
double err_seg(const Tensor& est, const Tensor& label);

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction of imposter pairs accepted
  double frr = 0.0;  // fraction of genuine pairs rejected
};

struct EerCurve {
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::vector<RocPoint> points;
};

// Threshold sweep over all distinct finite distances; a pair matches when
// its distance <= threshold, so +inf distances are never accepted. EER is
// linearly interpolated where FAR crosses FRR.
EerCurve eer_roc(const std::vector<double>& genuine, const std::vector<double>& imposter);

}  // namespace dciris
