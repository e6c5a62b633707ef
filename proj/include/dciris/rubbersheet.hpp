#pragma once

#include <cstddef>

#include "dciris/geometry.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

struct Point2d {
  double x = 0.0;
  double y = 0.0;
};

struct NormalizedMap {
  Tensor data;  // (channels, out_h, out_w)
  DoubleCircle source;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};

// Image point for normalized coordinates (rho, theta): linear blend between
// the pupil boundary (rho = 0) and the iris boundary (rho = 1) at angle
// theta, measured counterclockwise from the +x axis.
Point2d polar_sample_point(const DoubleCircle& dc, double rho, double theta);

// Bilinear sample of channel c at continuous image coordinates (x, y);
// pixel (ix, iy) has its center at (ix + 0.5, iy + 0.5); reads outside the
// image contribute zero.
double bilinear_sample(const Tensor& src, std::size_t channel, double x, double y);

// Rubber-sheet unwrap of src (C, H, W) into (C, out_h, out_w). Row k samples
// rho = (k + 0.5) / out_h, column j samples theta = 2*pi*j / out_w.
NormalizedMap unwrap(const Tensor& src, const DoubleCircle& dc, std::size_t out_h,
                     std::size_t out_w);

// Same sampling applied to a binary mask; interpolated values >= 0.5 map to 1.
NormalizedMap unwrap_mask(const Tensor& mask, const DoubleCircle& dc, std::size_t out_h,
                          std::size_t out_w);

// Unwrap on a feature map whose pixels are `feature_stride` image pixels
// apart: circle coordinates are divided by the stride, then sampled as in
// unwrap.
Tensor roi_normalize(const Tensor& features, const DoubleCircle& dc, double feature_stride,
                     std::size_t out_h, std::size_t out_w);

}  // namespace dciris
