#include "dciris/rubbersheet.hpp"

#include <cmath>
#include <numbers>

namespace dciris {

namespace {

void check_source(const Tensor& src, const DoubleCircle& dc, std::size_t out_h,
                  std::size_t out_w, const char* who) {
  require(src.rank() == 3, std::string(who) + ": source must have shape (C, H, W)");
  require(src.dim(0) > 0 && src.dim(1) > 0 && src.dim(2) > 0,
          std::string(who) + ": source dimensions must be positive");
  require(out_h > 0 && out_w > 0, std::string(who) + ": output dimensions must be positive");
  require(is_valid_double_circle(dc), std::string(who) + ": double circle is degenerate");
}

Tensor unwrap_values(const Tensor& src, const DoubleCircle& dc, std::size_t out_h,
                     std::size_t out_w) {
  const std::size_t channels = src.dim(0);
  Tensor out({channels, out_h, out_w});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < out_h; ++k) {
    const double rho = (static_cast<double>(k) + 0.5) / static_cast<double>(out_h);
    for (std::size_t j = 0; j < out_w; ++j) {
      const double theta = two_pi * static_cast<double>(j) / static_cast<double>(out_w);
      const Point2d p = polar_sample_point(dc, rho, theta);
      for (std::size_t c = 0; c < channels; ++c)
        out.at(c, k, j) = bilinear_sample(src, c, p.x, p.y);
    }
  }
  return out;
}

}  // namespace

Point2d polar_sample_point(const DoubleCircle& dc, double rho, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Point2d p;
  p.x = (1.0 - rho) * (dc.pupil.cx + dc.pupil.r * c) + rho * (dc.iris.cx + dc.iris.r * c);
  p.y = (1.0 - rho) * (dc.pupil.cy + dc.pupil.r * s) + rho * (dc.iris.cy + dc.iris.r * s);
  return p;
}

double bilinear_sample(const Tensor& src, std::size_t channel, double x, double y) {
  const long w = static_cast<long>(src.dim(2));
  const long h = static_cast<long>(src.dim(1));
  const double u = x - 0.5;
  const double v = y - 0.5;
  const double fx = std::floor(u);
  const double fy = std::floor(v);
  const long x0 = static_cast<long>(fx);
  const long y0 = static_cast<long>(fy);
  const double ax = u - fx;
  const double ay = v - fy;

  const double* plane = src.data() + channel * static_cast<std::size_t>(h * w);
  auto px = [&](long xx, long yy) -> double {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
    return plane[yy * w + xx];
  };

  const double top = (1.0 - ax) * px(x0, y0) + ax * px(x0 + 1, y0);
  const double bot = (1.0 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1);
  return (1.0 - ay) * top + ay * bot;
}

NormalizedMap unwrap(const Tensor& src, const DoubleCircle& dc, std::size_t out_h,
                     std::size_t out_w) {
  check_source(src, dc, out_h, out_w, "unwrap");
  NormalizedMap m;
  m.data = unwrap_values(src, dc, out_h, out_w);
  m.source = dc;
  m.out_h = out_h;
  m.out_w = out_w;
  return m;
}

NormalizedMap unwrap_mask(const Tensor& mask, const DoubleCircle& dc, std::size_t out_h,
                          std::size_t out_w) {
  check_source(mask, dc, out_h, out_w, "unwrap_mask");
  require(mask.is_binary(), "unwrap_mask: mask values must be exactly 0 or 1");
  NormalizedMap m;
  m.data = unwrap_values(mask, dc, out_h, out_w);
  for (std::size_t i = 0; i < m.data.numel(); ++i)
    m.data[i] = m.data[i] >= 0.5 ? 1.0 : 0.0;
  m.source = dc;
  m.out_h = out_h;
  m.out_w = out_w;
  return m;
}

Tensor roi_normalize(const Tensor& features, const DoubleCircle& dc, double feature_stride,
                     std::size_t out_h, std::size_t out_w) {
  require(feature_stride > 0.0, "roi_normalize: feature stride must be positive");
  DoubleCircle scaled = dc;
  scaled.iris.cx /= feature_stride;
  scaled.iris.cy /= feature_stride;
  scaled.iris.r /= feature_stride;
  scaled.pupil.cx /= feature_stride;
  scaled.pupil.cy /= feature_stride;
  scaled.pupil.r /= feature_stride;
  check_source(features, scaled, out_h, out_w, "roi_normalize");
  return unwrap_values(features, scaled, out_h, out_w);
}

}  // namespace dciris
