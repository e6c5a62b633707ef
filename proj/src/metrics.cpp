#include "dciris/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dciris {

double iou_seg(const Tensor& detected, const Tensor& labelled) {
  require(detected.same_shape(labelled), "iou_seg: shape mismatch");
  require(detected.is_binary() && labelled.is_binary(), "iou_seg: masks must be binary");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < detected.numel(); ++i) {
    const bool a = detected[i] != 0.0;
    const bool b = labelled[i] != 0.0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Tensor rasterize_double_circle(const DoubleCircle& dc, std::size_t height, std::size_t width) {
  require(height > 0 && width > 0, "rasterize_double_circle: dimensions must be positive");
  require(is_valid_double_circle(dc), "rasterize_double_circle: double circle is degenerate");
  Tensor out({1, height, width});
  const double ri2 = dc.iris.r * dc.iris.r;
  const double rp2 = dc.pupil.r * dc.pupil.r;
  for (std::size_t y = 0; y < height; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double dix = px - dc.iris.cx;
      const double diy = py - dc.iris.cy;
      const double dpx = px - dc.pupil.cx;
      const double dpy = py - dc.pupil.cy;
      const bool in_iris = dix * dix + diy * diy <= ri2;
      const bool out_pupil = dpx * dpx + dpy * dpy >= rp2;
      out.at(0, y, x) = (in_iris && out_pupil) ? 1.0 : 0.0;
    }
  }
  return out;
}

double err_seg(const Tensor& est, const Tensor& label) {
  require(est.same_shape(label), "err_seg: shape mismatch");
  require(est.is_binary() && label.is_binary(), "err_seg: masks must be binary");
  require(est.numel() > 0, "err_seg: empty masks");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < est.numel(); ++i)
    diff += (est[i] != label[i]) ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(est.numel());
}

EerCurve eer_roc(const std::vector<double>& genuine, const std::vector<double>& imposter) {
  require(!genuine.empty() && !imposter.empty(), "eer_roc: both distance lists must be non-empty");
  auto check = [](const std::vector<double>& v, const char* who) {
    for (double d : v)
      require(!std::isnan(d) && d >= 0.0, std::string("eer_roc: ") + who +
                                              " distances must lie in [0, +inf]");
  };
  check(genuine, "genuine");
  check(imposter, "imposter");

  std::vector<double> gen = genuine;
  std::vector<double> imp = imposter;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size());
  for (double d : gen)
    if (std::isfinite(d)) thresholds.push_back(d);
  for (double d : imp)
    if (std::isfinite(d)) thresholds.push_back(d);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  EerCurve out;
  if (thresholds.empty()) {  // every distance infinite: nothing ever accepted
    out.eer = 0.5;
    out.eer_threshold = std::numeric_limits<double>::infinity();
    return out;
  }

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  out.points.reserve(thresholds.size());
  std::size_t ig = 0;
  std::size_t ii = 0;
  for (double t : thresholds) {
    while (ig < gen.size() && gen[ig] <= t) ++ig;
    while (ii < imp.size() && imp[ii] <= t) ++ii;
    RocPoint p;
    p.threshold = t;
    p.far = static_cast<double>(ii) / ni;
    p.frr = 1.0 - static_cast<double>(ig) / ng;
    out.points.push_back(p);
  }

  // below the smallest threshold nothing is accepted
  RocPoint prev{thresholds.front(), 0.0, 1.0};
  for (const RocPoint& p : out.points) {
    if (p.far >= p.frr) {
      const double df = p.far - prev.far;
      const double dr = p.frr - prev.frr;
      const double denom = df - dr;
      double alpha = 0.5;
      if (std::abs(denom) > 1e-300) alpha = (prev.frr - prev.far) / denom;
      alpha = std::clamp(alpha, 0.0, 1.0);
      out.eer = prev.far + alpha * df;
      out.eer_threshold = prev.threshold + alpha * (p.threshold - prev.threshold);
      return out;
    }
    prev = p;
  }

  // FAR never reaches FRR (possible only with mass at +inf)
  out.eer = 0.5 * (out.points.back().far + out.points.back().frr);
  out.eer_threshold = out.points.back().threshold;
  return out;
}

}  // namespace dciris
