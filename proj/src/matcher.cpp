#include "dciris/matcher.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace dciris {

namespace {

void check_map(const MaskedFeatureMap& m, const char* who) {
  require(m.features.rank() == 3, std::string(who) + ": features must have shape (C, H, W)");
  require(m.mask.rank() == 3 && m.mask.dim(0) == 1 && m.mask.dim(1) == m.features.dim(1) &&
              m.mask.dim(2) == m.features.dim(2),
          std::string(who) + ": mask must have shape (1, H, W) matching the features");
}

// distance with b's columns circularly shifted right by `shift`
double distance_with_shift(const MaskedFeatureMap& a, const MaskedFeatureMap& b, long shift) {
  const std::size_t channels = a.features.dim(0);
  const std::size_t h = a.features.dim(1);
  const std::size_t w = a.features.dim(2);
  const long lw = static_cast<long>(w);

  double sum = 0.0;
  std::size_t count = 0;
  const double* am = a.mask.data();
  const double* bm = b.mask.data();
  const double* af = a.features.data();
  const double* bf = b.features.data();
  const std::size_t plane = h * w;

  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t row = y * w;
    for (std::size_t x = 0; x < w; ++x) {
      long sx = (static_cast<long>(x) - shift) % lw;
      if (sx < 0) sx += lw;
      const std::size_t bx = static_cast<std::size_t>(sx);
      if (am[row + x] == 0.0 || bm[row + bx] == 0.0) continue;
      ++count;
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = af[c * plane + row + x] - bf[c * plane + row + bx];
        sum += d * d;
      }
    }
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(count);
}

}  // namespace

double masked_distance(const MaskedFeatureMap& a, const MaskedFeatureMap& b) {
  check_map(a, "masked_distance");
  check_map(b, "masked_distance");
  require(a.features.same_shape(b.features), "masked_distance: feature shape mismatch");
  require(a.mask.is_binary() && b.mask.is_binary(), "masked_distance: masks must be binary");
  return distance_with_shift(a, b, 0);
}

double shifted_distance(const MaskedFeatureMap& a, const MaskedFeatureMap& b,
                        std::size_t max_shift) {
  check_map(a, "shifted_distance");
  check_map(b, "shifted_distance");
  require(a.features.same_shape(b.features), "shifted_distance: feature shape mismatch");
  require(a.mask.is_binary() && b.mask.is_binary(), "shifted_distance: masks must be binary");
  require(max_shift < a.features.dim(2), "shifted_distance: max shift must be below the width");
  double best = std::numeric_limits<double>::infinity();
  const long m = static_cast<long>(max_shift);
  for (long s = -m; s <= m; ++s)
    best = std::min(best, distance_with_shift(a, b, s));
  return best;
}

}  // namespace dciris
