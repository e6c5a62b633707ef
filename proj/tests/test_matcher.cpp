#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dciris/matcher.hpp"
#include "dciris/rng.hpp"

using namespace dciris;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MaskedFeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, SplitRng& rng,
                            double mask_rate = 0.7) {
  MaskedFeatureMap m;
  m.features = Tensor({c, h, w});
  m.mask = Tensor({1, h, w});
  for (std::size_t i = 0; i < m.features.numel(); ++i) m.features[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < m.mask.numel(); ++i)
    m.mask[i] = rng.uniform(0.0, 1.0) < mask_rate ? 1.0 : 0.0;
  return m;
}

MaskedFeatureMap shift_columns(const MaskedFeatureMap& m, std::size_t s) {
  const std::size_t c = m.features.dim(0), h = m.features.dim(1), w = m.features.dim(2);
  MaskedFeatureMap out;
  out.features = Tensor({c, h, w});
  out.mask = Tensor({1, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out.features.at(ch, y, (x + s) % w) = m.features.at(ch, y, x);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.mask.at(0, y, (x + s) % w) = m.mask.at(0, y, x);
  return out;
}

}  // namespace

TEST_CASE("masked_distance hand values") {
  MaskedFeatureMap a, b;
  a.features = Tensor({1, 1, 2});
  b.features = Tensor({1, 1, 2});
  a.mask = Tensor({1, 1, 2});
  b.mask = Tensor({1, 1, 2});
  a.mask.fill(1.0);
  b.mask.fill(1.0);
  a.features[0] = 1.0;
  a.features[1] = 2.0;
  b.features[0] = 2.0;
  b.features[1] = 4.0;

  CHECK(masked_distance(a, b) == doctest::Approx(2.5));
  CHECK(masked_distance(a, a) == doctest::Approx(0.0));
  CHECK(masked_distance(b, a) == doctest::Approx(2.5));
}

TEST_CASE("disjoint masks give infinite distance") {
  MaskedFeatureMap a, b;
  a.features = Tensor({1, 2, 2});
  b.features = Tensor({1, 2, 2});
  a.mask = Tensor({1, 2, 2});
  b.mask = Tensor({1, 2, 2});
  a.mask[0] = 1.0;
  a.mask[1] = 1.0;
  b.mask[2] = 1.0;
  b.mask[3] = 1.0;
  CHECK(masked_distance(a, b) == kInf);
}

TEST_CASE("masked-out locations do not affect the distance") {
  SplitRng rng(1);
  const MaskedFeatureMap a = random_map(2, 6, 12, rng);
  MaskedFeatureMap b = random_map(2, 6, 12, rng);
  const double before = masked_distance(a, b);

  MaskedFeatureMap c = b;
  bool touched = false;
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 12; ++x)
      if (c.mask.at(0, y, x) == 0.0) {
        for (std::size_t ch = 0; ch < 2; ++ch) c.features.at(ch, y, x) = 99.0;
        touched = true;
      }
  REQUIRE(touched);
  CHECK(masked_distance(a, c) == doctest::Approx(before));
}

TEST_CASE("distance scales quadratically with the features") {
  SplitRng rng(2);
  const MaskedFeatureMap a = random_map(3, 5, 9, rng, 1.0);
  const MaskedFeatureMap b = random_map(3, 5, 9, rng, 1.0);
  const double base = masked_distance(a, b);
  REQUIRE(std::isfinite(base));
  REQUIRE(base > 0.0);

  MaskedFeatureMap ka = a, kb = b;
  for (std::size_t i = 0; i < ka.features.numel(); ++i) ka.features[i] *= 3.0;
  for (std::size_t i = 0; i < kb.features.numel(); ++i) kb.features[i] *= 3.0;
  CHECK(masked_distance(ka, kb) == doctest::Approx(9.0 * base));
}

TEST_CASE("masked_distance validates shapes") {
  SplitRng rng(3);
  const MaskedFeatureMap a = random_map(1, 4, 8, rng);
  const MaskedFeatureMap b = random_map(1, 4, 9, rng);
  CHECK_THROWS_AS(masked_distance(a, b), std::invalid_argument);

  MaskedFeatureMap grey = random_map(1, 4, 8, rng);
  grey.mask.fill(0.5);
  const MaskedFeatureMap ok = random_map(1, 4, 8, rng);
  CHECK_THROWS_AS(masked_distance(grey, ok), std::invalid_argument);
}

TEST_CASE("shifted_distance") {
  SplitRng rng(4);
  const MaskedFeatureMap a = random_map(1, 8, 32, rng);
  const MaskedFeatureMap b = random_map(1, 8, 32, rng);

  SUBCASE("max_shift 0 equals masked_distance") {
    CHECK(shifted_distance(a, b, 0) == doctest::Approx(masked_distance(a, b)));
  }

  SUBCASE("a column-shifted copy is recovered exactly") {
    const MaskedFeatureMap moved = shift_columns(a, 3);
    CHECK(shifted_distance(a, moved, 3) == doctest::Approx(0.0));
    CHECK(shifted_distance(a, moved, 8) == doctest::Approx(0.0));
    CHECK(shifted_distance(a, moved, 2) > 0.0);
  }

  SUBCASE("never above the unshifted distance") {
    for (std::size_t s : {std::size_t{1}, std::size_t{4}, std::size_t{8}}) {
      CHECK(shifted_distance(a, b, s) <= masked_distance(a, b) + 1e-12);
    }
  }

  SUBCASE("symmetric in its arguments") {
    for (std::size_t s : {std::size_t{0}, std::size_t{3}, std::size_t{8}}) {
      CHECK(shifted_distance(a, b, s) == doctest::Approx(shifted_distance(b, a, s)));
    }
  }

  SUBCASE("shift bound must stay below the width") {
    CHECK_THROWS_AS(shifted_distance(a, b, 32), std::invalid_argument);
    CHECK(std::isfinite(shifted_distance(a, b, 31)));
  }
}
