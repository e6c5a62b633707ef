#include "dciris/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "dciris/dataset.hpp"
#include "dciris/rng.hpp"

namespace dciris {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct TextureComponent {
  double amp = 0.0;
  double ang_freq = 0.0;  // integer cycles around the annulus
  double rad_freq = 0.0;  // cycles across the annulus
  double phase = 0.0;
};

using Texture = std::array<TextureComponent, 8>;

// the identity alone fixes the texture; image seeds never touch it
Texture identity_texture(std::uint64_t texture_seed, std::uint64_t identity) {
  SplitRng rng = SplitRng(texture_seed).split(identity);
  Texture t;
  for (TextureComponent& c : t) {
    c.amp = rng.uniform(0.03, 0.11);
    c.ang_freq = static_cast<double>(1 + rng.below(8));
    c.rad_freq = static_cast<double>(rng.below(4));
    c.phase = rng.uniform(0.0, kTwoPi);
  }
  return t;
}

double texture_value(const Texture& t, double rho, double theta) {
  double v = 0.0;
  for (const TextureComponent& c : t)
    v += c.amp * std::sin(c.ang_freq * theta + c.rad_freq * kTwoPi * rho + c.phase);
  return v;
}

// Inverse of the rubber-sheet map: for a pixel p inside the annulus, find
// (rho, theta) with (1-rho)*(pupil boundary) + rho*(iris boundary) = p.
// Reduces to a quadratic in rho because the blend radius is linear in rho.
void invert_rubber_sheet(const DoubleCircle& dc, double px, double py, double& rho,
                         double& theta) {
  const double vx = px - dc.pupil.cx;
  const double vy = py - dc.pupil.cy;
  const double dx = dc.iris.cx - dc.pupil.cx;
  const double dy = dc.iris.cy - dc.pupil.cy;
  const double dr = dc.iris.r - dc.pupil.r;

  const double a = dx * dx + dy * dy - dr * dr;
  const double b = -2.0 * (vx * dx + vy * dy + dc.pupil.r * dr);
  const double c = vx * vx + vy * vy - dc.pupil.r * dc.pupil.r;

  if (std::abs(a) < 1e-12) {
    rho = std::abs(b) < 1e-300 ? 0.0 : -c / b;
  } else {
    // a < 0 whenever the pupil lies strictly inside the iris; the root in
    // [0, 1] is the one with the positive blend radius
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double sq = std::sqrt(disc);
    const double r1 = (-b + sq) / (2.0 * a);
    const double r2 = (-b - sq) / (2.0 * a);
    rho = (r1 >= 0.0 && r1 <= 1.0) ? r1 : r2;
  }
  rho = std::clamp(rho, 0.0, 1.0);
  const double radius = dc.pupil.r + rho * dr;
  const double ux = vx - rho * dx;
  const double uy = vy - rho * dy;
  theta = std::atan2(uy, ux);
  if (theta < 0.0) theta += kTwoPi;
  (void)radius;
}

struct Eyelid {
  bool present = false;
  double edge_y = 0.0;       // y of the lid edge at the iris center column
  double curvature = 0.0;    // px of retreat per squared px from the center
  bool upper = true;

  bool covers(double px, double py, double cx) const {
    if (!present) return false;
    const double d = px - cx;
    const double edge = upper ? edge_y - curvature * d * d : edge_y + curvature * d * d;
    return upper ? py < edge : py > edge;
  }
};

void validate(const SynthParams& p) {
  require(p.height >= 16 && p.width >= 16, "synth: image dimensions must be at least 16");
  require(p.iris_radius_min > 0.0 && p.iris_radius_min <= p.iris_radius_max,
          "synth: iris radius range is degenerate");
  require(p.pupil_ratio_min > 0.0 && p.pupil_ratio_max < 1.0 &&
              p.pupil_ratio_min <= p.pupil_ratio_max,
          "synth: pupil ratio range must lie inside (0, 1)");
  require(p.center_jitter >= 0.0, "synth: center jitter must be non-negative");
  require(p.occlusion_prob >= 0.0 && p.occlusion_prob <= 1.0,
          "synth: occlusion probability must lie in [0, 1]");
  require(p.eyelid_depth_min >= 0.0 && p.eyelid_depth_min <= p.eyelid_depth_max &&
              p.eyelid_depth_max < 1.0,
          "synth: eyelid depth range is degenerate");
  require(p.highlight_count_min >= 0 && p.highlight_count_min <= p.highlight_count_max,
          "synth: highlight count range is degenerate");
  require(p.noise_sigma >= 0.0, "synth: noise sigma must be non-negative");
}

}  // namespace

SynthSample generate_eye(const SynthParams& params, std::uint64_t identity, std::uint64_t seed) {
  validate(params);
  const double w = static_cast<double>(params.width);
  const double h = static_cast<double>(params.height);

  SplitRng rng(seed);
  DoubleCircle gt;
  gt.iris.r = rng.uniform(params.iris_radius_min, params.iris_radius_max);
  require(2.0 * gt.iris.r + 4.0 < std::min(w, h), "synth: iris radius does not fit the image");
  const double margin = gt.iris.r + 2.0;
  gt.iris.cx = std::clamp(w / 2.0 + rng.uniform(-params.center_jitter, params.center_jitter),
                          margin, w - margin);
  gt.iris.cy = std::clamp(h / 2.0 + rng.uniform(-params.center_jitter, params.center_jitter),
                          margin, h - margin);

  const double ratio = rng.uniform(params.pupil_ratio_min, params.pupil_ratio_max);
  gt.pupil.r = ratio * gt.iris.r;
  const double max_off = std::min(0.3 * gt.iris.r, 0.85 * (gt.iris.r - gt.pupil.r));
  const double off = rng.uniform(0.0, max_off);
  const double off_ang = rng.uniform(0.0, kTwoPi);
  gt.pupil.cx = gt.iris.cx + off * std::cos(off_ang);
  gt.pupil.cy = gt.iris.cy + off * std::sin(off_ang);

  const Texture texture = identity_texture(params.texture_seed, identity);

  Eyelid upper, lower;
  if (rng.uniform() < params.occlusion_prob) {
    upper.present = true;
    upper.upper = true;
    const double depth = rng.uniform(params.eyelid_depth_min, params.eyelid_depth_max);
    upper.edge_y = gt.iris.cy - gt.iris.r * (1.0 - depth);
    upper.curvature = rng.uniform(0.5, 1.5) / (2.0 * gt.iris.r);
  }
  if (rng.uniform() < 0.5 * params.occlusion_prob) {
    lower.present = true;
    lower.upper = false;
    const double depth = rng.uniform(params.eyelid_depth_min, params.eyelid_depth_max);
    lower.edge_y = gt.iris.cy + gt.iris.r * (1.0 - depth);
    lower.curvature = rng.uniform(0.5, 1.5) / (2.0 * gt.iris.r);
  }

  const int n_high = params.highlight_count_min +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(
                         params.highlight_count_max - params.highlight_count_min + 1)));
  std::vector<Circle> highlights;
  for (int i = 0; i < n_high; ++i) {
    const double hrho = rng.uniform(0.15, 0.9);
    const double htheta = rng.uniform(0.0, kTwoPi);
    const double cth = std::cos(htheta);
    const double sth = std::sin(htheta);
    Circle hl;
    hl.cx = (1.0 - hrho) * (gt.pupil.cx + gt.pupil.r * cth) + hrho * (gt.iris.cx + gt.iris.r * cth);
    hl.cy = (1.0 - hrho) * (gt.pupil.cy + gt.pupil.r * sth) + hrho * (gt.iris.cy + gt.iris.r * sth);
    hl.r = rng.uniform(1.5, 3.5);
    highlights.push_back(hl);
  }

  SynthSample out;
  out.gt = gt;
  out.image = Tensor({1, params.height, params.width});
  out.mask = Tensor({1, params.height, params.width});

  const double ri2 = gt.iris.r * gt.iris.r;
  const double rp2 = gt.pupil.r * gt.pupil.r;
  for (std::size_t y = 0; y < params.height; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < params.width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double dix = px - gt.iris.cx;
      const double diy = py - gt.iris.cy;
      const double dpx = px - gt.pupil.cx;
      const double dpy = py - gt.pupil.cy;
      const double di2 = dix * dix + diy * diy;
      const double dp2 = dpx * dpx + dpy * dpy;

      double v;
      const bool in_annulus = di2 <= ri2 && dp2 >= rp2;
      if (dp2 < rp2) {
        v = 0.08 + 0.04 * std::sqrt(dp2 / rp2);
      } else if (di2 <= ri2) {
        double rho, theta;
        invert_rubber_sheet(gt, px, py, rho, theta);
        v = 0.5 + texture_value(texture, rho, theta);
      } else {
        v = 0.85;
      }

      bool occluded = false;
      if (upper.covers(px, py, gt.iris.cx) || lower.covers(px, py, gt.iris.cx)) {
        v = 0.72;
        occluded = true;
      }
      for (const Circle& hl : highlights) {
        const double ex = px - hl.cx;
        const double ey = py - hl.cy;
        if (ex * ex + ey * ey <= hl.r * hl.r) {
          v = 0.97;
          occluded = true;
          break;
        }
      }

      if (params.noise_sigma > 0.0) v += params.noise_sigma * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      out.image.at(0, y, x) = std::round(v * 255.0) / 255.0;
      out.mask.at(0, y, x) = (in_annulus && !occluded) ? 1.0 : 0.0;
    }
  }
  return out;
}

void generate_dataset(std::size_t n_train, std::size_t n_test, std::size_t n_identities,
                      const SynthParams& params, std::uint64_t seed,
                      const std::filesystem::path& out_dir) {
  validate(params);
  require(n_train >= 1 && n_test >= 1, "generate_dataset: split sizes must be at least 1");
  require(n_identities >= 2, "generate_dataset: at least two identities are required");

  const std::size_t n_test_ids = n_identities / 2;
  const std::size_t n_train_ids = n_identities - n_test_ids;

  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "masks");

  SplitRng root(seed);
  DatasetIndex index;
  index.root = out_dir;

  char name[32];
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    const bool is_train = i < n_train;
    const std::uint64_t identity =
        is_train ? i % n_train_ids : n_train_ids + (i - n_train) % n_test_ids;
    const SynthSample sample = generate_eye(params, identity, root.derive(i));

    std::snprintf(name, sizeof(name), "%04zu.pgm", i);
    AnnotationRecord r;
    r.image_path = std::string("images/") + name;
    r.mask_path = std::string("masks/") + name;
    r.identity_label = static_cast<std::int64_t>(identity);
    r.split = is_train ? "train" : "test";
    r.gt = sample.gt;
    write_pgm(out_dir / r.image_path, sample.image);
    write_pgm(out_dir / r.mask_path, sample.mask);
    index.records.push_back(std::move(r));
  }
  save_dataset_index(index);
}

}  // namespace dciris
