#pragma once

#include <cstdint>
#include <filesystem>

#include "dciris/geometry.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

struct SynthParams {
  std::size_t height = 128;
  std::size_t width = 128;
  double iris_radius_min = 24.0;
  double iris_radius_max = 56.0;
  double pupil_ratio_min = 0.2;
  double pupil_ratio_max = 0.4;
  double center_jitter = 14.0;
  double occlusion_prob = 0.3;
  double eyelid_depth_min = 0.1;
  double eyelid_depth_max = 0.35;
  int highlight_count_min = 0;
  int highlight_count_max = 2;
  double noise_sigma = 0.02;
  std::uint64_t texture_seed = 1234;
};

struct SynthSample {
  Tensor image;  // (1, H, W), values quantized to multiples of 1/255
  Tensor mask;   // (1, H, W), binary; annulus minus occlusions and highlights
  DoubleCircle gt;
};

// Deterministic per (identity, seed): the identity fixes the iris texture,
// the seed fixes pose, occlusions and noise.
SynthSample generate_eye(const SynthParams& params, std::uint64_t identity, std::uint64_t seed);

// Writes images/NNNN.pgm, masks/NNNN.pgm and index.json under out_dir.
// Train and test identity pools are disjoint; images cycle through their
// pool so per-identity counts are exact.
void generate_dataset(std::size_t n_train, std::size_t n_test, std::size_t n_identities,
                      const SynthParams& params, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

}  // namespace dciris
