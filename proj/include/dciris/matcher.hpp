#pragma once

#include <cstddef>

#include "dciris/tensor.hpp"

namespace dciris {

// Normalized feature map plus its validity mask; mask shape (1, H, W) must
// match the feature spatial dimensions.
struct MaskedFeatureMap {
  Tensor features;  // (C, H, W)
  Tensor mask;      // (1, H, W), binary
};

// Mean squared feature difference over the positions where both masks are
// set, summed over channels. No overlap -> +inf.
double masked_distance(const MaskedFeatureMap& a, const MaskedFeatureMap& b);

// Minimum masked_distance over circular column shifts of b in
// [-max_shift, +max_shift]; compensates in-plane rotation.
double shifted_distance(const MaskedFeatureMap& a, const MaskedFeatureMap& b,
                        std::size_t max_shift);

}  // namespace dciris
