#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dciris {

// Splittable deterministic generator built on splitmix64. Children derived
// via split()/derive() depend only on the parent's seed and the stream id,
// never on how many values the parent has drawn, so adding draws in one
// subsystem cannot perturb another.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller, one value per call
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  std::uint64_t derive(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ ((stream + 0x632BE59BD9B4E019ull) * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  SplitRng split(std::uint64_t stream) const { return SplitRng(derive(stream)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace dciris
