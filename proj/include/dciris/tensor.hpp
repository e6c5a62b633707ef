#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dciris {

// Dense row-major double tensor. All numeric state in the system (images,
// masks, feature maps, layer parameters) lives in these.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, 0.0);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    if (n != data_.size()) throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i0, std::size_t i1) { return data_[i0 * shape_[1] + i1]; }
  double at(std::size_t i0, std::size_t i1) const { return data_[i0 * shape_[1] + i1]; }

  double& at(std::size_t i0, std::size_t i1, std::size_t i2) {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  double at(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }

  double& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }
  double at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // every value exactly 0 or 1
  bool is_binary() const {
    for (double x : data_)
      if (x != 0.0 && x != 1.0) return false;
    return true;
  }

  Tensor reshaped(std::vector<std::size_t> shape) const {
    return Tensor(std::move(shape), data_);
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace dciris
