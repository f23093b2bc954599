// Dense row-major float32 tensor with explicit shape.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "snnkit/common.hpp"

namespace snnkit {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    expect(shape_numel(shape_) == data_.size(), ErrorKind::Shape,
           "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
  }

  static Tensor vec(std::initializer_list<float> vals) {
    return Tensor({vals.size()}, std::vector<float>(vals));
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // (c, y, x) indexing for rank-3 tensors
  float& at3(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float at3(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor reshaped(Shape new_shape) const {
    expect(shape_numel(new_shape) == data_.size(), ErrorKind::Shape,
           "cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    return Tensor(std::move(new_shape), data_);
  }

  float min() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }
  float max() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

  double sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
  }

  double mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void check_finite(const std::string& context) const {
    expect(all_finite(), ErrorKind::Shape, "non-finite value in " + context);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& s) {
    for (std::size_t d : s)
      expect(d > 0, ErrorKind::Shape, "zero-sized dimension in shape " + shape_str(s));
  }

  Shape shape_;
  std::vector<float> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  expect(a.same_shape(b), ErrorKind::Shape,
         "max_abs_diff shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

inline std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

}  // namespace snnkit
