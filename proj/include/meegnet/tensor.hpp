#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "meegnet/common.hpp"

namespace meegnet {

inline std::string shape_str(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? ", " : "") << dims[i];
  os << ")";
  return os.str();
}

// Dense row-major array with up to 4 axes (batch, channel, electrode, time).
// Scalar is double on the reference path and float on the fast path.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    check_dims();
    data_.assign(numel(), Scalar(0));
  }

  Tensor(std::vector<int> dims, std::vector<Scalar> values)
      : dims_(std::move(dims)), data_(std::move(values)) {
    check_dims();
    if (static_cast<std::size_t>(numel()) != data_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(dims_));
  }

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  const std::vector<int>& shape() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : dims_) n *= d;
    return n;
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& values() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  // 4-axis accessor (b, c, h, w); lower-rank tensors ignore trailing axes.
  Scalar& at(int b, int c = 0, int h = 0, int w = 0) { return data_[static_cast<std::size_t>(index(b, c, h, w))]; }
  Scalar at(int b, int c = 0, int h = 0, int w = 0) const { return data_[static_cast<std::size_t>(index(b, c, h, w))]; }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(Scalar(0)); }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
    return Tensor<Other>(dims_, std::move(out));
  }

 private:
  std::int64_t index(int b, int c, int h, int w) const {
    const int r = rank();
    std::int64_t idx = b;
    if (r > 1) idx = idx * dims_[1] + c;
    if (r > 2) idx = idx * dims_[2] + h;
    if (r > 3) idx = idx * dims_[3] + w;
    return idx;
  }

  void check_dims() const {
    if (dims_.empty() || dims_.size() > 4)
      throw ShapeError("tensor rank must be 1..4, got shape " + shape_str(dims_));
    for (int d : dims_)
      if (d < 1) throw ShapeError("tensor extents must be >= 1, got shape " + shape_str(dims_));
  }

  std::vector<int> dims_;
  std::vector<Scalar> data_;
};

}  // namespace meegnet
