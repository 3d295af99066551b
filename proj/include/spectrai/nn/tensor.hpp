#pragma once

#include <Eigen/Dense>

#include <cstring>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spectrai/core/error.hpp"
#include "spectrai/core/types.hpp"

namespace spectrai::nn {

using spectrai::Index;
using Shape = std::vector<Index>;

std::string shape_string(const Shape& shape);

/// Dense row-major tensor. Rank 4 is (N, C, H, W); rank 3 is (N, C, L) and
/// is treated as (N, C, 1, L) by the spatial layers; rank 2 is (N, C).
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  using Plane = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using FlatMap = Eigen::Map<Array>;
  using ConstFlatMap = Eigen::Map<const Array>;
  using PlaneMap = Eigen::Map<Plane>;
  using ConstPlaneMap = Eigen::Map<const Plane>;
  /// Aligned so vectorized reductions split the data the same way every run.
  using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (Index d : shape_)
      if (d < 1) throw ShapeError("tensor dims must be >= 1, got " + shape_string(shape_));
    data_.assign(static_cast<std::size_t>(count(shape_)), fill);
  }
  Tensor(Shape shape, const std::vector<T>& data) : Tensor(std::move(shape), Storage(data.begin(), data.end())) {}
  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != count(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }

  static Index count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Index batch() const { return shape_.at(0); }
  Index channels() const { return rank() > 1 ? shape_[1] : 1; }
  Index height() const { return rank() == 4 ? shape_[2] : 1; }
  Index width() const { return rank() == 4 ? shape_[3] : (rank() == 3 ? shape_[2] : 1); }
  Index plane_size() const { return height() * width(); }
  Index sample_size() const { return channels() * plane_size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  FlatMap flat() { return FlatMap(data_.data(), size()); }
  ConstFlatMap flat() const { return ConstFlatMap(data_.data(), size()); }

  /// Sample n as a (C x H*W) matrix view.
  PlaneMap sample(Index n) { return PlaneMap(data() + n * sample_size(), channels(), plane_size()); }
  ConstPlaneMap sample(Index n) const {
    return ConstPlaneMap(data() + n * sample_size(), channels(), plane_size());
  }

  T& at(Index n, Index c, Index y, Index x) {
    return data_[static_cast<std::size_t>(((n * channels() + c) * height() + y) * width() + x)];
  }
  T at(Index n, Index c, Index y, Index x) const {
    return data_[static_cast<std::size_t>(((n * channels() + c) * height() + y) * width() + x)];
  }
  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  Tensor reshaped(Shape shape) const {
    if (count(shape) != size()) throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    typename Tensor<U>::Storage d(data_.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(d));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const { return flat().allFinite(); }

  /// Samples [first, first + n) along the batch axis.
  Tensor slice_batch(Index first, Index n) const {
    Shape s = shape_;
    s[0] = n;
    Storage d(data_.begin() + first * sample_size(), data_.begin() + (first + n) * sample_size());
    return Tensor(std::move(s), std::move(d));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Storage data_;
};

/// Concatenates along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || a.batch() != b.batch() || a.plane_size() != b.plane_size())
    throw ShapeError("concat: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  Shape s = a.shape();
  s[1] = a.channels() + b.channels();
  Tensor<T> out(s);
  for (Index n = 0; n < a.batch(); ++n) {
    auto o = out.sample(n);
    o.topRows(a.channels()) = a.sample(n);
    o.bottomRows(b.channels()) = b.sample(n);
  }
  return out;
}

/// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, Index first_channels) {
  Shape sa = g.shape(), sb = g.shape();
  sa[1] = first_channels;
  sb[1] = g.channels() - first_channels;
  Tensor<T> a(sa), b(sb);
  for (Index n = 0; n < g.batch(); ++n) {
    a.sample(n) = g.sample(n).topRows(first_channels);
    b.sample(n) = g.sample(n).bottomRows(sb[1]);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T>& operator+=(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  a.flat() += b.flat();
  return a;
}

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  a += b;
  return a;
}

}  // namespace spectrai::nn
