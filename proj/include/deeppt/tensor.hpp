#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpt {

template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense n-d array, rank 1..4, row-major. Rank-4 extents are (batch,
/// channels, height, width); rank-3 drops the batch, rank-1 is a plain
/// vector. Storage is an Eigen vector so elementwise work stays
/// expression-friendly.
template <typename S>
class Tensor {
public:
  using Storage = VecX<S>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.setZero(checked_size(shape_));
  }

  Tensor(std::initializer_list<int> shape, Storage data)
      : shape_(shape), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  Tensor(std::vector<int> shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Eigen::Index size() const { return data_.size(); }
  int extent(int d) const { return shape_.at(static_cast<size_t>(d)); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  Storage& vec() { return data_; }
  const Storage& vec() const { return data_; }

  S& operator[](Eigen::Index i) { return data_[i]; }
  S operator[](Eigen::Index i) const { return data_[i]; }

  // (c, h, w) accessor for rank-3 tensors.
  S& at(int c, int h, int w) {
    return data_[(static_cast<Eigen::Index>(c) * shape_[1] + h) * shape_[2] + w];
  }
  S at(int c, int h, int w) const {
    return data_[(static_cast<Eigen::Index>(c) * shape_[1] + h) * shape_[2] + w];
  }

  /// Same storage, new shape; element count must be preserved.
  Tensor reshaped(std::vector<int> shape) const {
    if (checked_size(shape) != data_.size())
      throw std::invalid_argument("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }

private:
  static Eigen::Index checked_size(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4)
      throw std::invalid_argument("tensor rank must be 1..4");
    Eigen::Index n = 1;
    for (int e : shape) {
      if (e < 1) throw std::invalid_argument("tensor extents must be >= 1");
      n *= e;
    }
    return n;
  }

  std::vector<int> shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace dpt
