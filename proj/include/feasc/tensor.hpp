#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace feasc {

using Scalar = double;

/// Raised when an argument violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input file cannot be read or decoded. Carries the path.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Dense row-major tensor of up to four dimensions.
///
/// Images and feature maps use NCHW (or CHW for a single sample), embeddings
/// use (N, D). Storage is contiguous so kernels can map it directly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Scalar fill = 0);
  Tensor(std::initializer_list<int> shape, Scalar fill = 0)
      : Tensor(std::vector<int>(shape), fill) {}

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar& at(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  Scalar at(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

  /// Elements per leading-axis slice (one sample of a batch).
  std::size_t stride0() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }
  std::span<Scalar> slice(int n) { return {data_.data() + n * stride0(), stride0()}; }
  std::span<const Scalar> slice(int n) const { return {data_.data() + n * stride0(), stride0()}; }

  void fill(Scalar v);
  void reshape(std::vector<int> shape);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor& operator+=(const Tensor& other);

  /// First index holding a NaN/Inf, or -1.
  long first_non_finite() const;

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

std::size_t shape_volume(const std::vector<int>& shape);

/// Concatenates samples along the leading axis. All inputs must agree on the trailing shape.
Tensor stack(const std::vector<Tensor>& samples);

}  // namespace feasc
