#include "feasc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace feasc {

std::size_t shape_volume(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ValidationError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, Scalar fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::vector<int> shape) {
  if (shape_volume(shape) != data_.size())
    throw ValidationError("reshape from " + shape_string() + " changes element count");
  shape_ = std::move(shape);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other))
    throw ValidationError("tensor add shape mismatch: " + shape_string() + " vs " + other.shape_string());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

long Tensor::first_non_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i])) return static_cast<long>(i);
  return -1;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ')';
  return os.str();
}

Tensor stack(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw ValidationError("stack of zero tensors");
  const auto& inner = samples.front().shape();
  std::vector<int> shape{static_cast<int>(samples.size())};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const std::size_t step = samples.front().size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != inner) throw ValidationError("stack shape mismatch");
    std::copy(samples[i].data(), samples[i].data() + step, out.data() + i * step);
  }
  return out;
}

}  // namespace feasc
