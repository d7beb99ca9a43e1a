#include "spikefold/tensor.hpp"

#include <cmath>
#include <cstring>

namespace spikefold {

int shape_product(const std::vector<int>& shape) {
  long long p = 1;
  for (int e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    p *= e;
  }
  return static_cast<int>(p);
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_product(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<size_t>(shape_product(shape_)) != data_.size())
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

int Tensor::flat_index(std::initializer_list<int> idx) const {
  if (idx.size() != shape_.size())
    throw DimensionError("index rank " + std::to_string(idx.size()) + " does not match shape " + shape_str(shape_));
  int flat = 0;
  size_t axis = 0;
  for (int i : idx) {
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(where) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace spikefold
