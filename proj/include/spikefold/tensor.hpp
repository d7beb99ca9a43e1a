#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "spikefold/errors.hpp"

namespace spikefold {

// Dense row-major float32 array with an explicit shape. The last extent is
// the fastest-varying one. A rank-0 tensor holds a single value.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);          // zero-filled
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor full(std::vector<int> shape, float value);
  static Tensor scalar(float value) { return full({}, value); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int size() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  int flat_index(std::initializer_list<int> idx) const;
  float at(std::initializer_list<int> idx) const { return data_[static_cast<size_t>(flat_index(idx))]; }
  float& at(std::initializer_list<int> idx) { return data_[static_cast<size_t>(flat_index(idx))]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  bool bitwise_equal(const Tensor& other) const;

  void fill(float value) { for (auto& v : data_) v = value; }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::string shape_str(const std::vector<int>& shape);
int shape_product(const std::vector<int>& shape);  // empty product = 1

// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace spikefold
