#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace noisetrans {

/// Dense row-major tensor of doubles. Image tensors use the [N, C, H, W]
/// layout; a rank-0 tensor (empty shape) is a scalar with one element.
/// Tensors are treated as immutable values once an operation has produced
/// them, which makes every operation in this library safe to call from
/// multiple threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor full(std::vector<std::int64_t> shape, double value);
  static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* raw() const { return data_.data(); }
  double* raw() { return data_.data(); }

  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  // NCHW accessor; only valid for rank-4 tensors.
  double at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  double& at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }

  bool is_scalar() const { return data_.size() == 1 && shape_.empty(); }
  /// Value of a one-element tensor (rank 0 or any shape with numel 1).
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double value);

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::int64_t>& shape);
std::int64_t shape_numel(const std::vector<std::int64_t>& shape);

/// Throws if any element is NaN or Inf; `what` names the producing operation.
void check_finite(const Tensor& t, const char* what);
bool all_finite(const Tensor& t);

}  // namespace noisetrans
