#include "noisetrans/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace noisetrans {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.data_.assign(1, value);
  return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::logic_error("item() on tensor with " + std::to_string(data_.size()) + " elements");
  }
  return data_[0];
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool all_finite(const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const Tensor& t, const char* what) {
  if (!all_finite(t)) {
    throw std::runtime_error(std::string(what) + " produced a non-finite value");
  }
}

}  // namespace noisetrans
