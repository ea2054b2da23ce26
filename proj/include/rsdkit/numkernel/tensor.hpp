#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rsdkit/common/error.hpp"

namespace rsdkit::numkernel {

std::string shape_string(const std::vector<std::size_t>& shape);

/// Dense row-major tensor with an optional gradient buffer of the same size.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real{0})
      : shape_(std::move(shape)),
        data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>()), fill) {}

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  // Leading dimension and the product of the rest; a rank-1 tensor is one row.
  std::size_t rows() const noexcept { return shape_.size() <= 1 ? 1 : shape_[0]; }
  std::size_t cols() const noexcept { return rows() == 0 ? 0 : size() / rows(); }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }
  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const Real& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<Real> row(std::size_t r) { return std::span<Real>(data_).subspan(r * cols(), cols()); }
  std::span<const Real> row(std::size_t r) const {
    return std::span<const Real>(data_).subspan(r * cols(), cols());
  }

  bool has_grad() const noexcept { return grad_enabled_; }
  void enable_grad() {
    grad_enabled_ = true;
    grad_.assign(data_.size(), Real{0});
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), Real{0}); }
  std::span<Real> grad() noexcept { return grad_; }
  std::span<const Real> grad() const noexcept { return grad_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
    if (grad_enabled_) out.enable_grad();
    return out;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
  bool grad_enabled_ = false;
};

/// Named handle to a trainable tensor; the order of a model's parameter list
/// is its serialization order.
template <typename Real>
struct ParamRef {
  std::string name;
  Tensor<Real>* tensor = nullptr;
};

template <typename Real>
void require_shape(const Tensor<Real>& t, const std::vector<std::size_t>& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw DimensionError(what + ": expected " + shape_string(expected) + ", got " + shape_string(t.shape()));
  }
}

}  // namespace rsdkit::numkernel
