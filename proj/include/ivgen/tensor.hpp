#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ivgen {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major tensor of doubles. Used for pixel images [C,H,W],
// image latents [C,H,W], video latents [N,C,H,W] and noise of the same shapes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 access (c, y, x).
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool all_finite() const noexcept;

  // Copy of slice `index` along the leading axis.
  Tensor slice(std::size_t index) const;
  void set_slice(std::size_t index, const Tensor& part);

  // Stacks equally shaped tensors along a new leading axis.
  static Tensor stack(std::span<const Tensor> parts);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ValidationError naming `what` unless the shapes are equal.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

// Throws ValidationError unless the tensor has a positive shape and finite values.
void require_valid(const Tensor& t, const std::string& what);

// Rank-3 tensor with every value in [0,1].
void require_pixel_image(const Tensor& t, const std::string& what);

// True when both tensors hold identical bytes (distinguishes -0.0 from +0.0).
bool bit_equal(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ivgen
