#include "ivgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "ivgen/error.hpp"

namespace ivgen {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw ValidationError("value count " + std::to_string(data_.size()) + " does not match shape " +
                          shape_to_string(shape_));
  }
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) throw ValidationError("slice index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  const std::size_t n = shape_size(inner);
  std::vector<double> part(data_.begin() + static_cast<std::ptrdiff_t>(index * n),
                           data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  return Tensor(std::move(inner), std::move(part));
}

void Tensor::set_slice(std::size_t index, const Tensor& part) {
  if (shape_.empty() || index >= shape_[0]) throw ValidationError("slice index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  if (part.shape() != inner) {
    throw ValidationError("slice shape " + shape_to_string(part.shape()) + " does not match " +
                          shape_to_string(inner));
  }
  std::copy(part.data_.begin(), part.data_.end(), data_.begin() + static_cast<std::ptrdiff_t>(index * part.size()));
}

Tensor Tensor::stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ValidationError("cannot stack an empty list");
  Shape shape{parts.size()};
  shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
  Tensor out(shape);
  for (std::size_t i = 0; i < parts.size(); ++i) out.set_slice(i, parts[i]);
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (a.shape() != b.shape()) {
    throw ValidationError("shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()),
                          what);
  }
}

void require_valid(const Tensor& t, const std::string& what) {
  if (t.shape().empty() || std::any_of(t.shape().begin(), t.shape().end(), [](std::size_t d) { return d == 0; })) {
    throw ValidationError("shape must have positive dimensions, got " + shape_to_string(t.shape()), what);
  }
  if (!t.all_finite()) throw ValidationError("contains non-finite values", what);
}

void require_pixel_image(const Tensor& t, const std::string& what) {
  require_valid(t, what);
  if (t.rank() != 3) throw ValidationError("expected a [C,H,W] image, got " + shape_to_string(t.shape()), what);
  for (double v : t.values()) {
    if (v < 0.0 || v > 1.0) throw ValidationError("pixel values must lie in [0,1]", what);
  }
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ivgen
