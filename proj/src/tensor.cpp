#include "atos/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace atos {

std::string to_string(const Shape& shape) {
  return "(" + std::to_string(shape.channels) + "," + std::to_string(shape.width) + "," +
         std::to_string(shape.height) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
  }
}

bool Tensor::is_unit_box() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_image(const Tensor& image, const char* what) {
  if (!image.is_unit_box()) {
    throw std::invalid_argument(std::string(what) + ": values must lie in [0, 1]");
  }
}

QuantScale::QuantScale(unsigned levels) : levels_(levels) {
  if (levels < 2) throw std::invalid_argument("quantization needs at least 2 levels");
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("shape mismatch: " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

}  // namespace

void clip_to_box_inplace(const Tensor& x, Tensor& delta) {
  require_same_shape(x, delta);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = std::clamp(delta[i], -x[i], 1.0 - x[i]);
  }
}

Tensor clip_to_box(const Tensor& x, const Tensor& delta) {
  Tensor out = delta;
  clip_to_box_inplace(x, out);
  return out;
}

double quantize_value(double v, const QuantScale& scale) {
  const double levels = static_cast<double>(scale.levels() - 1);
  // std::round is half-away-from-zero.
  return std::round(v * levels) / levels;
}

Tensor quantize(const Tensor& delta, const QuantScale& scale) {
  Tensor out = delta;
  for (double& v : out.values()) v = quantize_value(v, scale);
  return out;
}

Tensor add_clamped(const Tensor& x, const Tensor& delta) {
  require_same_shape(x, delta);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i] + delta[i], 0.0, 1.0);
  return out;
}

}  // namespace atos
