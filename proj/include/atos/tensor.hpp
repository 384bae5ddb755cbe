#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace atos {

/// Image shape (channels, width, height). Element (ch, row, col) lives at
/// flat index ch*w*h + row*w + col, so the channel axis is outermost.
struct Shape {
  std::size_t channels = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t pixels() const { return width * height; }
  std::size_t size() const { return channels * width * height; }
  std::size_t index(std::size_t ch, std::size_t row, std::size_t col) const {
    return (ch * height + row) * width + col;
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense c x w x h array of doubles.
///
/// Images satisfy 0 <= v <= 1 (see is_unit_box()). Perturbations use the same
/// type with the relaxed bound |v| <= 1; the box invariant is imposed on
/// x + delta instead.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t ch, std::size_t row, std::size_t col) {
    return data_[shape_.index(ch, row, col)];
  }
  double at(std::size_t ch, std::size_t row, std::size_t col) const {
    return data_[shape_.index(ch, row, col)];
  }

  bool is_unit_box() const;
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws std::invalid_argument unless every element is in [0, 1].
void require_image(const Tensor& image, const char* what);

/// Number of levels of the pixel-value grid; 256 for 8-bit images.
class QuantScale {
 public:
  QuantScale() : QuantScale(256) {}
  explicit QuantScale(unsigned levels);
  unsigned levels() const { return levels_; }
  double step() const { return 1.0 / static_cast<double>(levels_ - 1); }

 private:
  unsigned levels_;
};

/// Clamps each delta element to [-x, 1 - x] so that x + delta stays in the
/// unit box. Feasible elements are returned unchanged.
Tensor clip_to_box(const Tensor& x, const Tensor& delta);
void clip_to_box_inplace(const Tensor& x, Tensor& delta);

/// Snaps every element to the nearest multiple of 1/(levels-1), ties away
/// from zero.
Tensor quantize(const Tensor& delta, const QuantScale& scale = QuantScale{});
double quantize_value(double v, const QuantScale& scale);

/// x + delta with the sum clamped to [0, 1].
Tensor add_clamped(const Tensor& x, const Tensor& delta);

}  // namespace atos
