#include "atos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace atos {

namespace {

// 1 where any channel of the pixel is nonzero, row-major over (row, col).
std::vector<unsigned char> active_pixels(const Tensor& delta) {
  const Shape& s = delta.shape();
  std::vector<unsigned char> mask(s.pixels(), 0);
  for (std::size_t ch = 0; ch < s.channels; ++ch) {
    for (std::size_t p = 0; p < s.pixels(); ++p) {
      if (delta[ch * s.pixels() + p] != 0.0) mask[p] = 1;
    }
  }
  return mask;
}

}  // namespace

std::size_t compute_npp(const Tensor& delta) {
  const auto mask = active_pixels(delta);
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::size_t compute_l0(const Tensor& delta) {
  const auto v = delta.values();
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

double compute_linf(const Tensor& delta) {
  double m = 0.0;
  for (double v : delta.values()) m = std::max(m, std::abs(v));
  return m;
}

std::size_t compute_l20(const Tensor& delta, std::size_t block, std::size_t stride) {
  const Shape& s = delta.shape();
  if (block == 0 || stride == 0) throw std::invalid_argument("block and stride must be positive");
  if (block > std::min(s.width, s.height)) {
    throw std::invalid_argument("block " + std::to_string(block) + " larger than image " +
                                to_string(s));
  }
  const auto mask = active_pixels(delta);
  // Summed-area table with a zero border row/column.
  const std::size_t w = s.width;
  const std::size_t h = s.height;
  std::vector<std::size_t> sat((w + 1) * (h + 1), 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      sat[(r + 1) * (w + 1) + c + 1] = mask[r * w + c] + sat[r * (w + 1) + c + 1] +
                                      sat[(r + 1) * (w + 1) + c] - sat[r * (w + 1) + c];
    }
  }
  std::size_t active = 0;
  for (std::size_t r = 0; r + block <= h; r += stride) {
    for (std::size_t c = 0; c + block <= w; c += stride) {
      const std::size_t r1 = r + block;
      const std::size_t c1 = c + block;
      const std::size_t sum = sat[r1 * (w + 1) + c1] + sat[r * (w + 1) + c] -
                              sat[r * (w + 1) + c1] - sat[r1 * (w + 1) + c];
      if (sum > 0) ++active;
    }
  }
  return active;
}

MetricBundle compute_metrics(const Tensor& delta, std::size_t l20_block) {
  return {compute_npp(delta), compute_l0(delta), compute_linf(delta),
          compute_l20(delta, l20_block)};
}

}  // namespace atos
