#pragma once

#include <cstddef>

#include "atos/tensor.hpp"

namespace atos {

/// Perturbation statistics. "Nonzero" means exactly != 0; call these on a
/// quantized delta.
struct MetricBundle {
  std::size_t npp = 0;   // perturbed pixels
  std::size_t l0 = 0;    // nonzero elements
  double linf = 0.0;     // max |v|
  std::size_t l20 = 0;   // active block x block windows

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

/// Spatial positions with at least one nonzero channel.
std::size_t compute_npp(const Tensor& delta);
std::size_t compute_l0(const Tensor& delta);
double compute_linf(const Tensor& delta);

/// Number of valid block x block, full-depth windows at the given stride
/// that contain a nonzero element. Throws if block exceeds min(w, h).
std::size_t compute_l20(const Tensor& delta, std::size_t block = 8, std::size_t stride = 1);

MetricBundle compute_metrics(const Tensor& delta, std::size_t l20_block = 8);

}  // namespace atos
