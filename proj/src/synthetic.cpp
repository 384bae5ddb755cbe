#include "atos/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "atos/model.hpp"

namespace atos {

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.per_class == 0 || spec.shape.size() == 0) {
    throw std::invalid_argument("synthetic dataset needs >= 2 classes and a nonempty shape");
  }
  Rng rng(spec.seed);
  const Shape& s = spec.shape;

  std::vector<Tensor> prototypes;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Tensor proto(s);
    const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.classes);
    const double freq = rng.uniform(0.6, 1.4);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t ch = 0; ch < s.channels; ++ch) {
      const double base = rng.uniform(0.3, 0.7);
      const double amp = rng.uniform(0.1, 0.25);
      for (std::size_t r = 0; r < s.height; ++r) {
        for (std::size_t c = 0; c < s.width; ++c) {
          const double u = std::cos(angle) * static_cast<double>(c) +
                           std::sin(angle) * static_cast<double>(r);
          proto.at(ch, r, c) = base + amp * std::sin(freq * u + phase);
        }
      }
    }
    prototypes.push_back(std::move(proto));
  }

  Rng draws(spec.sample_seed);
  const QuantScale q;
  Dataset data;
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t k = 0; k < spec.classes; ++k) {
      Tensor img = prototypes[k];
      const double offset = draws.uniform(-0.08, 0.08);
      for (double& v : img.values()) {
        v = std::clamp(v + offset + spec.noise * draws.normal(), 0.0, 1.0);
        v = quantize_value(v, q);
      }
      data.images.push_back(std::move(img));
      data.labels.push_back(static_cast<std::uint32_t>(k));
    }
  }
  return data;
}

}  // namespace atos
