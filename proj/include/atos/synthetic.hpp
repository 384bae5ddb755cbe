#pragma once

#include <cstdint>

#include "atos/io.hpp"

namespace atos {

/// Class-conditional toy images: each class has a colour and an oriented
/// grating; samples add Gaussian noise and a brightness offset and are
/// snapped to the 8-bit grid. `seed` fixes the class prototypes and
/// `sample_seed` the draws, so train and test splits share classes.
struct SyntheticSpec {
  Shape shape{3, 8, 8};
  std::size_t classes = 10;
  std::size_t per_class = 100;
  double noise = 0.08;
  std::uint64_t seed = 2024;
  std::uint64_t sample_seed = 1;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace atos
