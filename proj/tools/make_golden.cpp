// Writes the seed-42 forward-pass fixture: weights, one input and the
// logits the reference forward pass produced for it.
#include <cstdio>
#include <filesystem>

#include "atos/io.hpp"
#include "atos/model.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: atos_make_golden <out_dir>\n");
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  const atos::Shape shape{3, 8, 8};
  const auto net = atos::init_tinynet(shape, 32, 10, 42);
  atos::Rng rng(4242);
  atos::Tensor x(shape);
  for (double& v : x.values()) v = rng.uniform();
  atos::save_tinynet(dir / "tinynet_seed42.atw", net);
  atos::save_atn(dir / "input.atn", x);
  const auto logits = net.forward(x);
  FILE* f = std::fopen((dir / "logits.txt").c_str(), "w");
  if (!f) return 1;
  for (double v : logits) std::fprintf(f, "%.17g\n", v);
  std::fclose(f);
  return 0;
}
