// Minimal library use: load weights, enhance one image, write the result
// and the mean illumination gain of each iteration.

#include <cstdio>
#include <exception>

#include "darklighter/darklighter.hpp"

namespace dl = darklighter;

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: %s WEIGHTS.dlwt INPUT OUTPUT.png\n", argv[0]);
    return 2;
  }
  try {
    const auto params = dl::load_weights(argv[1]);
    const auto image = dl::load_image(argv[2]);
    const auto net = dl::forward(image, params);
    const auto result = dl::enhance(image, net.e_stack, net.n_stack);
    dl::save_png(result.exported, argv[3]);

    for (std::size_t i = 0; i < net.e_stack.iterations(); ++i) {
      double gain = 0.0;
      const float* e = net.e_stack.map(i);
      for (std::size_t k = 0; k < net.e_stack.pixels(); ++k) gain += e[k];
      std::printf("iteration %zu: mean gain %.4f\n", i + 1, gain / static_cast<double>(net.e_stack.pixels()));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
