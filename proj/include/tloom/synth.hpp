#pragma once

#include <cstdint>
#include <vector>

#include "tloom/mnist.hpp"

namespace tloom::synth {

/// Procedurally drawn digit corpus in raw MNIST geometry: n 28x28 grayscale
/// images (row-major bytes) with labels 0..9.  Fully determined by (n, seed).
struct Corpus {
  std::vector<unsigned char> pixels;  // n * 28 * 28 bytes
  std::vector<int> labels;
};

/// Renders n digits from a fixed 5x7 glyph font under random scale,
/// sub-pixel translation and additive noise; labels cycle 0 through 9.
Corpus make_digits(std::int64_t n, std::uint64_t seed);

/// Same corpus decoded into a ready-to-train MnistSet (pixels / 255).
mnist::MnistSet make_set(std::int64_t n, std::uint64_t seed);

}  // namespace tloom::synth
