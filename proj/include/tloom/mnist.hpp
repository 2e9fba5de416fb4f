#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tloom/tensor.hpp"

namespace tloom::mnist {

/// Decoded dataset: images [n,28,28] with pixels in [0,1], one label per
/// image, labels in 0..9.  Immutable once constructed.
struct MnistSet {
  Tensor images;
  std::vector<int> labels;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
};

/// One training example: a [28,28] image view, its one-hot target and label.
struct Example {
  Tensor image;
  Tensor target;
  int label;
};

/// Decodes an IDX image stream (big-endian magic 2051, u32 n/rows/cols,
/// unsigned-byte pixels) into [n, rows, cols] with pixel = byte / 255.
Tensor decode_idx_images(std::span<const unsigned char> bytes);

/// Decodes an IDX label stream (big-endian magic 2049, u32 n, n bytes < 10).
std::vector<int> decode_idx_labels(std::span<const unsigned char> bytes);

/// Encodes 28x28-agnostic image bytes / labels back into IDX streams.
std::vector<unsigned char> encode_idx_images(std::int64_t rows, std::int64_t cols,
                                             std::span<const unsigned char> pixels);
std::vector<unsigned char> encode_idx_labels(std::span<const int> labels);

Tensor load_images(const std::filesystem::path& path);
std::vector<int> load_labels(const std::filesystem::path& path);

/// Validates the MnistSet invariants (28x28 images, matching counts, pixels
/// in [0,1], labels in 0..9) and truncates to the first `limit` examples when
/// limit >= 0.
MnistSet make_set(Tensor images, std::vector<int> labels, std::int64_t limit = -1);

MnistSet load_set(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path, std::int64_t limit = -1);

/// Unit vector of length 10 with 1.0 at `label`.
Tensor one_hot(int label);

/// Consecutive non-overlapping groups of `size` examples in dataset order;
/// the final group may be smaller.  Image tensors are O(1) views.
std::vector<std::vector<Example>> batches(const MnistSet& set, std::int64_t size);

}  // namespace tloom::mnist
