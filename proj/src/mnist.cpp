#include "tloom/mnist.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace tloom::mnist {

namespace {

constexpr std::uint32_t kImageMagic = 2051;  // 0x00000803
constexpr std::uint32_t kLabelMagic = 2049;  // 0x00000801

std::uint32_t read_u32_be(std::span<const unsigned char> bytes, std::size_t at,
                          const char* what) {
  if (at + 4 > bytes.size())
    throw FormatError(std::string("idx: truncated header reading ") + what + ": need " +
                      std::to_string(at + 4) + " bytes, got " + std::to_string(bytes.size()));
  return (std::uint32_t(bytes[at]) << 24) | (std::uint32_t(bytes[at + 1]) << 16) |
         (std::uint32_t(bytes[at + 2]) << 8) | std::uint32_t(bytes[at + 3]);
}

void append_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (f.bad()) throw FormatError("read failure on file: " + path.string());
  return bytes;
}

}  // namespace

Tensor decode_idx_images(std::span<const unsigned char> bytes) {
  const std::uint32_t magic = read_u32_be(bytes, 0, "image magic");
  if (magic != kImageMagic)
    throw FormatError("idx: bad image magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kImageMagic));
  const std::int64_t n = read_u32_be(bytes, 4, "image count");
  const std::int64_t rows = read_u32_be(bytes, 8, "row count");
  const std::int64_t cols = read_u32_be(bytes, 12, "column count");
  const std::size_t expected = 16 + static_cast<std::size_t>(n * rows * cols);
  if (bytes.size() < expected)
    throw FormatError("idx: truncated image payload: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw FormatError("idx: " + std::to_string(bytes.size() - expected) +
                      " trailing bytes after image payload");

  std::vector<float> pixels(static_cast<std::size_t>(n * rows * cols));
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<float>(bytes[16 + i]) / 255.0f;
  return Tensor(Shape{n, rows, cols}, std::move(pixels));
}

std::vector<int> decode_idx_labels(std::span<const unsigned char> bytes) {
  const std::uint32_t magic = read_u32_be(bytes, 0, "label magic");
  if (magic != kLabelMagic)
    throw FormatError("idx: bad label magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kLabelMagic));
  const std::int64_t n = read_u32_be(bytes, 4, "label count");
  const std::size_t expected = 8 + static_cast<std::size_t>(n);
  if (bytes.size() < expected)
    throw FormatError("idx: truncated label payload: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw FormatError("idx: " + std::to_string(bytes.size() - expected) +
                      " trailing bytes after label payload");

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const unsigned char b = bytes[8 + static_cast<std::size_t>(i)];
    if (b > 9)
      throw ValueError("idx: label " + std::to_string(int(b)) + " at offset " +
                       std::to_string(8 + i) + " out of range 0..9");
    labels[static_cast<std::size_t>(i)] = b;
  }
  return labels;
}

std::vector<unsigned char> encode_idx_images(std::int64_t rows, std::int64_t cols,
                                             std::span<const unsigned char> pixels) {
  if (rows < 1 || cols < 1) throw FormatError("encode_idx_images: bad image geometry");
  const std::int64_t per_image = rows * cols;
  if (pixels.size() % static_cast<std::size_t>(per_image) != 0)
    throw FormatError("encode_idx_images: " + std::to_string(pixels.size()) +
                      " pixel bytes is not a multiple of " + std::to_string(per_image));
  std::vector<unsigned char> out;
  out.reserve(16 + pixels.size());
  append_u32_be(out, kImageMagic);
  append_u32_be(out, static_cast<std::uint32_t>(pixels.size() / per_image));
  append_u32_be(out, static_cast<std::uint32_t>(rows));
  append_u32_be(out, static_cast<std::uint32_t>(cols));
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<unsigned char> encode_idx_labels(std::span<const int> labels) {
  std::vector<unsigned char> out;
  out.reserve(8 + labels.size());
  append_u32_be(out, kLabelMagic);
  append_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 9)
      throw ValueError("encode_idx_labels: label " + std::to_string(l) + " out of range 0..9");
    out.push_back(static_cast<unsigned char>(l));
  }
  return out;
}

Tensor load_images(const std::filesystem::path& path) {
  return decode_idx_images(read_file(path));
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  return decode_idx_labels(read_file(path));
}

MnistSet make_set(Tensor images, std::vector<int> labels, std::int64_t limit) {
  if (images.shape().rank() != 3 || images.shape()[1] != 28 || images.shape()[2] != 28)
    throw FormatError("dataset: images have shape " + images.shape().str() +
                      ", expected [n,28,28]");
  const std::int64_t n = images.shape()[0];
  if (n != static_cast<std::int64_t>(labels.size()))
    throw FormatError("dataset: " + std::to_string(n) + " images but " +
                      std::to_string(labels.size()) + " labels");

  if (limit >= 0 && limit < n) {
    const auto src = images.data();
    std::vector<float> head(src.begin(), src.begin() + limit * 28 * 28);
    images = Tensor(Shape{limit, 28, 28}, std::move(head));
    labels.resize(static_cast<std::size_t>(limit));
  }

  const auto pixels = images.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0f && pixels[i] <= 1.0f))
      throw ValueError("dataset: pixel " + std::to_string(pixels[i]) + " at flat index " +
                       std::to_string(i) + " out of range [0,1]");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 9)
      throw ValueError("dataset: label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " out of range 0..9");
  }
  return MnistSet{std::move(images), std::move(labels)};
}

MnistSet load_set(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path, std::int64_t limit) {
  return make_set(load_images(images_path), load_labels(labels_path), limit);
}

Tensor one_hot(int label) {
  if (label < 0 || label > 9)
    throw ValueError("one_hot: label " + std::to_string(label) + " out of range 0..9");
  std::vector<float> v(10, 0.0f);
  v[static_cast<std::size_t>(label)] = 1.0f;
  return Tensor(Shape{10}, std::move(v));
}

std::vector<std::vector<Example>> batches(const MnistSet& set, std::int64_t size) {
  if (size < 1) throw Error("batches: size must be >= 1, got " + std::to_string(size));
  std::vector<std::vector<Example>> out;
  const std::int64_t n = set.size();
  out.reserve(static_cast<std::size_t>((n + size - 1) / size));
  for (std::int64_t start = 0; start < n; start += size) {
    const std::int64_t stop = std::min(start + size, n);
    std::vector<Example> group;
    group.reserve(static_cast<std::size_t>(stop - start));
    for (std::int64_t i = start; i < stop; ++i) {
      const int label = set.labels[static_cast<std::size_t>(i)];
      group.push_back(Example{set.images.select(Index{i}), one_hot(label), label});
    }
    out.push_back(std::move(group));
  }
  return out;
}

}  // namespace tloom::mnist
