#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tloom/errors.hpp"
#include "tloom/runtime.hpp"

namespace tloom {

/// Per-axis extents of a dense array.  Rank 0 (no axes) describes a scalar.
/// Small fixed capacity keeps shapes allocation-free in hot loops.
class Shape {
 public:
  static constexpr int kMaxRank = 8;

  Shape() = default;
  Shape(std::initializer_list<std::int64_t> extents);
  explicit Shape(std::span<const std::int64_t> extents);

  int rank() const { return rank_; }
  std::int64_t operator[](int axis) const;

  /// Product of all extents; 1 for rank 0.
  std::int64_t count() const;

  /// Leading `n` axes / remaining axes after the leading `n`.
  Shape take(int n) const;
  Shape drop(int n) const;

  /// This shape's axes followed by `tail`'s (frame ++ cell).
  Shape concat(const Shape& tail) const;

  /// Copy with the extent on `axis` replaced.
  Shape with(int axis, std::int64_t extent) const;

  bool operator==(const Shape& other) const;
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const;

 private:
  std::array<std::int64_t, kMaxRank> extents_{};
  int rank_ = 0;
};

/// Coordinate vector indexing the leading axes of a tensor.  May be shorter
/// than the rank (prefix selection); an empty index selects the whole tensor.
class Index {
 public:
  static constexpr int kMaxLen = Shape::kMaxRank;

  Index() = default;
  Index(std::initializer_list<std::int64_t> coords);

  static Index zeros(int len);

  int size() const { return len_; }
  std::int64_t operator[](int i) const;
  void set(int i, std::int64_t coord);
  Index append(std::int64_t coord) const;

  std::string str() const;

 private:
  std::array<std::int64_t, kMaxLen> coords_{};
  int len_ = 0;
};

/// Immutable dense float32 array in row-major order.  Copies are cheap and
/// may share storage; the shared buffer is never written after construction.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.0f.
  Tensor();

  /// Takes ownership of `data`; data.size() must equal shape.count().
  Tensor(const Shape& shape, std::vector<float> data);

  static Tensor scalar(float value);
  static Tensor full(const Shape& shape, float value);
  static Tensor zeros(const Shape& shape);

  const Shape& shape() const { return shape_; }
  std::int64_t count() const { return shape_.count(); }
  std::span<const float> data() const;

  /// Value of a rank-0 tensor.
  float scalar_value() const;

  /// Element at a full-rank index (bounds-checked).
  float at(const Index& iv) const;

  /// Prefix selection on the leading size(iv) axes.  Shares storage; O(1).
  Tensor select(const Index& iv) const;

  /// Same elements, new extents; new_shape.count() must equal count().
  Tensor reshape(const Shape& new_shape) const;

 private:
  Tensor(const Shape& shape, std::shared_ptr<const std::vector<float>> buffer,
         std::int64_t offset);

  Shape shape_;
  std::shared_ptr<const std::vector<float>> buffer_;
  std::int64_t offset_ = 0;
};

/// Extents of `t` (rank 0 for scalars).
Shape shape_of(const Tensor& t);

/// True when shapes match and every element is bit-identical.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Row-major strides for `shape`; entries beyond the rank are unspecified.
std::array<std::int64_t, Shape::kMaxRank> row_major_strides(const Shape& shape);

/// Index of row-major position `flat` within `frame`.
Index unflatten(const Shape& frame, std::int64_t flat);

/// Advances `iv` to the next row-major index of `frame`, wrapping to zeros at
/// the end.  Returns false on wrap.
bool next_index(const Shape& frame, Index& iv);

/// Builds a tensor of shape frame ++ cell where the cell at frame index iv is
/// f(iv).  All cells must share one shape; violations name both frame indices.
/// Cell evaluation order is unobservable; scheduling follows the global
/// ExecConfig.
Tensor comprehend(const Shape& frame, const std::function<Tensor(const Index&)>& f);

/// comprehend specialised to scalar cells: result shape is exactly `frame`.
/// `elem` must be pure.  Statically chunked like any comprehension.
template <class F>
Tensor comprehend_scalar(const Shape& frame, F&& elem) {
  const std::int64_t n = frame.count();
  std::vector<float> out(static_cast<std::size_t>(n));
  float* base = out.data();
  runtime::run_static(n, runtime::global_config(), [&](std::int64_t lo, std::int64_t hi) {
    Index iv = unflatten(frame, lo);
    for (std::int64_t i = lo; i < hi; ++i) {
      base[i] = elem(static_cast<const Index&>(iv));
      next_index(frame, iv);
    }
  });
  return Tensor(frame, std::move(out));
}

enum class EwOp { add, sub, mul, div };

/// Elementwise arithmetic over two tensors of identical shape.
Tensor ew_map2(const Tensor& a, const Tensor& b, EwOp op);
/// Elementwise arithmetic against a scalar on the right.
Tensor ew_map2(const Tensor& a, float b, EwOp op);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ew_map2(a, b, EwOp::add); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ew_map2(a, b, EwOp::sub); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ew_map2(a, b, EwOp::mul); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return ew_map2(a, b, EwOp::div); }
inline Tensor operator+(const Tensor& a, float b) { return ew_map2(a, b, EwOp::add); }
inline Tensor operator-(const Tensor& a, float b) { return ew_map2(a, b, EwOp::sub); }
inline Tensor operator*(const Tensor& a, float b) { return ew_map2(a, b, EwOp::mul); }
inline Tensor operator/(const Tensor& a, float b) { return ew_map2(a, b, EwOp::div); }

/// Sum of all elements in row-major order (sequential, deterministic).
float sum_all(const Tensor& t);

namespace detail {

/// Elementwise map over the flat buffer; result keeps t's shape.
template <class F>
Tensor map_unary(const Tensor& t, F&& f) {
  const std::int64_t n = t.count();
  std::vector<float> out(static_cast<std::size_t>(n));
  const float* src = t.data().data();
  float* dst = out.data();
  runtime::run_static(n, runtime::global_config(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) dst[i] = f(src[i]);
  });
  return Tensor(t.shape(), std::move(out));
}

/// Elementwise map over two same-shaped tensors.
template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F&& f) {
  if (a.shape() != b.shape())
    throw ShapeError("map_binary: shapes " + a.shape().str() + " and " + b.shape().str() +
                     " differ");
  const std::int64_t n = a.count();
  std::vector<float> out(static_cast<std::size_t>(n));
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* dst = out.data();
  runtime::run_static(n, runtime::global_config(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) dst[i] = f(pa[i], pb[i]);
  });
  return Tensor(a.shape(), std::move(out));
}

}  // namespace detail

}  // namespace tloom
