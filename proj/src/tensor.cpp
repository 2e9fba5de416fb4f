#include "tloom/tensor.hpp"

#include <cstring>

namespace tloom {

namespace {

std::string join_extents(const std::int64_t* v, int n) {
  std::string s = "[";
  for (int i = 0; i < n; ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  s += ']';
  return s;
}

}  // namespace

// --- Shape ---------------------------------------------------------------

Shape::Shape(std::initializer_list<std::int64_t> extents)
    : Shape(std::span<const std::int64_t>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const std::int64_t> extents) {
  if (extents.size() > kMaxRank)
    throw ShapeError("Shape: rank " + std::to_string(extents.size()) + " exceeds maximum " +
                     std::to_string(kMaxRank));
  for (std::int64_t e : extents) {
    if (e < 0) throw ShapeError("Shape: negative extent " + std::to_string(e));
    extents_[rank_++] = e;
  }
}

std::int64_t Shape::operator[](int axis) const {
  if (axis < 0 || axis >= rank_)
    throw BoundsError("Shape: axis " + std::to_string(axis) + " out of range for rank " +
                      std::to_string(rank_));
  return extents_[axis];
}

std::int64_t Shape::count() const {
  std::int64_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= extents_[i];
  return n;
}

Shape Shape::take(int n) const {
  if (n < 0 || n > rank_) throw ShapeError("Shape::take: bad axis count");
  return Shape(std::span<const std::int64_t>(extents_.data(), n));
}

Shape Shape::drop(int n) const {
  if (n < 0 || n > rank_) throw ShapeError("Shape::drop: bad axis count");
  return Shape(std::span<const std::int64_t>(extents_.data() + n, rank_ - n));
}

Shape Shape::concat(const Shape& tail) const {
  if (rank_ + tail.rank_ > kMaxRank)
    throw ShapeError("Shape::concat: combined rank exceeds maximum");
  Shape out = *this;
  for (int i = 0; i < tail.rank_; ++i) out.extents_[out.rank_++] = tail.extents_[i];
  return out;
}

Shape Shape::with(int axis, std::int64_t extent) const {
  if (axis < 0 || axis >= rank_)
    throw BoundsError("Shape::with: axis " + std::to_string(axis) + " out of range for rank " +
                      std::to_string(rank_));
  if (extent < 0) throw ShapeError("Shape::with: negative extent " + std::to_string(extent));
  Shape out = *this;
  out.extents_[axis] = extent;
  return out;
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  for (int i = 0; i < rank_; ++i)
    if (extents_[i] != other.extents_[i]) return false;
  return true;
}

std::string Shape::str() const { return join_extents(extents_.data(), rank_); }

// --- Index ---------------------------------------------------------------

Index::Index(std::initializer_list<std::int64_t> coords) {
  if (coords.size() > kMaxLen)
    throw BoundsError("Index: length " + std::to_string(coords.size()) + " exceeds maximum " +
                      std::to_string(kMaxLen));
  for (std::int64_t c : coords) coords_[len_++] = c;
}

Index Index::zeros(int len) {
  if (len < 0 || len > kMaxLen) throw BoundsError("Index::zeros: bad length");
  Index iv;
  iv.len_ = len;
  return iv;
}

std::int64_t Index::operator[](int i) const {
  if (i < 0 || i >= len_)
    throw BoundsError("Index: position " + std::to_string(i) + " out of range for length " +
                      std::to_string(len_));
  return coords_[i];
}

void Index::set(int i, std::int64_t coord) {
  if (i < 0 || i >= len_)
    throw BoundsError("Index::set: position " + std::to_string(i) + " out of range");
  coords_[i] = coord;
}

Index Index::append(std::int64_t coord) const {
  if (len_ == kMaxLen) throw BoundsError("Index::append: maximum length reached");
  Index out = *this;
  out.coords_[out.len_++] = coord;
  return out;
}

std::string Index::str() const { return join_extents(coords_.data(), len_); }

// --- Tensor --------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{}, std::vector<float>(1, 0.0f)) {}

Tensor::Tensor(const Shape& shape, std::vector<float> data) : shape_(shape) {
  if (static_cast<std::int64_t>(data.size()) != shape.count())
    throw ShapeError("Tensor: shape " + shape.str() + " wants " + std::to_string(shape.count()) +
                     " elements, got " + std::to_string(data.size()));
  buffer_ = std::make_shared<const std::vector<float>>(std::move(data));
}

Tensor::Tensor(const Shape& shape, std::shared_ptr<const std::vector<float>> buffer,
               std::int64_t offset)
    : shape_(shape), buffer_(std::move(buffer)), offset_(offset) {}

Tensor Tensor::scalar(float value) { return Tensor(Shape{}, std::vector<float>(1, value)); }

Tensor Tensor::full(const Shape& shape, float value) {
  return Tensor(shape, std::vector<float>(static_cast<std::size_t>(shape.count()), value));
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0f); }

std::span<const float> Tensor::data() const {
  return {buffer_->data() + offset_, static_cast<std::size_t>(count())};
}

float Tensor::scalar_value() const {
  if (shape_.rank() != 0)
    throw ShapeError("scalar_value: tensor has shape " + shape_.str() + ", expected []");
  return data()[0];
}

float Tensor::at(const Index& iv) const {
  if (iv.size() != shape_.rank())
    throw BoundsError("at: index " + iv.str() + " does not cover rank " +
                      std::to_string(shape_.rank()));
  return select(iv).data()[0];
}

Tensor Tensor::select(const Index& iv) const {
  if (iv.size() > shape_.rank())
    throw BoundsError("select: index length " + std::to_string(iv.size()) + " exceeds rank " +
                      std::to_string(shape_.rank()));
  const auto strides = row_major_strides(shape_);
  std::int64_t offset = offset_;
  for (int axis = 0; axis < iv.size(); ++axis) {
    const std::int64_t c = iv[axis];
    if (c < 0 || c >= shape_[axis])
      throw BoundsError("select: coordinate " + std::to_string(c) + " out of range for axis " +
                        std::to_string(axis) + " with extent " + std::to_string(shape_[axis]));
    offset += c * strides[axis];
  }
  return Tensor(shape_.drop(iv.size()), buffer_, offset);
}

Tensor Tensor::reshape(const Shape& new_shape) const {
  if (new_shape.count() != count())
    throw ShapeError("reshape: " + std::to_string(count()) + " elements cannot fill shape " +
                     new_shape.str());
  return Tensor(new_shape, buffer_, offset_);
}

Shape shape_of(const Tensor& t) { return t.shape(); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const auto da = a.data();
  const auto db = b.data();
  return std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) == 0;
}

std::array<std::int64_t, Shape::kMaxRank> row_major_strides(const Shape& shape) {
  std::array<std::int64_t, Shape::kMaxRank> strides{};
  std::int64_t acc = 1;
  for (int axis = shape.rank() - 1; axis >= 0; --axis) {
    strides[axis] = acc;
    acc *= shape[axis];
  }
  return strides;
}

Index unflatten(const Shape& frame, std::int64_t flat) {
  Index iv = Index::zeros(frame.rank());
  for (int axis = frame.rank() - 1; axis >= 0; --axis) {
    const std::int64_t e = frame[axis];
    if (e > 0) {
      iv.set(axis, flat % e);
      flat /= e;
    }
  }
  return iv;
}

bool next_index(const Shape& frame, Index& iv) {
  for (int axis = frame.rank() - 1; axis >= 0; --axis) {
    if (iv[axis] + 1 < frame[axis]) {
      iv.set(axis, iv[axis] + 1);
      return true;
    }
    iv.set(axis, 0);
  }
  return false;
}

// --- comprehend ----------------------------------------------------------

Tensor comprehend(const Shape& frame, const std::function<Tensor(const Index&)>& f) {
  const std::int64_t n = frame.count();

  if (n == 0) {
    // No valid frame index exists; probe the all-zeros index anyway so a
    // total f still determines the cell shape, and fall back to scalar cells
    // when f rejects it.  Either way the data is empty.
    Shape cell;
    try {
      cell = f(Index::zeros(frame.rank())).shape();
    } catch (...) {
    }
    return Tensor(frame.concat(cell), {});
  }

  const Index iv0 = unflatten(frame, 0);
  const Tensor cell0 = f(iv0);
  const Shape cell_shape = cell0.shape();
  const std::int64_t cell_size = cell_shape.count();

  std::vector<float> out(static_cast<std::size_t>(n * cell_size));
  float* base = out.data();
  runtime::run_static(n, runtime::global_config(), [&](std::int64_t lo, std::int64_t hi) {
    Index iv = unflatten(frame, lo);
    for (std::int64_t i = lo; i < hi; ++i) {
      const Tensor cell = i == 0 ? cell0 : f(static_cast<const Index&>(iv));
      if (cell.shape() != cell_shape)
        throw ShapeError("comprehend: cell at " + iv.str() + " has shape " + cell.shape().str() +
                         ", but cell at " + iv0.str() + " has shape " + cell_shape.str());
      std::memcpy(base + i * cell_size, cell.data().data(),
                  static_cast<std::size_t>(cell_size) * sizeof(float));
      next_index(frame, iv);
    }
  });
  return Tensor(frame.concat(cell_shape), std::move(out));
}

// --- elementwise ---------------------------------------------------------

namespace {

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F&& f) {
  if (a.shape() != b.shape())
    throw ShapeError("ew_map2: shapes " + a.shape().str() + " and " + b.shape().str() +
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

template <class F>
Tensor apply_op(EwOp op, F&& zipper) {
  switch (op) {
    case EwOp::add: return zipper([](float x, float y) { return x + y; });
    case EwOp::sub: return zipper([](float x, float y) { return x - y; });
    case EwOp::mul: return zipper([](float x, float y) { return x * y; });
    case EwOp::div: return zipper([](float x, float y) { return x / y; });
  }
  throw Error("ew_map2: unknown op");
}

}  // namespace

Tensor ew_map2(const Tensor& a, const Tensor& b, EwOp op) {
  return apply_op(op, [&](auto f) { return zip(a, b, f); });
}

Tensor ew_map2(const Tensor& a, float b, EwOp op) {
  return apply_op(op,
                  [&](auto f) { return detail::map_unary(a, [&](float x) { return f(x, b); }); });
}

float sum_all(const Tensor& t) {
  float acc = 0.0f;
  for (float v : t.data()) acc += v;
  return acc;
}

}  // namespace tloom
