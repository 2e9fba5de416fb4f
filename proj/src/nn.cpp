#include "tloom/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace tloom::nn {

namespace {

// Input offset of every kernel element, in row-major kernel order.  Turns the
// rank-generic sliding product into one flat loop per output element.
std::vector<std::int64_t> conv_taps(const Shape& in, const Shape& k) {
  const auto in_strides = row_major_strides(in);
  std::vector<std::int64_t> taps(static_cast<std::size_t>(k.count()));
  if (taps.empty()) return taps;
  Index ov = Index::zeros(k.rank());
  for (auto& tap : taps) {
    std::int64_t off = 0;
    for (int a = 0; a < k.rank(); ++a) off += ov[a] * in_strides[a];
    tap = off;
    next_index(k, ov);
  }
  return taps;
}

inline float tap_dot(const float* in, const float* k, const std::int64_t* taps,
                     std::int64_t n) {
  float acc = 0.0f;
  for (std::int64_t j = 0; j < n; ++j) acc += in[taps[j]] * k[j];
  return acc;
}

}  // namespace

Shape conv_result_shape(const Shape& in, const Shape& k) {
  if (in.rank() != k.rank())
    throw ShapeError("conv: input rank " + std::to_string(in.rank()) + " and kernel rank " +
                     std::to_string(k.rank()) + " differ");
  std::vector<std::int64_t> out(static_cast<std::size_t>(in.rank()));
  for (int a = 0; a < in.rank(); ++a) {
    if (k[a] > in[a])
      throw ShapeError("conv: kernel shape " + k.str() + " exceeds input shape " + in.str() +
                       " on axis " + std::to_string(a));
    out[a] = in[a] - k[a] + 1;
  }
  return Shape(std::span<const std::int64_t>(out));
}

Shape mconv_result_shape(const Shape& in, const Shape& k, const Shape& b) {
  if (b.rank() != 1) throw ShapeError("mconv: bias shape " + b.str() + " is not rank 1");
  if (k.rank() != in.rank() + 1)
    throw ShapeError("mconv: kernel stack rank " + std::to_string(k.rank()) +
                     " must be input rank + 1 = " + std::to_string(in.rank() + 1));
  if (k.rank() < 1 || k[0] != b[0])
    throw ShapeError("mconv: " + std::to_string(k.rank() < 1 ? 0 : k[0]) + " kernels but " +
                     std::to_string(b[0]) + " biases");
  return b.concat(conv_result_shape(in, k.drop(1)));
}

Shape avgpool_result_shape(const Shape& in) {
  if (in.rank() < 2)
    throw ShapeError("avgpool: rank " + std::to_string(in.rank()) + " input, need rank >= 2");
  std::vector<std::int64_t> out(static_cast<std::size_t>(in.rank()));
  for (int a = 0; a < in.rank(); ++a) {
    if (a >= in.rank() - 2) {
      if (in[a] % 2 != 0)
        throw ShapeError("avgpool: axis " + std::to_string(a) + " extent " +
                         std::to_string(in[a]) + " is not even");
      out[a] = in[a] / 2;
    } else {
      out[a] = in[a];
    }
  }
  return Shape(std::span<const std::int64_t>(out));
}

Shape backavgpool_result_shape(const Shape& in) {
  if (in.rank() < 2)
    throw ShapeError("backavgpool: rank " + std::to_string(in.rank()) +
                     " input, need rank >= 2");
  std::vector<std::int64_t> out(static_cast<std::size_t>(in.rank()));
  for (int a = 0; a < in.rank(); ++a) out[a] = a >= in.rank() - 2 ? in[a] * 2 : in[a];
  return Shape(std::span<const std::int64_t>(out));
}

Shape backin_result_shape(const Shape& d_out, const Shape& k, const Shape& in) {
  const Shape expected = conv_result_shape(in, k);
  if (d_out != expected)
    throw ShapeError("backin: error shape " + d_out.str() + " does not match shape(in)" +
                     " - shape(k) + 1 = " + expected.str());
  return in;
}

Tensor conv(const Tensor& in, const Tensor& k) {
  const Shape out_shape = conv_result_shape(in.shape(), k.shape());
  const auto taps = conv_taps(in.shape(), k.shape());
  const auto in_strides = row_major_strides(in.shape());
  const float* pin = in.data().data();
  const float* pk = k.data().data();
  const std::int64_t nk = k.count();
  return comprehend_scalar(out_shape, [&](const Index& iv) {
    std::int64_t base = 0;
    for (int a = 0; a < iv.size(); ++a) base += iv[a] * in_strides[a];
    return tap_dot(pin + base, pk, taps.data(), nk);
  });
}

Tensor mconv(const Tensor& in, const Tensor& k, const Tensor& b) {
  const Shape out_shape = mconv_result_shape(in.shape(), k.shape(), b.shape());
  const Shape k_slice = k.shape().drop(1);
  const auto taps = conv_taps(in.shape(), k_slice);
  const auto in_strides = row_major_strides(in.shape());
  const std::int64_t slice_len = k_slice.count();
  const float* pin = in.data().data();
  const float* pk = k.data().data();
  const float* pb = b.data().data();
  return comprehend_scalar(out_shape, [&](const Index& iv) {
    const std::int64_t i = iv[0];
    std::int64_t base = 0;
    for (int a = 1; a < iv.size(); ++a) base += iv[a] * in_strides[a - 1];
    return tap_dot(pin + base, pk + i * slice_len, taps.data(), slice_len) + pb[i];
  });
}

Tensor sigmoid(const Tensor& t) {
  return detail::map_unary(t, [](float x) { return 1.0f / (1.0f + std::exp(-x)); });
}

Tensor backsigmoid(const Tensor& d_out, const Tensor& out) {
  return detail::map_binary(d_out, out, [](float d, float o) { return d * o * (1.0f - o); });
}

Tensor avgpool(const Tensor& t) {
  const Shape out_shape = avgpool_result_shape(t.shape());
  const auto strides = row_major_strides(t.shape());
  const int r = t.shape().rank();
  const std::int64_t row = strides[r - 2];
  const float* pin = t.data().data();
  return comprehend_scalar(out_shape, [&](const Index& iv) {
    std::int64_t base = 0;
    for (int a = 0; a < r; ++a) base += iv[a] * strides[a] * (a >= r - 2 ? 2 : 1);
    return (pin[base] + pin[base + 1] + pin[base + row] + pin[base + row + 1]) * 0.25f;
  });
}

Tensor backavgpool(const Tensor& d_out) {
  const Shape out_shape = backavgpool_result_shape(d_out.shape());
  const auto strides = row_major_strides(d_out.shape());
  const int r = d_out.shape().rank();
  const float* pd = d_out.data().data();
  return comprehend_scalar(out_shape, [&](const Index& iv) {
    std::int64_t base = 0;
    for (int a = 0; a < r; ++a) base += (a >= r - 2 ? iv[a] / 2 : iv[a]) * strides[a];
    return pd[base] * 0.25f;
  });
}

Tensor backweights(const Tensor& d_out, const Tensor& in) { return conv(in, d_out); }

float backbias(const Tensor& d_out) { return sum_all(d_out); }

namespace {

// Clipped correlation: for output index iv, axis a sums kernel coordinates
// u = off[a]..off[a]+cnt[a]-1 against error coordinates iv[a]-u.  Summation
// nests per axis, innermost axis first.
struct BackinBox {
  const float* d;
  const float* k;
  std::array<std::int64_t, Shape::kMaxRank> d_strides;
  std::array<std::int64_t, Shape::kMaxRank> k_strides;
  int rank;

  float sum(const std::int64_t* cnt, int axis, std::int64_t d_off, std::int64_t k_off) const {
    if (axis == rank - 1) {
      const float* dp = d + d_off;
      const float* kp = k + k_off;
      float acc = 0.0f;
      for (std::int64_t u = 0; u < cnt[axis]; ++u) acc += kp[u] * dp[-u];
      return acc;
    }
    float acc = 0.0f;
    for (std::int64_t u = 0; u < cnt[axis]; ++u)
      acc += sum(cnt, axis + 1, d_off - u * d_strides[axis], k_off + u * k_strides[axis]);
    return acc;
  }
};

}  // namespace

Tensor backin(const Tensor& d_out, const Tensor& k, const Tensor& in) {
  const Shape out_shape = backin_result_shape(d_out.shape(), k.shape(), in.shape());
  const Shape& dsh = d_out.shape();
  const Shape& ksh = k.shape();
  const int r = out_shape.rank();

  const BackinBox box{d_out.data().data(), k.data().data(), row_major_strides(dsh),
                      row_major_strides(ksh), r};

  if (r == 0) return Tensor::scalar(box.d[0] * box.k[0]);

  return comprehend_scalar(out_shape, [&](const Index& iv) {
    std::array<std::int64_t, Shape::kMaxRank> cnt{};
    std::int64_t d_base = 0;
    std::int64_t k_base = 0;
    for (int a = 0; a < r; ++a) {
      const std::int64_t i = iv[a];
      const std::int64_t off = i < dsh[a] ? 0 : i - dsh[a] + 1;
      cnt[a] = std::min(std::min(dsh[a], i + 1), ksh[a] - off);
      d_base += (i - off) * box.d_strides[a];
      k_base += off * box.k_strides[a];
    }
    return box.sum(cnt.data(), 0, d_base, k_base);
  });
}

}  // namespace tloom::nn
