#include "oracles.hpp"

#include <cassert>
#include <cmath>

namespace oracle {

namespace {

std::int64_t product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) n *= e;
  return n;
}

std::int64_t at(const std::vector<std::int64_t>& strides,
                const std::vector<std::int64_t>& idx) {
  std::int64_t off = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) off += idx[a] * strides[a];
  return off;
}

}  // namespace

std::int64_t Arr::count() const { return product(shape); }

std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int a = static_cast<int>(shape.size()) - 2; a >= 0; --a) s[a] = s[a + 1] * shape[a + 1];
  return s;
}

bool next(const std::vector<std::int64_t>& shape, std::vector<std::int64_t>& idx) {
  for (int a = static_cast<int>(shape.size()) - 1; a >= 0; --a) {
    if (idx[a] + 1 < shape[a]) {
      ++idx[a];
      return true;
    }
    idx[a] = 0;
  }
  return false;
}

Arr conv(const Arr& in, const Arr& k) {
  assert(in.shape.size() == k.shape.size());
  const std::size_t r = in.shape.size();
  Arr out;
  out.shape.resize(r);
  for (std::size_t a = 0; a < r; ++a) out.shape[a] = in.shape[a] - k.shape[a] + 1;
  out.v.assign(static_cast<std::size_t>(product(out.shape)), 0.0);

  const auto in_strides = strides_of(in.shape);
  const auto out_strides = strides_of(out.shape);
  const auto k_strides = strides_of(k.shape);

  if (out.v.empty()) return out;
  std::vector<std::int64_t> iv(r, 0);
  do {
    double acc = 0.0;
    std::vector<std::int64_t> ov(r, 0);
    if (product(k.shape) > 0) {
      do {
        std::vector<std::int64_t> src(r);
        for (std::size_t a = 0; a < r; ++a) src[a] = iv[a] + ov[a];
        acc += in.v[static_cast<std::size_t>(at(in_strides, src))] *
               k.v[static_cast<std::size_t>(at(k_strides, ov))];
      } while (next(k.shape, ov));
    }
    out.v[static_cast<std::size_t>(at(out_strides, iv))] = acc;
  } while (next(out.shape, iv));
  return out;
}

Arr mconv(const Arr& in, const Arr& k, const Arr& b) {
  assert(k.shape.size() == in.shape.size() + 1);
  assert(b.shape.size() == 1 && b.shape[0] == k.shape[0]);
  const std::int64_t nk = k.shape[0];

  Arr slice_kernel;
  slice_kernel.shape.assign(k.shape.begin() + 1, k.shape.end());
  const std::int64_t slice_len = product(slice_kernel.shape);

  Arr out;
  out.shape.push_back(nk);
  for (std::int64_t i = 0; i < nk; ++i) {
    slice_kernel.v.assign(k.v.begin() + i * slice_len, k.v.begin() + (i + 1) * slice_len);
    Arr c = conv(in, slice_kernel);
    for (double& x : c.v) x += b.v[static_cast<std::size_t>(i)];
    if (i == 0) out.shape.insert(out.shape.end(), c.shape.begin(), c.shape.end());
    out.v.insert(out.v.end(), c.v.begin(), c.v.end());
  }
  return out;
}

Arr avgpool(const Arr& in) {
  const std::size_t r = in.shape.size();
  assert(r >= 2);
  Arr out;
  out.shape = in.shape;
  out.shape[r - 2] /= 2;
  out.shape[r - 1] /= 2;
  out.v.assign(static_cast<std::size_t>(product(out.shape)), 0.0);
  if (out.v.empty()) return out;

  const auto in_strides = strides_of(in.shape);
  const auto out_strides = strides_of(out.shape);
  std::vector<std::int64_t> iv(r, 0);
  do {
    std::vector<std::int64_t> src(iv);
    src[r - 2] *= 2;
    src[r - 1] *= 2;
    double acc = 0.0;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        std::vector<std::int64_t> p(src);
        p[r - 2] += dy;
        p[r - 1] += dx;
        acc += in.v[static_cast<std::size_t>(at(in_strides, p))];
      }
    out.v[static_cast<std::size_t>(at(out_strides, iv))] = acc / 4.0;
  } while (next(out.shape, iv));
  return out;
}

Arr backavgpool(const Arr& d) {
  const std::size_t r = d.shape.size();
  assert(r >= 2);
  Arr out;
  out.shape = d.shape;
  out.shape[r - 2] *= 2;
  out.shape[r - 1] *= 2;
  out.v.assign(static_cast<std::size_t>(product(out.shape)), 0.0);
  if (out.v.empty()) return out;

  const auto d_strides = strides_of(d.shape);
  const auto out_strides = strides_of(out.shape);
  std::vector<std::int64_t> iv(r, 0);
  do {
    std::vector<std::int64_t> src(iv);
    src[r - 2] /= 2;
    src[r - 1] /= 2;
    out.v[static_cast<std::size_t>(at(out_strides, iv))] =
        d.v[static_cast<std::size_t>(at(d_strides, src))] / 4.0;
  } while (next(out.shape, iv));
  return out;
}

Arr backweights(const Arr& d, const Arr& in) {
  const std::size_t r = in.shape.size();
  assert(d.shape.size() == r);
  Arr acc;
  acc.shape.resize(r);
  for (std::size_t a = 0; a < r; ++a) acc.shape[a] = in.shape[a] - d.shape[a] + 1;
  acc.v.assign(static_cast<std::size_t>(product(acc.shape)), 0.0);
  if (product(d.shape) == 0 || acc.v.empty()) return acc;

  const auto in_strides = strides_of(in.shape);
  const auto d_strides = strides_of(d.shape);
  const auto acc_strides = strides_of(acc.shape);

  std::vector<std::int64_t> iv(r, 0);
  do {
    std::vector<std::int64_t> ov(r, 0);
    do {
      std::vector<std::int64_t> src(r);
      for (std::size_t a = 0; a < r; ++a) src[a] = iv[a] + ov[a];
      acc.v[static_cast<std::size_t>(at(acc_strides, ov))] +=
          in.v[static_cast<std::size_t>(at(in_strides, src))] *
          d.v[static_cast<std::size_t>(at(d_strides, iv))];
    } while (next(acc.shape, ov));
  } while (next(d.shape, iv));
  return acc;
}

double backbias(const Arr& d) {
  double acc = 0.0;
  for (double x : d.v) acc += x;
  return acc;
}

Arr backin_padded(const Arr& d, const Arr& k) {
  const std::size_t r = d.shape.size();
  assert(k.shape.size() == r);

  Arr padded;
  padded.shape.resize(r);
  for (std::size_t a = 0; a < r; ++a) padded.shape[a] = d.shape[a] + 2 * (k.shape[a] - 1);
  padded.v.assign(static_cast<std::size_t>(product(padded.shape)), 0.0);
  if (product(d.shape) > 0) {
    const auto p_strides = strides_of(padded.shape);
    const auto d_strides = strides_of(d.shape);
    std::vector<std::int64_t> iv(r, 0);
    do {
      std::vector<std::int64_t> dst(r);
      for (std::size_t a = 0; a < r; ++a) dst[a] = iv[a] + k.shape[a] - 1;
      padded.v[static_cast<std::size_t>(at(p_strides, dst))] =
          d.v[static_cast<std::size_t>(at(d_strides, iv))];
    } while (next(d.shape, iv));
  }

  Arr flipped = k;
  if (!k.v.empty()) {
    const auto k_strides = strides_of(k.shape);
    std::vector<std::int64_t> ov(r, 0);
    do {
      std::vector<std::int64_t> rev(r);
      for (std::size_t a = 0; a < r; ++a) rev[a] = k.shape[a] - 1 - ov[a];
      flipped.v[static_cast<std::size_t>(at(k_strides, rev))] =
          k.v[static_cast<std::size_t>(at(k_strides, ov))];
    } while (next(k.shape, ov));
  }

  return conv(padded, flipped);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

Arr map_sigmoid(Arr a) {
  for (double& x : a.v) x = sigmoid(x);
  return a;
}

}  // namespace

double ref_loss(const Arr& image, const RefNet& net, const Arr& y) {
  const Arr c1 = map_sigmoid(mconv(image, net.k1, net.b1));
  const Arr s1 = avgpool(c1);
  const Arr c2 = map_sigmoid(mconv(s1, net.k2, net.b2));
  const Arr s2 = avgpool(c2);
  const Arr out = map_sigmoid(mconv(s2, net.fc, net.b));
  assert(out.v.size() == 10 && y.v.size() == 10);
  double acc = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double diff = y.v[static_cast<std::size_t>(i)] - out.v[static_cast<std::size_t>(i)];
    acc += diff * diff;
  }
  return 0.5 * acc;
}

Arr from_tensor(const tloom::Tensor& t) {
  Arr a;
  a.shape.reserve(static_cast<std::size_t>(t.shape().rank()));
  for (int i = 0; i < t.shape().rank(); ++i) a.shape.push_back(t.shape()[i]);
  const auto d = t.data();
  a.v.assign(d.begin(), d.end());
  return a;
}

tloom::Tensor to_tensor(const Arr& a) {
  std::vector<float> v(a.v.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(a.v[i]);
  return tloom::Tensor(tloom::Shape(std::span<const std::int64_t>(a.shape)), std::move(v));
}

RefNet from_params(const tloom::net::Params& p) {
  return RefNet{from_tensor(p.k1), from_tensor(p.b1), from_tensor(p.k2),
                from_tensor(p.b2), from_tensor(p.fc), from_tensor(p.b)};
}

}  // namespace oracle
