#include "tloom/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "tloom/nn.hpp"
#include "tloom/runtime.hpp"

namespace tloom::net {

namespace {

const Shape kShapeK1{6, 5, 5};
const Shape kShapeB1{6};
const Shape kShapeK2{12, 6, 5, 5};
const Shape kShapeB2{12};
const Shape kShapeFc{10, 12, 1, 4, 4};
const Shape kShapeB{10};
const Shape kShapeImage{28, 28};

void check_shape(const Tensor& t, const Shape& want, const char* name) {
  if (t.shape() != want)
    throw ShapeError(std::string("params: ") + name + " has shape " + t.shape().str() +
                     ", expected " + want.str());
}

// Example-level dispatch: each frame element is a whole forward+backward
// pass, so parallelism pays off at any count; the element threshold stays
// with the per-tensor comprehensions.
runtime::ExecConfig batch_config() {
  runtime::ExecConfig cfg = runtime::global_config();
  cfg.parallel_threshold = 1;
  return cfg;
}

}  // namespace

void Params::validate() const {
  check_shape(k1, kShapeK1, "k1");
  check_shape(b1, kShapeB1, "b1");
  check_shape(k2, kShapeK2, "k2");
  check_shape(b2, kShapeB2, "b2");
  check_shape(fc, kShapeFc, "fc");
  check_shape(b, kShapeB, "b");
}

Params Params::zeros() {
  return Params{Tensor::zeros(kShapeK1), Tensor::zeros(kShapeB1), Tensor::zeros(kShapeK2),
                Tensor::zeros(kShapeB2), Tensor::zeros(kShapeFc), Tensor::zeros(kShapeB)};
}

Params init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto uniform_pm = [&rng](float limit) {
    // Top 24 bits -> [0,1) exactly representable in float, then to [-limit, limit).
    const float u = static_cast<float>(rng() >> 40) * 0x1p-24f;
    return (u * 2.0f - 1.0f) * limit;
  };
  const auto glorot = [&](const Shape& shape, std::int64_t fan_in, std::int64_t fan_out) {
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::vector<float> v(static_cast<std::size_t>(shape.count()));
    for (auto& x : v) x = uniform_pm(limit);
    return Tensor(shape, std::move(v));
  };

  Params p;
  // fan_in = one kernel's element count; fan_out = one output cell's count.
  p.k1 = glorot(kShapeK1, 5 * 5, 24 * 24);
  p.k2 = glorot(kShapeK2, 6 * 5 * 5, 1 * 8 * 8);
  p.fc = glorot(kShapeFc, 12 * 1 * 4 * 4, 1);
  p.b1 = Tensor::zeros(kShapeB1);
  p.b2 = Tensor::zeros(kShapeB2);
  p.b = Tensor::zeros(kShapeB);
  return p;
}

std::pair<Tensor, ActCache> forward(const Tensor& image, const Params& p) {
  p.validate();
  if (image.shape() != kShapeImage)
    throw ShapeError("forward: image has shape " + image.shape().str() + ", expected " +
                     kShapeImage.str());

  ActCache cache;
  cache.input = image;
  cache.c1 = nn::sigmoid(nn::mconv(image, p.k1, p.b1));
  cache.s1 = nn::avgpool(cache.c1);
  cache.c2 = nn::sigmoid(nn::mconv(cache.s1, p.k2, p.b2));
  cache.s2 = nn::avgpool(cache.c2);
  cache.out = nn::sigmoid(nn::mconv(cache.s2, p.fc, p.b));
  return {cache.out.reshape(Shape{10}), cache};
}

float loss(const Tensor& yhat, const Tensor& y) {
  if (yhat.shape() != Shape{10} || y.shape() != Shape{10})
    throw ShapeError("loss: shapes " + yhat.shape().str() + " and " + y.shape().str() +
                     ", expected [10] and [10]");
  const float* ph = yhat.data().data();
  const float* py = y.data().data();
  float acc = 0.0f;
  for (int i = 0; i < 10; ++i) {
    const float d = py[i] - ph[i];
    acc += d * d;
  }
  return 0.5f * acc;
}

namespace {

// Backward pass of one sigmoid(mconv(...)) layer.  d_act is the error at the
// layer's activation output; returns kernel/bias gradients and, on request,
// the error propagated to the layer input.
struct LayerBack {
  Tensor grad_k;
  Tensor grad_b;
  Tensor d_in;
};

LayerBack mconv_layer_backward(const Tensor& d_act, const Tensor& act_out, const Tensor& in,
                               const Tensor& k, bool need_d_in) {
  const Tensor d_z = nn::backsigmoid(d_act, act_out);
  const std::int64_t nk = k.shape()[0];

  LayerBack lb;
  lb.grad_k = comprehend(Shape{nk}, [&](const Index& i) {
    return nn::backweights(d_z.select(i), in);
  });
  lb.grad_b = comprehend_scalar(Shape{nk}, [&](const Index& i) {
    return nn::backbias(d_z.select(i));
  });
  if (need_d_in) {
    Tensor acc = Tensor::zeros(in.shape());
    for (std::int64_t i = 0; i < nk; ++i)
      acc = acc + nn::backin(d_z.select(Index{i}), k.select(Index{i}), in);
    lb.d_in = acc;
  }
  return lb;
}

}  // namespace

Grads backward(const ActCache& cache, const Params& p, const Tensor& y) {
  const Tensor yhat = cache.out.reshape(Shape{10});
  const Tensor d_yhat = yhat - y;

  Grads g;

  const LayerBack fc_back = mconv_layer_backward(d_yhat.reshape(cache.out.shape()), cache.out,
                                                 cache.s2, p.fc, /*need_d_in=*/true);
  g.fc = fc_back.grad_k;
  g.b = fc_back.grad_b;

  const Tensor d_c2 = nn::backavgpool(fc_back.d_in);
  const LayerBack l2_back =
      mconv_layer_backward(d_c2, cache.c2, cache.s1, p.k2, /*need_d_in=*/true);
  g.k2 = l2_back.grad_k;
  g.b2 = l2_back.grad_b;

  const Tensor d_c1 = nn::backavgpool(l2_back.d_in);
  const LayerBack l1_back =
      mconv_layer_backward(d_c1, cache.c1, cache.input, p.k1, /*need_d_in=*/false);
  g.k1 = l1_back.grad_k;
  g.b1 = l1_back.grad_b;

  return g;
}

Params sgd_step(const Params& p, const Grads& acc, float rate, std::int64_t batch) {
  if (batch < 1) throw Error("sgd_step: batch must be >= 1");
  const auto step = [&](const Tensor& w, const Tensor& g) {
    return detail::map_binary(w, g, [rate, batch](float wv, float gv) {
      return wv - rate * (gv / static_cast<float>(batch));
    });
  };
  return Params{step(p.k1, acc.k1), step(p.b1, acc.b1), step(p.k2, acc.k2),
                step(p.b2, acc.b2), step(p.fc, acc.fc), step(p.b, acc.b)};
}

namespace {

constexpr std::int64_t kGradFloats = 150 + 6 + 1800 + 12 + 1920 + 10;  // 3898

void write_flat(const Grads& g, float* out) {
  const Tensor* parts[] = {&g.k1, &g.b1, &g.k2, &g.b2, &g.fc, &g.b};
  for (const Tensor* t : parts) {
    const auto d = t->data();
    std::memcpy(out, d.data(), d.size() * sizeof(float));
    out += d.size();
  }
}

Grads read_flat(const float* in) {
  Grads g;
  Tensor* parts[] = {&g.k1, &g.b1, &g.k2, &g.b2, &g.fc, &g.b};
  const Shape* shapes[] = {&kShapeK1, &kShapeB1, &kShapeK2, &kShapeB2, &kShapeFc, &kShapeB};
  for (int i = 0; i < 6; ++i) {
    const std::int64_t n = shapes[i]->count();
    *parts[i] = Tensor(*shapes[i], std::vector<float>(in, in + n));
    in += n;
  }
  return g;
}

}  // namespace

TrainResult train(const Params& p, const mnist::MnistSet& data, const Hyper& h,
                  const std::function<void(int, double)>& on_epoch) {
  p.validate();
  if (data.size() == 0) throw Error("train: empty dataset");
  if (h.epochs < 0) throw Error("train: negative epoch count");
  if (!(h.rate > 0.0f)) throw Error("train: rate must be > 0");

  const auto groups = mnist::batches(data, h.batch);
  const std::int64_t cell = kGradFloats + 1;  // per-example grads + loss

  TrainResult result;
  result.params = p;
  result.epoch_mean_loss.reserve(static_cast<std::size_t>(h.epochs));

  for (int epoch = 1; epoch <= h.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& group : groups) {
      const std::int64_t m = static_cast<std::int64_t>(group.size());
      const Params& cur = result.params;
      const auto cells =
          runtime::parallel_build(m, cell, batch_config(), [&](std::int64_t i, float* out) {
            const mnist::Example& ex = group[static_cast<std::size_t>(i)];
            const auto [yhat, cache] = forward(ex.image, cur);
            write_flat(backward(cache, cur, ex.target), out);
            out[kGradFloats] = loss(yhat, ex.target);
          });

      // Reduce in example order: float accumulation order is pinned, so the
      // update is bitwise independent of the worker count.
      std::vector<float> acc(static_cast<std::size_t>(kGradFloats), 0.0f);
      for (std::int64_t i = 0; i < m; ++i) {
        const float* row = cells.data() + i * cell;
        for (std::int64_t j = 0; j < kGradFloats; ++j) acc[static_cast<std::size_t>(j)] += row[j];
        loss_sum += row[kGradFloats];
      }
      result.params = sgd_step(result.params, read_flat(acc.data()), h.rate, m);
    }
    const double mean_loss = loss_sum / static_cast<double>(data.size());
    result.epoch_mean_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return result;
}

int predict(const Tensor& yhat) {
  if (yhat.shape() != Shape{10})
    throw ShapeError("predict: shape " + yhat.shape().str() + ", expected [10]");
  const float* v = yhat.data().data();
  int best = 0;
  for (int i = 1; i < 10; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double evaluate(const Params& p, const mnist::MnistSet& data) {
  p.validate();
  const std::int64_t n = data.size();
  if (n == 0) throw Error("evaluate: empty dataset");

  std::vector<int> pred(static_cast<std::size_t>(n));
  runtime::run_static(n, batch_config(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const Tensor image = data.images.select(Index{i});
      pred[static_cast<std::size_t>(i)] = predict(forward(image, p).first);
    }
  });

  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < n; ++i)
    if (pred[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(i)]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

constexpr unsigned char kMagic[4] = {'T', 'L', 'M', '1'};

void append_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

std::uint32_t read_u32_le(std::span<const unsigned char> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size())
    throw FormatError("checkpoint: truncated at byte " + std::to_string(pos));
  const std::uint32_t v = std::uint32_t(bytes[pos]) | (std::uint32_t(bytes[pos + 1]) << 8) |
                          (std::uint32_t(bytes[pos + 2]) << 16) |
                          (std::uint32_t(bytes[pos + 3]) << 24);
  pos += 4;
  return v;
}

void append_tensor(std::vector<unsigned char>& out, const Tensor& t) {
  append_u32_le(out, static_cast<std::uint32_t>(t.shape().rank()));
  for (int a = 0; a < t.shape().rank(); ++a)
    append_u32_le(out, static_cast<std::uint32_t>(t.shape()[a]));
  for (float v : t.data()) append_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

Tensor read_tensor(std::span<const unsigned char> bytes, std::size_t& pos, const Shape& want,
                   const char* name) {
  const std::uint32_t rank = read_u32_le(bytes, pos);
  if (rank > static_cast<std::uint32_t>(Shape::kMaxRank))
    throw FormatError("checkpoint: tensor " + std::string(name) + " has rank " +
                      std::to_string(rank));
  std::vector<std::int64_t> extents(rank);
  for (auto& e : extents) e = read_u32_le(bytes, pos);
  const Shape shape{std::span<const std::int64_t>(extents)};
  if (shape != want)
    throw FormatError("checkpoint: tensor " + std::string(name) + " has shape " + shape.str() +
                      ", expected " + want.str());
  std::vector<float> data(static_cast<std::size_t>(shape.count()));
  for (auto& v : data) v = std::bit_cast<float>(read_u32_le(bytes, pos));
  return Tensor(shape, std::move(data));
}

}  // namespace

void save_params(const std::filesystem::path& path, const Params& p) {
  p.validate();
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  const Tensor* parts[] = {&p.k1, &p.b1, &p.k2, &p.b2, &p.fc, &p.b};
  for (const Tensor* t : parts) append_tensor(out, *t);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open checkpoint for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failure on checkpoint: " + path.string());
}

Params load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (f.bad()) throw FormatError("read failure on checkpoint: " + path.string());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic, expected \"TLM1\"");
  std::size_t pos = 4;

  Params p;
  p.k1 = read_tensor(bytes, pos, kShapeK1, "k1");
  p.b1 = read_tensor(bytes, pos, kShapeB1, "b1");
  p.k2 = read_tensor(bytes, pos, kShapeK2, "k2");
  p.b2 = read_tensor(bytes, pos, kShapeB2, "b2");
  p.fc = read_tensor(bytes, pos, kShapeFc, "fc");
  p.b = read_tensor(bytes, pos, kShapeB, "b");
  if (pos != bytes.size())
    throw FormatError("checkpoint: " + std::to_string(bytes.size() - pos) + " trailing bytes");
  return p;
}

}  // namespace tloom::net
