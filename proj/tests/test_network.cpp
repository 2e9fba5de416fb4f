#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tloom/errors.hpp"
#include "tloom/network.hpp"
#include "tloom/runtime.hpp"
#include "tloom/synth.hpp"

using namespace tloom;
using net::Params;

namespace {

struct ConfigGuard {
  runtime::ExecConfig saved = runtime::global_config();
  ~ConfigGuard() { runtime::set_global_config(saved); }
};

bool params_equal(const Params& a, const Params& b) {
  return bitwise_equal(a.k1, b.k1) && bitwise_equal(a.b1, b.b1) && bitwise_equal(a.k2, b.k2) &&
         bitwise_equal(a.b2, b.b2) && bitwise_equal(a.fc, b.fc) && bitwise_equal(a.b, b.b);
}

Tensor poke(const Tensor& t, std::int64_t flat, float delta) {
  std::vector<float> v(t.data().begin(), t.data().end());
  v[static_cast<std::size_t>(flat)] += delta;
  return Tensor(t.shape(), std::move(v));
}

double mean_loss(const Params& p, const mnist::MnistSet& data) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    const Tensor image = data.images.select(Index{i});
    const auto [yhat, cache] = net::forward(image, p);
    acc += net::loss(yhat, mnist::one_hot(data.labels[static_cast<std::size_t>(i)]));
  }
  return acc / static_cast<double>(data.size());
}

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("init_params is deterministic and respects the fan-in/out bounds") {
  const Params p = net::init_params(42);
  p.validate();
  CHECK(params_equal(p, net::init_params(42)));
  CHECK_FALSE(params_equal(p, net::init_params(43)));

  const auto check_bounds = [](const Tensor& t, float limit) {
    bool nonzero = false;
    for (float v : t.data()) {
      CHECK(std::abs(v) <= limit);
      if (v != 0.0f) nonzero = true;
    }
    CHECK(nonzero);
  };
  check_bounds(p.k1, std::sqrt(6.0f / (25.0f + 576.0f)));
  check_bounds(p.k2, std::sqrt(6.0f / (150.0f + 64.0f)));
  check_bounds(p.fc, std::sqrt(6.0f / (192.0f + 1.0f)));
  for (float v : p.b1.data()) CHECK(v == 0.0f);
  for (float v : p.b2.data()) CHECK(v == 0.0f);
  for (float v : p.b.data()) CHECK(v == 0.0f);
}

TEST_CASE("params validation rejects a wrong shape") {
  Params p = net::init_params(1);
  p.b1 = Tensor::zeros(Shape{7});
  CHECK_THROWS_AS(p.validate(), ShapeError);
}

TEST_CASE("forward produces the documented layer shapes") {
  std::mt19937 rng(2);
  const Tensor image = testutil::random_tensor(rng, Shape{28, 28}, 0.0f, 1.0f);
  const auto [yhat, cache] = net::forward(image, net::init_params(42));
  CHECK(yhat.shape().str() == "[10]");
  CHECK(cache.c1.shape().str() == "[6,24,24]");
  CHECK(cache.s1.shape().str() == "[6,12,12]");
  CHECK(cache.c2.shape().str() == "[12,1,8,8]");
  CHECK(cache.s2.shape().str() == "[12,1,4,4]");
  CHECK(cache.out.shape().str() == "[10,1,1,1,1]");
  CHECK(bitwise_equal(cache.input, image));

  CHECK_THROWS_AS(net::forward(Tensor::zeros(Shape{27, 28}), net::init_params(42)), ShapeError);
}

TEST_CASE("all-zero parameters sigmoid everything to one half") {
  const auto [yhat, cache] = net::forward(Tensor::zeros(Shape{28, 28}), Params::zeros());
  for (float v : yhat.data()) CHECK(v == 0.5f);
}

TEST_CASE("loss is half the squared error") {
  const Tensor y = mnist::one_hot(3);
  CHECK(net::loss(Tensor::zeros(Shape{10}), y) == 0.5f);
  CHECK(net::loss(y, y) == 0.0f);
  const Tensor yhat(Shape{10}, {0, 0, 0, 0.5f, 0, 0, 0, 0, 0, 0});
  CHECK(net::loss(yhat, y) == doctest::Approx(0.125).epsilon(1e-6));
  CHECK_THROWS_AS(net::loss(Tensor::zeros(Shape{9}), y), ShapeError);
}

TEST_CASE("float loss tracks the double-precision reference") {
  std::mt19937 rng(3);
  const Tensor image = testutil::random_tensor(rng, Shape{28, 28}, 0.0f, 1.0f);
  const Params p = net::init_params(7);
  const Tensor y = mnist::one_hot(4);
  const auto [yhat, cache] = net::forward(image, p);
  const double want =
      oracle::ref_loss(oracle::from_tensor(image), oracle::from_params(p), oracle::from_tensor(y));
  CHECK(static_cast<double>(net::loss(yhat, y)) == doctest::Approx(want).epsilon(1e-4));
}

TEST_CASE("backward returns zero gradients when the target equals the output") {
  std::mt19937 rng(4);
  const Tensor image = testutil::random_tensor(rng, Shape{28, 28}, 0.0f, 1.0f);
  const Params p = net::init_params(5);
  const auto [yhat, cache] = net::forward(image, p);
  const net::Grads g = net::backward(cache, p, yhat);
  for (const Tensor* t : {&g.k1, &g.b1, &g.k2, &g.b2, &g.fc, &g.b}) {
    for (float v : t->data()) CHECK(v == 0.0f);
  }
  CHECK(g.k1.shape() == p.k1.shape());
  CHECK(g.b1.shape() == p.b1.shape());
  CHECK(g.k2.shape() == p.k2.shape());
  CHECK(g.b2.shape() == p.b2.shape());
  CHECK(g.fc.shape() == p.fc.shape());
  CHECK(g.b.shape() == p.b.shape());
}

TEST_CASE("backward spot-checks against central finite differences") {
  std::mt19937 rng(6);
  const Tensor image = testutil::random_tensor(rng, Shape{28, 28}, 0.0f, 1.0f);
  const Params p = net::init_params(9);
  const Tensor y = mnist::one_hot(2);
  const auto [yhat, cache] = net::forward(image, p);
  const net::Grads g = net::backward(cache, p, y);

  const oracle::Arr image_arr = oracle::from_tensor(image);
  const oracle::Arr y_arr = oracle::from_tensor(y);
  const float h = 1e-2f;

  const auto fd_check = [&](Tensor Params::* field, const Tensor& grad, std::int64_t flat) {
    Params lo = p;
    Params hi = p;
    lo.*field = poke(p.*field, flat, -h);
    hi.*field = poke(p.*field, flat, h);
    const double fd = (oracle::ref_loss(image_arr, oracle::from_params(hi), y_arr) -
                       oracle::ref_loss(image_arr, oracle::from_params(lo), y_arr)) /
                      (2.0 * h);
    const double an = grad.data()[static_cast<std::size_t>(flat)];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
    CHECK(std::abs(fd - an) / denom <= 1e-2);
  };

  fd_check(&Params::b, g.b, 0);
  fd_check(&Params::b, g.b, 9);
  fd_check(&Params::fc, g.fc, 100);
  fd_check(&Params::b2, g.b2, 3);
  fd_check(&Params::k2, g.k2, 777);
  fd_check(&Params::b1, g.b1, 1);
  fd_check(&Params::k1, g.k1, 60);
}

TEST_CASE("sgd_step applies the averaged update") {
  const Params p = Params::zeros();
  net::Grads g{Tensor::full(p.k1.shape(), 2.0f), Tensor::zeros(p.b1.shape()),
               Tensor::zeros(p.k2.shape()),      Tensor::zeros(p.b2.shape()),
               Tensor::zeros(p.fc.shape()),      Tensor::zeros(p.b.shape())};
  const Params q = net::sgd_step(p, g, 0.5f, 4);
  for (float v : q.k1.data()) CHECK(v == -0.25f);
  for (float v : q.b1.data()) CHECK(v == 0.0f);
  for (float v : q.fc.data()) CHECK(v == 0.0f);

  const Params r = net::sgd_step(net::init_params(3), g, 0.0f, 4);
  CHECK(params_equal(r, net::init_params(3)));

  CHECK_THROWS_AS(net::sgd_step(p, g, 0.5f, 0), Error);
}

TEST_CASE("train with zero epochs is the identity") {
  const Params p = net::init_params(42);
  const mnist::MnistSet tiny = synth::make_set(4, 11);
  net::Hyper h;
  h.epochs = 0;
  const net::TrainResult r = net::train(p, tiny, h);
  CHECK(params_equal(r.params, p));
  CHECK(r.epoch_mean_loss.empty());
}

TEST_CASE("train is deterministic and reports per-epoch losses") {
  const Params p = net::init_params(42);
  const mnist::MnistSet tiny = synth::make_set(10, 5);
  net::Hyper h;
  h.epochs = 2;
  h.batch = 5;
  int calls = 0;
  const net::TrainResult a = net::train(p, tiny, h, [&](int epoch, double loss) {
    CHECK(epoch == calls + 1);
    CHECK(loss > 0.0);
    ++calls;
  });
  const net::TrainResult b = net::train(p, tiny, h);
  CHECK(calls == 2);
  REQUIRE(a.epoch_mean_loss.size() == 2);
  CHECK(a.epoch_mean_loss == b.epoch_mean_loss);
  CHECK(params_equal(a.params, b.params));
  CHECK_FALSE(params_equal(a.params, p));
}

TEST_CASE("a few epochs of SGD reduce the mean loss on a small set") {
  const Params p = net::init_params(42);
  const mnist::MnistSet tiny = synth::make_set(10, 7);
  net::Hyper h;
  h.epochs = 5;
  h.batch = 5;
  const net::TrainResult r = net::train(p, tiny, h);
  CHECK(mean_loss(r.params, tiny) < mean_loss(p, tiny));
}

TEST_CASE("a batch larger than the dataset divides by the actual count") {
  const Params p = net::init_params(42);
  const mnist::MnistSet tiny = synth::make_set(3, 9);
  net::Hyper h;
  h.epochs = 1;
  h.batch = 100;

  // One batch of three examples must equal an explicit averaged step.
  net::Grads acc{Tensor::zeros(p.k1.shape()), Tensor::zeros(p.b1.shape()),
                 Tensor::zeros(p.k2.shape()), Tensor::zeros(p.b2.shape()),
                 Tensor::zeros(p.fc.shape()), Tensor::zeros(p.b.shape())};
  for (std::int64_t i = 0; i < tiny.size(); ++i) {
    const Tensor image = tiny.images.select(Index{i});
    const auto [yhat, cache] = net::forward(image, p);
    const net::Grads g = net::backward(cache, p, mnist::one_hot(tiny.labels[
        static_cast<std::size_t>(i)]));
    acc.k1 = acc.k1 + g.k1;
    acc.b1 = acc.b1 + g.b1;
    acc.k2 = acc.k2 + g.k2;
    acc.b2 = acc.b2 + g.b2;
    acc.fc = acc.fc + g.fc;
    acc.b = acc.b + g.b;
  }
  const Params want = net::sgd_step(p, acc, h.rate, 3);
  const net::TrainResult r = net::train(p, tiny, h);
  CHECK(params_equal(r.params, want));
}

TEST_CASE("one training step is bitwise identical across worker counts") {
  ConfigGuard guard;
  const Params p = net::init_params(42);
  const mnist::MnistSet tiny = synth::make_set(30, 13);
  net::Hyper h;
  h.epochs = 1;
  h.batch = 30;

  runtime::set_global_config({1, 4096});
  const net::TrainResult r1 = net::train(p, tiny, h);
  runtime::set_global_config({2, 4096});
  const net::TrainResult r2 = net::train(p, tiny, h);
  runtime::set_global_config({8, 4096});
  const net::TrainResult r8 = net::train(p, tiny, h);

  CHECK(params_equal(r1.params, r2.params));
  CHECK(params_equal(r1.params, r8.params));
  CHECK(r1.epoch_mean_loss == r2.epoch_mean_loss);
  CHECK(r1.epoch_mean_loss == r8.epoch_mean_loss);
}

TEST_CASE("predict takes the argmax with the lowest index winning ties") {
  CHECK(net::predict(Tensor(Shape{10}, {0, 0, 0, 0.9f, 0, 0, 0, 0, 0, 0})) == 3);
  CHECK(net::predict(Tensor(Shape{10}, {0, 0, 0.7f, 0, 0, 0.7f, 0, 0, 0, 0})) == 2);
  CHECK(net::predict(Tensor::full(Shape{10}, 0.5f)) == 0);
}

TEST_CASE("evaluate with constant outputs counts label-zero examples") {
  const mnist::MnistSet set{Tensor::zeros(Shape{4, 28, 28}), {0, 1, 0, 9}};
  CHECK(net::evaluate(Params::zeros(), set) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip bitwise and reject corruption") {
  const auto path = std::filesystem::temp_directory_path() / "tloom_test_ckpt.bin";
  const Params p = net::init_params(42);
  net::save_params(path, p);
  CHECK(params_equal(net::load_params(path), p));

  const std::vector<unsigned char> good = slurp(path);
  REQUIRE(good.size() > 8);

  auto bad_magic = good;
  bad_magic[0] ^= 0xff;
  spit(path, bad_magic);
  CHECK_THROWS_AS(net::load_params(path), FormatError);

  auto truncated = good;
  truncated.resize(good.size() - 5);
  spit(path, truncated);
  CHECK_THROWS_AS(net::load_params(path), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  spit(path, trailing);
  CHECK_THROWS_AS(net::load_params(path), FormatError);

  auto bad_shape = good;
  bad_shape[8] ^= 0x01;  // first extent of k1
  spit(path, bad_shape);
  CHECK_THROWS_AS(net::load_params(path), FormatError);

  std::filesystem::remove(path);
  CHECK_THROWS_AS(net::load_params(path), Error);
}
