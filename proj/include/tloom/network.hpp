#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "tloom/mnist.hpp"
#include "tloom/tensor.hpp"

namespace tloom::net {

/// The six weight/bias tensors of the digit network.
struct Params {
  Tensor k1;  // [6,5,5]
  Tensor b1;  // [6]
  Tensor k2;  // [12,6,5,5]
  Tensor b2;  // [12]
  Tensor fc;  // [10,12,1,4,4]
  Tensor b;   // [10]

  /// Throws ShapeError unless all six shapes match the network signature.
  void validate() const;

  static Params zeros();
};

/// Gradient accumulator, shape-congruent with Params.
struct Grads {
  Tensor k1, b1, k2, b2, fc, b;
};

/// Layer outputs retained by forward for the backward pass.
struct ActCache {
  Tensor input;  // [28,28]
  Tensor c1;     // [6,24,24]
  Tensor s1;     // [6,12,12]
  Tensor c2;     // [12,1,8,8]
  Tensor s2;     // [12,1,4,4]
  Tensor out;    // [10,1,1,1,1]
};

struct Hyper {
  float rate = 0.05f;
  int epochs = 10;
  std::int64_t batch = 100;
  std::uint64_t seed = 42;
};

struct TrainResult {
  Params params;
  std::vector<double> epoch_mean_loss;  // one entry per epoch
};

/// Weights drawn uniformly from +-sqrt(6 / (fan_in + fan_out)), biases zero.
/// Pinned PRNG: std::mt19937_64(seed); one draw per weight, mapped to [0,1)
/// from the top 24 bits; tensors filled row-major, k1 then k2 then fc.
Params init_params(std::uint64_t seed);

/// c1 = sigmoid(mconv(I,k1,b1)); s1 = avgpool(c1); c2 = sigmoid(mconv(s1,k2,b2));
/// s2 = avgpool(c2); out = sigmoid(mconv(s2,fc,b)); yhat = reshape(out, [10]).
std::pair<Tensor, ActCache> forward(const Tensor& image, const Params& p);

/// Half squared error: 1/2 sum_i (y_i - yhat_i)^2.
float loss(const Tensor& yhat, const Tensor& y);

/// Hand-derived backpropagation through the cached activations;
/// the input-layer image gradient is not needed and not computed.
Grads backward(const ActCache& cache, const Params& p, const Tensor& y);

/// w <- w - rate * (acc / batch) for every parameter tensor; no momentum.
Params sgd_step(const Params& p, const Grads& acc, float rate, std::int64_t batch);

/// Mini-batch SGD in dataset order, no shuffling: accumulate per-example
/// gradients over each batch (fixed accumulation order, so results are
/// bitwise identical for every worker count), one averaged update per batch.
/// `on_epoch(epoch, mean_loss)` fires after each epoch when provided.
TrainResult train(const Params& p, const mnist::MnistSet& data, const Hyper& h,
                  const std::function<void(int, double)>& on_epoch = {});

/// Index of the largest element of a [10] tensor; lowest index wins ties.
int predict(const Tensor& yhat);

/// Fraction of examples with predict(forward(image)) == label.
double evaluate(const Params& p, const mnist::MnistSet& data);

/// Checkpoint: little-endian magic "TLM1", then per tensor rank (u32),
/// extents (u32 each), raw 32-bit floats; order k1,b1,k2,b2,fc,b.
void save_params(const std::filesystem::path& path, const Params& p);
Params load_params(const std::filesystem::path& path);

}  // namespace tloom::net
