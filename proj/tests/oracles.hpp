#pragma once

// Independent naive reference implementations used to cross-check the
// library: plain double-precision nested loops over flat row-major buffers
// with their own index arithmetic.  Nothing here reuses library kernels.

#include <cstdint>
#include <vector>

#include "tloom/network.hpp"
#include "tloom/tensor.hpp"

namespace oracle {

struct Arr {
  std::vector<std::int64_t> shape;
  std::vector<double> v;

  std::int64_t count() const;
};

std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape);

/// Advances a row-major odometer; returns false after the last index.
bool next(const std::vector<std::int64_t>& shape, std::vector<std::int64_t>& idx);

Arr conv(const Arr& in, const Arr& k);
Arr mconv(const Arr& in, const Arr& k, const Arr& b);
Arr avgpool(const Arr& in);
Arr backavgpool(const Arr& d);

/// Scatter-accumulate form of the weight gradient:
/// acc[ov] += in[iv+ov] * d[iv] over all valid iv, ov.
Arr backweights(const Arr& d, const Arr& in);

double backbias(const Arr& d);

/// Input gradient via the textbook route: embed d in a zero array padded by
/// (k-1) per axis, reverse k on every axis, then run the naive conv.
Arr backin_padded(const Arr& d, const Arr& k);

double sigmoid(double x);

/// Full-network double-precision forward pass + half squared error, composed
/// from the oracles above; used as the finite-difference reference.
struct RefNet {
  Arr k1, b1, k2, b2, fc, b;
};

double ref_loss(const Arr& image, const RefNet& net, const Arr& y);

// Conversions between the library's tensors and oracle arrays (data copies).
Arr from_tensor(const tloom::Tensor& t);
tloom::Tensor to_tensor(const Arr& a);
RefNet from_params(const tloom::net::Params& p);

}  // namespace oracle
