#pragma once

#include "tloom/tensor.hpp"

namespace tloom::nn {

// Shape functions: every kernel's output shape is computable from input
// shapes alone.  Each throws ShapeError on a violated precondition, so
// callers can validate before touching data.

/// shape(in) - shape(k) + 1; requires equal ranks and k no larger than in.
Shape conv_result_shape(const Shape& in, const Shape& k);

/// [kernel count] ++ conv_result_shape(in, k-slice); requires rank-1 bias
/// with one entry per kernel and rank(k) = rank(in) + 1.
Shape mconv_result_shape(const Shape& in, const Shape& k, const Shape& b);

/// Trailing two extents halved; requires rank >= 2 and even trailing extents.
Shape avgpool_result_shape(const Shape& in);

/// Trailing two extents doubled; requires rank >= 2.
Shape backavgpool_result_shape(const Shape& in);

/// shape(in); requires shape(d_out) = shape(in) - shape(k) + 1.
Shape backin_result_shape(const Shape& d_out, const Shape& k, const Shape& in);

/// Valid (boundary-free) sliding product:
///   out[iv] = sum over ov < shape(k) of in[iv+ov] * k[ov]
/// summed in row-major ov order.
Tensor conv(const Tensor& in, const Tensor& k);

/// Stack of biased convolutions: slice i = conv(in, k[i]) + b[i].
Tensor mconv(const Tensor& in, const Tensor& k, const Tensor& b);

/// Elementwise logistic 1 / (1 + exp(-x)); overflow saturates in float.
Tensor sigmoid(const Tensor& t);

/// Chain-rule factor through sigmoid: d_out * out * (1 - out), where `out`
/// is the forward sigmoid output.
Tensor backsigmoid(const Tensor& d_out, const Tensor& out);

/// Non-overlapping 2x2 mean over the trailing two axes.
Tensor avgpool(const Tensor& t);

/// Adjoint of avgpool: spreads each error value evenly over its 2x2 block.
Tensor backavgpool(const Tensor& d_out);

/// Weight gradient of conv: conv(in, d_out).
Tensor backweights(const Tensor& d_out, const Tensor& in);

/// Bias gradient of conv: plain sum of the error.
float backbias(const Tensor& d_out);

/// Input gradient of conv: boundary-clipped correlation
///   out[iv] = sum over u < shape(k), 0 <= iv-u < shape(d_out),
///             of k[u] * d_out[iv-u]
/// equal to the full convolution of zero-padded d_out with k.
Tensor backin(const Tensor& d_out, const Tensor& k, const Tensor& in);

}  // namespace tloom::nn
