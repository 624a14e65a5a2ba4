#pragma once

// Differentiable operations. Every function builds a new Tensor and, when an
// input requires grad, registers the matching vector-Jacobian product.
//
// Binary elementwise ops accept equal shapes or a single-element operand,
// which is broadcast.

#include <cstddef>

#include "dtsl/tensor.hpp"

namespace dtsl {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor rsub(double a, const Tensor& b);  // a - b

Tensor exp(const Tensor& a);
// Throws std::domain_error if any element is <= 0; pair with clamp_min.
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum over one axis; the axis is removed from the result shape.
Tensor sum_axis(const Tensor& a, std::size_t axis);
// Sum over every axis except `axis`; result shape is [a.size(axis)].
Tensor sum_except_axis(const Tensor& a, std::size_t axis);

// Max-subtracted softmax. Throws std::domain_error on NaN input.
Tensor softmax(const Tensor& logits, std::size_t axis);
Tensor log_softmax(const Tensor& logits, std::size_t axis);

// Cross-correlation of [B,Cin,H,W] with [Cout,Cin,kh,kw].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);
// Adds bias[C] to every pixel of channel C in a [B,C,H,W] tensor.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);
Tensor upsample_nearest2x(const Tensor& input);
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace dtsl
