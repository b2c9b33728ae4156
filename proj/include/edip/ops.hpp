#pragma once

#include "edip/tensor.hpp"

namespace edip {

// Elementwise / reduction primitives. All record on the active tape when any
// input participates in gradient computation.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

// input [Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout] (may be undefined).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

Tensor bilinear_upsample_2x(const Tensor& input);  // [C,H,W] -> [C,2H,2W]

Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);

// x [C,H,W]; gain/bias [C]; statistics per group of C/num_groups channels.
Tensor group_norm(const Tensor& x, int num_groups, const Tensor& gain,
                  const Tensor& bias, double epsilon = 1e-5);

Tensor concat_channels(const Tensor& a, const Tensor& b);  // along dim 0

Tensor reshape(const Tensor& x, Shape new_shape);

// Forward differences over the last two axes (no wraparound); output is one
// shorter along the differenced axis.
Tensor diff_h(const Tensor& x);  // along columns (last axis)
Tensor diff_v(const Tensor& x);  // along rows (second-to-last axis)

Tensor l1_norm(const Tensor& x);     // scalar; subgradient sign with sign(0)=0
Tensor l2_norm_sq(const Tensor& x);  // scalar
Tensor mean(const Tensor& x);        // scalar
Tensor sum(const Tensor& x);         // scalar

}  // namespace edip
