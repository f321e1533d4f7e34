#pragma once

// Differentiable operators needed by the probe architectures. Convolutions
// are valid cross-correlations with stride 1 and no padding; transposed
// convolutions are their exact adjoints (out extent = in + kernel - 1).

#include <utility>
#include <vector>

#include "blm/tensor/tensor.hpp"

namespace blm {

// Negative-side slope of the hidden-layer activation.
inline constexpr double kLeakySlope = 0.01;

// y[b,o] = Σ_i x[b,i]·w[o,i] + bias[o].  x:[B,In] w:[Out,In] bias:[Out]
template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias);

// x:[B,Cin,H,W] k:[Cout,Cin,Kh,Kw] bias:[Cout] -> [B,Cout,H-Kh+1,W-Kw+1]
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& bias);

// x:[B,Cin,D,H,W] k:[Cout,Cin,Kd,Kh,Kw] bias:[Cout] -> [B,Cout,D-Kd+1,H-Kh+1,W-Kw+1]
template <class T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& bias);

// x:[B,Cin,H,W] k:[Cin,Cout,Kh,Kw] bias:[Cout] -> [B,Cout,H+Kh-1,W+Kw-1]
template <class T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& k,
                                const BasicTensor<T>& bias);

// x:[B,Cin,D,H,W] k:[Cin,Cout,Kd,Kh,Kw] bias:[Cout] -> [B,Cout,D+Kd-1,H+Kh-1,W+Kw-1]
template <class T>
BasicTensor<T> conv_transpose3d(const BasicTensor<T>& x, const BasicTensor<T>& k,
                                const BasicTensor<T>& bias);

template <class T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope = static_cast<T>(kLeakySlope));

// Same values, new shape with identical element count.
template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// Columns [begin, begin+count) of a [B,N] matrix.
template <class T>
BasicTensor<T> slice_columns(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count);

// Scalar Σ x.
template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x);

// Scalar Σ x·weights where `weights` is treated as a constant.
template <class T>
BasicTensor<T> inner_product(const BasicTensor<T>& x, const BasicTensor<T>& weights);

// Σ_k coeff_k·t_k over same-shaped tensors.
template <class T>
BasicTensor<T> weighted_sum(const std::vector<std::pair<BasicTensor<T>, T>>& terms);

// Shape inference shared by the ops above and by model summaries.
Shape conv_output_shape(const Shape& input, const Shape& kernel, bool transposed);

}  // namespace blm
