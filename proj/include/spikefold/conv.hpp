#pragma once

#include "spikefold/tensor.hpp"

namespace spikefold {

// Feature maps are stored [H, W, M] (height, width, channels).
// Shared kernels are [Dk, Dk, M, N]; one kernel slice per output channel.
struct ConvKernel {
  Tensor weights;   // [Dk, Dk, M, N]
  int stride = 1;
  int padding = 0;  // symmetric zero-padding

  int kernel_size() const { return weights.extent(0); }
  int in_channels() const { return weights.extent(2); }
  int out_channels() const { return weights.extent(3); }
};

// Locally-connected kernel: a full Dk x Dk x M slice per output position and
// output channel. Weights are [Dg, Dg, Dk, Dk, M, N].
struct LocalKernel {
  Tensor weights;
  int stride = 1;
  int padding = 0;

  int out_size() const { return weights.extent(0); }
  int kernel_size() const { return weights.extent(2); }
  int in_channels() const { return weights.extent(4); }
  int out_channels() const { return weights.extent(5); }
};

// floor((in + 2*pad - k)/stride) + 1; throws DimensionError when nonpositive.
int conv_output_size(int in_size, int kernel, int stride, int padding);

// G[k,l,n] = sum_{i,j,m} K[i,j,m,n] * F_padded[k*s+i, l*s+j, m].
// Accumulation in 64-bit, result stored as 32-bit. Summation order i, j, m.
Tensor conv2d_forward(const Tensor& input, const ConvKernel& kernel);

struct ConvGrads {
  Tensor grad_input;    // [Df, Df, M]
  Tensor grad_weights;  // [Dk, Dk, M, N]
};
ConvGrads conv2d_backward(const Tensor& input, const ConvKernel& kernel, const Tensor& grad_output);

// G[k,l,n] = sum_{i,j,m} Kt[k,l,i,j,m,n] * B_padded[k*s+i, l*s+j, m].
Tensor local_conv_forward(const Tensor& input, const LocalKernel& kernel);

// Replicates a shared kernel to every output position of a map of the given
// input size; the degenerate unshared kernel.
LocalKernel broadcast_kernel(const ConvKernel& kernel, int in_size);

// out[q] = bias[q] + sum_p input[p] * weights[p,q]. Weights are [P, Q].
Tensor linear_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct LinearGrads {
  Tensor grad_input;    // [P]
  Tensor grad_weights;  // [P, Q]
  Tensor grad_bias;     // [Q]
};
LinearGrads linear_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output);

}  // namespace spikefold
