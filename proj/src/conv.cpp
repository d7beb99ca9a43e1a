#include "spikefold/conv.hpp"

#include <vector>

namespace spikefold {

namespace {

void check_map(const Tensor& input, const char* where) {
  if (input.rank() != 3)
    throw DimensionError(std::string(where) + ": expected a [H,W,M] map, got " + shape_str(input.shape()));
  if (input.extent(0) != input.extent(1))
    throw DimensionError(std::string(where) + ": maps must be square, got " + shape_str(input.shape()));
}

void check_conv_pair(const Tensor& input, const ConvKernel& kernel, const char* where) {
  check_map(input, where);
  if (kernel.weights.rank() != 4 || kernel.weights.extent(0) != kernel.weights.extent(1))
    throw DimensionError(std::string(where) + ": kernel must be [Dk,Dk,M,N], got " + shape_str(kernel.weights.shape()));
  if (input.extent(2) != kernel.in_channels())
    throw DimensionError(std::string(where) + ": input " + shape_str(input.shape()) + " vs kernel " +
                         shape_str(kernel.weights.shape()) + " (channel mismatch)");
  if (kernel.stride < 1) throw DimensionError(std::string(where) + ": stride must be >= 1");
  if (kernel.padding < 0) throw DimensionError(std::string(where) + ": padding must be >= 0");
}

}  // namespace

int conv_output_size(int in_size, int kernel, int stride, int padding) {
  const int span = in_size + 2 * padding - kernel;
  if (span < 0 || stride < 1)
    throw DimensionError("convolution of size-" + std::to_string(in_size) + " input with kernel " +
                         std::to_string(kernel) + ", stride " + std::to_string(stride) + ", padding " +
                         std::to_string(padding) + " has no valid output");
  return span / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const ConvKernel& kernel) {
  check_conv_pair(input, kernel, "conv2d_forward");
  const int df = input.extent(0), m_ch = input.extent(2);
  const int dk = kernel.kernel_size(), n_ch = kernel.out_channels();
  const int s = kernel.stride, p = kernel.padding;
  const int dg = conv_output_size(df, dk, s, p);

  Tensor out({dg, dg, n_ch});
  std::vector<double> acc(static_cast<size_t>(n_ch));
  const float* f = input.data();
  const float* w = kernel.weights.data();
  for (int k = 0; k < dg; ++k) {
    for (int l = 0; l < dg; ++l) {
      for (int n = 0; n < n_ch; ++n) acc[static_cast<size_t>(n)] = 0.0;
      for (int i = 0; i < dk; ++i) {
        const int y = k * s + i - p;
        if (y < 0 || y >= df) continue;
        for (int j = 0; j < dk; ++j) {
          const int x = l * s + j - p;
          if (x < 0 || x >= df) continue;
          const float* frow = f + (static_cast<size_t>(y) * df + x) * m_ch;
          const float* wrow = w + (static_cast<size_t>(i) * dk + j) * m_ch * n_ch;
          for (int m = 0; m < m_ch; ++m) {
            const double fv = frow[m];
            const float* wn = wrow + static_cast<size_t>(m) * n_ch;
            for (int n = 0; n < n_ch; ++n) acc[static_cast<size_t>(n)] += static_cast<double>(wn[n]) * fv;
          }
        }
      }
      float* orow = out.data() + (static_cast<size_t>(k) * dg + l) * n_ch;
      for (int n = 0; n < n_ch; ++n) orow[n] = static_cast<float>(acc[static_cast<size_t>(n)]);
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvKernel& kernel, const Tensor& grad_output) {
  check_conv_pair(input, kernel, "conv2d_backward");
  const int df = input.extent(0), m_ch = input.extent(2);
  const int dk = kernel.kernel_size(), n_ch = kernel.out_channels();
  const int s = kernel.stride, p = kernel.padding;
  const int dg = conv_output_size(df, dk, s, p);
  if (grad_output.shape() != std::vector<int>{dg, dg, n_ch})
    throw DimensionError("conv2d_backward: grad_output " + shape_str(grad_output.shape()) + " vs expected " +
                         shape_str({dg, dg, n_ch}));

  // Kernel transposed to [Dk,Dk,N,M] so the input-gradient inner loop runs
  // over contiguous m with one independent accumulator per m.
  std::vector<double> wt(static_cast<size_t>(dk) * dk * n_ch * m_ch);
  {
    const float* w = kernel.weights.data();
    for (int i = 0; i < dk; ++i)
      for (int j = 0; j < dk; ++j)
        for (int m = 0; m < m_ch; ++m)
          for (int n = 0; n < n_ch; ++n)
            wt[((static_cast<size_t>(i) * dk + j) * n_ch + n) * m_ch + m] =
                w[((static_cast<size_t>(i) * dk + j) * m_ch + m) * n_ch + n];
  }

  std::vector<double> gi(static_cast<size_t>(df) * df * m_ch, 0.0);
  std::vector<double> gw(static_cast<size_t>(dk) * dk * m_ch * n_ch, 0.0);
  const float* f = input.data();
  const float* go = grad_output.data();

  for (int k = 0; k < dg; ++k) {
    for (int l = 0; l < dg; ++l) {
      const float* gorow = go + (static_cast<size_t>(k) * dg + l) * n_ch;
      for (int i = 0; i < dk; ++i) {
        const int y = k * s + i - p;
        if (y < 0 || y >= df) continue;
        for (int j = 0; j < dk; ++j) {
          const int x = l * s + j - p;
          if (x < 0 || x >= df) continue;
          const float* frow = f + (static_cast<size_t>(y) * df + x) * m_ch;
          double* girow = gi.data() + (static_cast<size_t>(y) * df + x) * m_ch;
          double* gwrow = gw.data() + (static_cast<size_t>(i) * dk + j) * m_ch * n_ch;
          const double* wtrow = wt.data() + (static_cast<size_t>(i) * dk + j) * n_ch * m_ch;
          for (int n = 0; n < n_ch; ++n) {
            const double g = gorow[n];
            const double* wtm = wtrow + static_cast<size_t>(n) * m_ch;
            for (int m = 0; m < m_ch; ++m) girow[m] += wtm[m] * g;
          }
          for (int m = 0; m < m_ch; ++m) {
            const double fv = frow[m];
            double* gwn = gwrow + static_cast<size_t>(m) * n_ch;
            for (int n = 0; n < n_ch; ++n) gwn[n] += fv * static_cast<double>(gorow[n]);
          }
        }
      }
    }
  }

  ConvGrads grads{Tensor({df, df, m_ch}), Tensor({dk, dk, m_ch, n_ch})};
  for (int idx = 0; idx < grads.grad_input.size(); ++idx)
    grads.grad_input[idx] = static_cast<float>(gi[static_cast<size_t>(idx)]);
  for (int idx = 0; idx < grads.grad_weights.size(); ++idx)
    grads.grad_weights[idx] = static_cast<float>(gw[static_cast<size_t>(idx)]);
  return grads;
}

Tensor local_conv_forward(const Tensor& input, const LocalKernel& kernel) {
  check_map(input, "local_conv_forward");
  if (kernel.weights.rank() != 6)
    throw DimensionError("local_conv_forward: kernel must be [Dg,Dg,Dk,Dk,M,N], got " +
                         shape_str(kernel.weights.shape()));
  const int df = input.extent(0), m_ch = input.extent(2);
  const int dk = kernel.kernel_size(), n_ch = kernel.out_channels();
  const int s = kernel.stride, p = kernel.padding;
  const int dg = conv_output_size(df, dk, s, p);
  if (kernel.out_size() != dg || kernel.weights.extent(1) != dg)
    throw DimensionError("local_conv_forward: kernel leading dims " + shape_str(kernel.weights.shape()) +
                         " vs derived output size " + std::to_string(dg));
  if (kernel.in_channels() != m_ch)
    throw DimensionError("local_conv_forward: input " + shape_str(input.shape()) + " vs kernel " +
                         shape_str(kernel.weights.shape()) + " (channel mismatch)");

  Tensor out({dg, dg, n_ch});
  std::vector<double> acc(static_cast<size_t>(n_ch));
  const float* f = input.data();
  const float* w = kernel.weights.data();
  const size_t pos_stride = static_cast<size_t>(dk) * dk * m_ch * n_ch;
  for (int k = 0; k < dg; ++k) {
    for (int l = 0; l < dg; ++l) {
      const float* wpos = w + (static_cast<size_t>(k) * dg + l) * pos_stride;
      for (int n = 0; n < n_ch; ++n) acc[static_cast<size_t>(n)] = 0.0;
      for (int i = 0; i < dk; ++i) {
        const int y = k * s + i - p;
        if (y < 0 || y >= df) continue;
        for (int j = 0; j < dk; ++j) {
          const int x = l * s + j - p;
          if (x < 0 || x >= df) continue;
          const float* frow = f + (static_cast<size_t>(y) * df + x) * m_ch;
          const float* wrow = wpos + (static_cast<size_t>(i) * dk + j) * m_ch * n_ch;
          for (int m = 0; m < m_ch; ++m) {
            const double fv = frow[m];
            const float* wn = wrow + static_cast<size_t>(m) * n_ch;
            for (int n = 0; n < n_ch; ++n) acc[static_cast<size_t>(n)] += static_cast<double>(wn[n]) * fv;
          }
        }
      }
      float* orow = out.data() + (static_cast<size_t>(k) * dg + l) * n_ch;
      for (int n = 0; n < n_ch; ++n) orow[n] = static_cast<float>(acc[static_cast<size_t>(n)]);
    }
  }
  return out;
}

LocalKernel broadcast_kernel(const ConvKernel& kernel, int in_size) {
  const int dk = kernel.kernel_size();
  const int dg = conv_output_size(in_size, dk, kernel.stride, kernel.padding);
  const int slice = kernel.weights.size();
  LocalKernel local;
  local.stride = kernel.stride;
  local.padding = kernel.padding;
  local.weights = Tensor({dg, dg, dk, dk, kernel.in_channels(), kernel.out_channels()});
  for (int pos = 0; pos < dg * dg; ++pos)
    for (int idx = 0; idx < slice; ++idx)
      local.weights[pos * slice + idx] = kernel.weights[idx];
  return local;
}

Tensor linear_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2)
    throw DimensionError("linear_forward: weights must be [P,Q], got " + shape_str(weights.shape()));
  const int p_dim = weights.extent(0), q_dim = weights.extent(1);
  if (input.size() != p_dim)
    throw DimensionError("linear_forward: input " + shape_str(input.shape()) + " vs weights " +
                         shape_str(weights.shape()));
  if (bias.size() != q_dim)
    throw DimensionError("linear_forward: bias " + shape_str(bias.shape()) + " vs weights " +
                         shape_str(weights.shape()));

  std::vector<double> acc(static_cast<size_t>(q_dim));
  for (int q = 0; q < q_dim; ++q) acc[static_cast<size_t>(q)] = bias[q];
  const float* in = input.data();
  const float* w = weights.data();
  for (int p = 0; p < p_dim; ++p) {
    const double x = in[p];
    const float* wrow = w + static_cast<size_t>(p) * q_dim;
    for (int q = 0; q < q_dim; ++q) acc[static_cast<size_t>(q)] += static_cast<double>(wrow[q]) * x;
  }
  Tensor out({q_dim});
  for (int q = 0; q < q_dim; ++q) out[q] = static_cast<float>(acc[static_cast<size_t>(q)]);
  return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output) {
  if (weights.rank() != 2)
    throw DimensionError("linear_backward: weights must be [P,Q], got " + shape_str(weights.shape()));
  const int p_dim = weights.extent(0), q_dim = weights.extent(1);
  if (input.size() != p_dim || grad_output.size() != q_dim)
    throw DimensionError("linear_backward: input " + shape_str(input.shape()) + ", grad_output " +
                         shape_str(grad_output.shape()) + " vs weights " + shape_str(weights.shape()));

  LinearGrads grads{Tensor({p_dim}), Tensor({p_dim, q_dim}), Tensor({q_dim})};
  const float* in = input.data();
  const float* w = weights.data();
  const float* go = grad_output.data();
  for (int p = 0; p < p_dim; ++p) {
    const float* wrow = w + static_cast<size_t>(p) * q_dim;
    float* gwrow = grads.grad_weights.data() + static_cast<size_t>(p) * q_dim;
    double gi = 0.0;
    const double x = in[p];
    for (int q = 0; q < q_dim; ++q) {
      gi += static_cast<double>(wrow[q]) * static_cast<double>(go[q]);
      gwrow[q] = static_cast<float>(x * static_cast<double>(go[q]));
    }
    grads.grad_input[p] = static_cast<float>(gi);
  }
  for (int q = 0; q < q_dim; ++q) grads.grad_bias[q] = go[q];
  return grads;
}

}  // namespace spikefold
