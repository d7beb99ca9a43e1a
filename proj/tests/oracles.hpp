// Independent reference implementations used only by tests. These stay
// deliberately naive (padded copies, per-position dot products, double math)
// and share no code with the library paths they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "spikefold/tensor.hpp"

namespace oracles {

inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline float uniform(uint64_t& s, float lo, float hi) {
  s = mix64(s);
  return lo + (hi - lo) * (static_cast<float>((s >> 40) & 0xFFFFFF) / 16777216.0f);
}

inline spikefold::Tensor random_tensor(std::vector<int> shape, uint64_t& s, float lo = -1.0f, float hi = 1.0f) {
  spikefold::Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = uniform(s, lo, hi);
  return t;
}

inline spikefold::Tensor random_binary(std::vector<int> shape, uint64_t& s, float p_one = 0.5f) {
  spikefold::Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = uniform(s, 0.0f, 1.0f) < p_one ? 1.0f : 0.0f;
  return t;
}

// Explicitly padded copy, then a fresh dot product per output position.
inline std::vector<double> pad_map(const spikefold::Tensor& in, int pad) {
  const int h = in.extent(0), c = in.extent(2);
  const int hp = h + 2 * pad;
  std::vector<double> out(static_cast<size_t>(hp) * hp * c, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < h; ++x)
      for (int m = 0; m < c; ++m)
        out[(static_cast<size_t>(y + pad) * hp + (x + pad)) * c + m] = in.at({y, x, m});
  return out;
}

inline spikefold::Tensor naive_conv2d(const spikefold::Tensor& in, const spikefold::Tensor& weights, int stride,
                                      int pad) {
  const int h = in.extent(0), m_ch = in.extent(2);
  const int dk = weights.extent(0), n_ch = weights.extent(3);
  const int hp = h + 2 * pad;
  const int dg = (hp - dk) / stride + 1;
  const auto padded = pad_map(in, pad);
  spikefold::Tensor out({dg, dg, n_ch});
  for (int k = 0; k < dg; ++k)
    for (int l = 0; l < dg; ++l)
      for (int n = 0; n < n_ch; ++n) {
        double acc = 0.0;
        for (int i = 0; i < dk; ++i)
          for (int j = 0; j < dk; ++j)
            for (int m = 0; m < m_ch; ++m)
              acc += static_cast<double>(weights.at({i, j, m, n})) *
                     padded[(static_cast<size_t>(k * stride + i) * hp + (l * stride + j)) * m_ch + m];
        out.at({k, l, n}) = static_cast<float>(acc);
      }
  return out;
}

inline spikefold::Tensor naive_local_conv(const spikefold::Tensor& in, const spikefold::Tensor& weights, int stride,
                                          int pad) {
  const int h = in.extent(0), m_ch = in.extent(2);
  const int dg = weights.extent(0), dk = weights.extent(2), n_ch = weights.extent(5);
  const int hp = h + 2 * pad;
  const auto padded = pad_map(in, pad);
  spikefold::Tensor out({dg, dg, n_ch});
  for (int k = 0; k < dg; ++k)
    for (int l = 0; l < dg; ++l)
      for (int n = 0; n < n_ch; ++n) {
        double acc = 0.0;
        for (int i = 0; i < dk; ++i)
          for (int j = 0; j < dk; ++j)
            for (int m = 0; m < m_ch; ++m)
              acc += static_cast<double>(weights.at({k, l, i, j, m, n})) *
                     padded[(static_cast<size_t>(k * stride + i) * hp + (l * stride + j)) * m_ch + m];
        out.at({k, l, n}) = static_cast<float>(acc);
      }
  return out;
}

// Double-precision scalar losses for finite-difference checks: projections of
// the op outputs, with no float32 rounding anywhere on the oracle path.
inline double conv_proj_loss(const spikefold::Tensor& in, const spikefold::Tensor& weights, int stride, int pad,
                             const spikefold::Tensor& proj) {
  const int h = in.extent(0), m_ch = in.extent(2);
  const int dk = weights.extent(0), n_ch = weights.extent(3);
  const int hp = h + 2 * pad;
  const int dg = (hp - dk) / stride + 1;
  const auto padded = pad_map(in, pad);
  double loss = 0.0;
  for (int k = 0; k < dg; ++k)
    for (int l = 0; l < dg; ++l)
      for (int n = 0; n < n_ch; ++n) {
        double acc = 0.0;
        for (int i = 0; i < dk; ++i)
          for (int j = 0; j < dk; ++j)
            for (int m = 0; m < m_ch; ++m)
              acc += static_cast<double>(weights.at({i, j, m, n})) *
                     padded[(static_cast<size_t>(k * stride + i) * hp + (l * stride + j)) * m_ch + m];
        loss += acc * static_cast<double>(proj.at({k, l, n}));
      }
  return loss;
}

inline double linear_proj_loss(const spikefold::Tensor& in, const spikefold::Tensor& weights,
                               const spikefold::Tensor& bias, const spikefold::Tensor& proj) {
  const int p_dim = weights.extent(0), q_dim = weights.extent(1);
  double loss = 0.0;
  for (int q = 0; q < q_dim; ++q) {
    double acc = bias[q];
    for (int p = 0; p < p_dim; ++p) acc += static_cast<double>(in[p]) * static_cast<double>(weights.at({p, q}));
    loss += acc * static_cast<double>(proj[q]);
  }
  return loss;
}

// Central finite difference of `loss` with respect to one parameter slot.
// Divides by the achieved (float32-rounded) parameter difference.
inline double central_diff(float& param, const std::function<double()>& loss, double eps = 1e-3) {
  const float saved = param;
  param = static_cast<float>(static_cast<double>(saved) + eps);
  const double up = loss();
  const double theta_up = param;
  param = static_cast<float>(static_cast<double>(saved) - eps);
  const double down = loss();
  const double theta_down = param;
  param = saved;
  return (up - down) / (theta_up - theta_down);
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

inline double max_abs_diff(const spikefold::Tensor& a, const spikefold::Tensor& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

}  // namespace oracles
