// Independent double-precision simulator of the clamp-proxy network, used as
// the finite-difference oracle for gradient checks. Shares no code with the
// library forward path: its own padded convolution, its own dynamics, its own
// cross-entropy, all in double.
#pragma once

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "spikefold/network.hpp"

namespace proxy_oracle {

inline double clamp_net_loss(const spikefold::Network& net, const spikefold::Tensor& input, int label,
                             int timesteps) {
  using namespace spikefold;
  struct Map {
    int h = 0, c = 0;
    std::vector<double> v;  // [y][x][c]
  };

  Map in;
  in.h = input.extent(0);
  in.c = input.extent(2);
  in.v.assign(input.data(), input.data() + input.size());

  // persistent membrane per spike layer
  std::vector<std::vector<double>> membrane;
  for (const auto& layer : net.layers)
    if (const auto* sp = std::get_if<SpikeLayer>(&layer))
      membrane.emplace_back(static_cast<size_t>(sp->height) * sp->height * sp->channels, 0.0);

  std::vector<double> logit_acc;
  for (int t = 0; t < timesteps; ++t) {
    Map x = in;
    size_t spike_slot = 0;
    for (const auto& layer : net.layers) {
      if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
        const int dk = cv->kernel.kernel_size(), m_ch = cv->kernel.in_channels(), n_ch = cv->kernel.out_channels();
        const int s = cv->kernel.stride, p = cv->kernel.padding;
        const int dg = (x.h + 2 * p - dk) / s + 1;
        Map out;
        out.h = dg;
        out.c = n_ch;
        out.v.assign(static_cast<size_t>(dg) * dg * n_ch, 0.0);
        for (int k = 0; k < dg; ++k)
          for (int l = 0; l < dg; ++l)
            for (int n = 0; n < n_ch; ++n) {
              double acc = cv->bias[n];
              for (int i = 0; i < dk; ++i)
                for (int j = 0; j < dk; ++j) {
                  const int y = k * s + i - p, xx = l * s + j - p;
                  if (y < 0 || y >= x.h || xx < 0 || xx >= x.h) continue;
                  for (int m = 0; m < m_ch; ++m)
                    acc += static_cast<double>(cv->kernel.weights.at({i, j, m, n})) *
                           x.v[(static_cast<size_t>(y) * x.h + xx) * m_ch + m];
                }
              out.v[(static_cast<size_t>(k) * dg + l) * n_ch + n] = acc;
            }
        x = std::move(out);
      } else if (const auto* sp = std::get_if<SpikeLayer>(&layer)) {
        auto& u = membrane[spike_slot++];
        for (size_t i = 0; i < x.v.size(); ++i) {
          const double up = static_cast<double>(sp->cfg.tau) * u[i] + x.v[i];
          u[i] = up;  // clamp proxy: no reset
          double out = std::clamp(up, 0.0, 1.0);
          if (sp->coeffs.granularity != Granularity::None) {
            const int c = static_cast<int>(i) % x.c;
            const int pos = static_cast<int>(i) / x.c;
            const int y = pos / x.h, xx = pos % x.h;
            const int hc = sp->coeffs.values.extent(1);
            const int cc = sp->coeffs.values.extent(0);
            const int ci = ((cc == 1 ? 0 : c) * hc + (hc == 1 ? 0 : y)) * hc + (hc == 1 ? 0 : xx);
            out *= static_cast<double>(sp->coeffs.values[ci]);
          }
          x.v[i] = out;
        }
      } else if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
        const int p_dim = lin->weights.extent(0), q_dim = lin->weights.extent(1);
        std::vector<double> out(static_cast<size_t>(q_dim));
        for (int q = 0; q < q_dim; ++q) out[static_cast<size_t>(q)] = lin->bias[q];
        for (int p = 0; p < p_dim; ++p)
          for (int q = 0; q < q_dim; ++q)
            out[static_cast<size_t>(q)] += static_cast<double>(lin->weights.at({p, q})) * x.v[static_cast<size_t>(p)];
        if (logit_acc.empty()) logit_acc.assign(out.size(), 0.0);
        for (size_t q = 0; q < out.size(); ++q) logit_acc[q] += out[q];
        x.v.clear();
      } else {
        throw std::runtime_error("proxy oracle: unsupported layer");
      }
    }
  }

  std::vector<double> logits(logit_acc);
  for (auto& v : logits) v /= timesteps;
  double maxv = logits[0];
  for (double v : logits) maxv = std::max(maxv, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - maxv);
  return -(logits[static_cast<size_t>(label)] - maxv - std::log(z));
}

// Central difference through the double oracle; the denominator is the
// actually-achieved parameter difference after float32 rounding.
inline double central_diff(const spikefold::Network& net, float& param, const spikefold::Tensor& input, int label,
                           int timesteps, double eps = 1e-3) {
  const float saved = param;
  param = static_cast<float>(static_cast<double>(saved) + eps);
  const double up_val = clamp_net_loss(net, input, label, timesteps);
  const double theta_up = param;
  param = static_cast<float>(static_cast<double>(saved) - eps);
  const double down_val = clamp_net_loss(net, input, label, timesteps);
  const double theta_down = param;
  param = saved;
  return (up_val - down_val) / (theta_up - theta_down);
}

}  // namespace proxy_oracle
