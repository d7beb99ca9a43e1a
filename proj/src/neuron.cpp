#include "spikefold/neuron.hpp"

#include <algorithm>

namespace spikefold {

void NeuronConfig::validate() const {
  if (!(tau > 0.0f && tau <= 1.0f))
    throw InputError("NeuronConfig: tau must be in (0,1], got " + std::to_string(tau));
  if (!(v_th > u_rest))
    throw InputError("NeuronConfig: v_th must exceed u_rest, got v_th=" + std::to_string(v_th) +
                     " u_rest=" + std::to_string(u_rest));
}

const char* granularity_name(Granularity g) {
  switch (g) {
    case Granularity::None: return "none";
    case Granularity::Layer: return "layer";
    case Granularity::Channel: return "channel";
    case Granularity::Element: return "element";
  }
  return "?";
}

Granularity granularity_from_name(const std::string& name) {
  if (name == "none") return Granularity::None;
  if (name == "layer") return Granularity::Layer;
  if (name == "channel") return Granularity::Channel;
  if (name == "element") return Granularity::Element;
  throw InputError("unknown granularity '" + name + "' (expected none|layer|channel|element)");
}

SpikeCoefficients SpikeCoefficients::ones(Granularity g, int channels, int height) {
  SpikeCoefficients a;
  a.granularity = g;
  switch (g) {
    case Granularity::None: break;
    case Granularity::Layer: a.values = Tensor::full({1, 1, 1}, 1.0f); break;
    case Granularity::Channel: a.values = Tensor::full({channels, 1, 1}, 1.0f); break;
    case Granularity::Element: a.values = Tensor::full({channels, height, height}, 1.0f); break;
  }
  return a;
}

void SpikeCoefficients::check_matches(int channels, int height) const {
  std::vector<int> want;
  switch (granularity) {
    case Granularity::None:
      if (values.size() != 0) throw DimensionError("granularity none admits no coefficient values");
      return;
    case Granularity::Layer: want = {1, 1, 1}; break;
    case Granularity::Channel: want = {channels, 1, 1}; break;
    case Granularity::Element: want = {channels, height, height}; break;
  }
  if (values.shape() != want)
    throw DimensionError(std::string("coefficients for granularity ") + granularity_name(granularity) + ": shape " +
                         shape_str(values.shape()) + " vs required " + shape_str(want));
}

namespace {

// Maps are [H,W,C]; coefficient values are [C,Hc,Hc] with Hc in {1,H}.
// Returns the coefficient flat index for map position (y,x,c).
inline int coef_index(const Tensor& values, int y, int x, int c) {
  const int hc = values.extent(1);
  const int cc = values.extent(0);
  const int yy = hc == 1 ? 0 : y;
  const int xx = hc == 1 ? 0 : x;
  const int ch = cc == 1 ? 0 : c;
  return (ch * hc + yy) * hc + xx;
}

void check_coeffs_for_map(const Tensor& map, const SpikeCoefficients& a, const char* where) {
  if (map.rank() != 3 || map.extent(0) != map.extent(1))
    throw DimensionError(std::string(where) + ": expected a square [H,W,C] map, got " + shape_str(map.shape()));
  a.check_matches(map.extent(2), map.extent(0));
}

}  // namespace

LifResult lif_step(const NeuronState& state, const Tensor& input_current, const NeuronConfig& cfg) {
  require_same_shape(state.u, input_current, "lif_step");
  LifResult r{Tensor(input_current.shape()), Tensor(input_current.shape()), NeuronState{Tensor(input_current.shape())}};
  const int n = input_current.size();
  for (int idx = 0; idx < n; ++idx) {
    const float up = cfg.tau * state.u[idx] + input_current[idx];
    const bool fired = up >= cfg.v_th;
    r.pre_u[idx] = up;
    r.spikes[idx] = fired ? 1.0f : 0.0f;
    r.state.u[idx] = fired ? cfg.u_rest : up;
  }
  return r;
}

Tensor surrogate_grad(const Tensor& u) {
  Tensor g(u.shape());
  for (int idx = 0; idx < u.size(); ++idx) g[idx] = (u[idx] >= 0.0f && u[idx] <= 1.0f) ? 1.0f : 0.0f;
  return g;
}

Tensor scale_spikes(const Tensor& spikes, const SpikeCoefficients& a) {
  if (a.granularity == Granularity::None) return spikes;
  check_coeffs_for_map(spikes, a, "scale_spikes");
  const int h = spikes.extent(0), c_ch = spikes.extent(2);
  Tensor out(spikes.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < h; ++x) {
      const int base = (y * h + x) * c_ch;
      for (int c = 0; c < c_ch; ++c) out[base + c] = a.values[coef_index(a.values, y, x, c)] * spikes[base + c];
    }
  return out;
}

Tensor reduce_like(const Tensor& g, const SpikeCoefficients& a) {
  if (a.granularity == Granularity::None) return Tensor();
  check_coeffs_for_map(g, a, "reduce_like");
  const int h = g.extent(0), c_ch = g.extent(2);
  std::vector<double> acc(static_cast<size_t>(a.values.size()), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < h; ++x) {
      const int base = (y * h + x) * c_ch;
      for (int c = 0; c < c_ch; ++c) acc[static_cast<size_t>(coef_index(a.values, y, x, c))] += g[base + c];
    }
  Tensor out(a.values.shape());
  for (int idx = 0; idx < out.size(); ++idx) out[idx] = static_cast<float>(acc[static_cast<size_t>(idx)]);
  return out;
}

namespace {

LifBackward backward_common(const Tensor& saved_pre_u, const Tensor& saved_out, const SpikeCoefficients& a,
                            const Tensor& grad_scaled_out, const Tensor& grad_u_next, const NeuronConfig& cfg,
                            bool mask_reset) {
  require_same_shape(saved_pre_u, grad_scaled_out, "lif_backward_step");
  require_same_shape(saved_pre_u, grad_u_next, "lif_backward_step");
  require_same_shape(saved_pre_u, saved_out, "lif_backward_step");

  const bool scaled = a.granularity != Granularity::None;
  if (scaled) check_coeffs_for_map(saved_out, a, "lif_backward_step");

  const int h = saved_pre_u.extent(0), c_ch = saved_pre_u.extent(2);
  LifBackward out;
  out.grad_input_current = Tensor(saved_pre_u.shape());
  std::vector<double> acc_a(scaled ? static_cast<size_t>(a.values.size()) : 0, 0.0);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < h; ++x) {
      const int base = (y * h + x) * c_ch;
      for (int c = 0; c < c_ch; ++c) {
        const int idx = base + c;
        const float av = scaled ? a.values[coef_index(a.values, y, x, c)] : 1.0f;
        const float grad_o = av * grad_scaled_out[idx];
        const float rect = (saved_pre_u[idx] >= 0.0f && saved_pre_u[idx] <= 1.0f) ? 1.0f : 0.0f;
        const float carried = mask_reset && saved_out[idx] != 0.0f ? 0.0f : grad_u_next[idx];
        out.grad_input_current[idx] = grad_o * rect + cfg.tau * carried;
        if (scaled) acc_a[static_cast<size_t>(coef_index(a.values, y, x, c))] +=
            static_cast<double>(grad_scaled_out[idx]) * static_cast<double>(saved_out[idx]);
      }
    }

  out.grad_u_prev = out.grad_input_current;
  if (scaled) {
    out.grad_a_partial = Tensor(a.values.shape());
    for (int idx = 0; idx < out.grad_a_partial.size(); ++idx)
      out.grad_a_partial[idx] = static_cast<float>(acc_a[static_cast<size_t>(idx)]);
  }
  return out;
}

}  // namespace

LifBackward lif_backward_step(const Tensor& saved_pre_u, const Tensor& saved_spikes, const SpikeCoefficients& a,
                              const Tensor& grad_scaled_out, const Tensor& grad_u_next, const NeuronConfig& cfg) {
  return backward_common(saved_pre_u, saved_spikes, a, grad_scaled_out, grad_u_next, cfg, /*mask_reset=*/true);
}

LifResult clamp_step(const NeuronState& state, const Tensor& input_current, const NeuronConfig& cfg) {
  require_same_shape(state.u, input_current, "clamp_step");
  LifResult r{Tensor(input_current.shape()), Tensor(input_current.shape()), NeuronState{Tensor(input_current.shape())}};
  for (int idx = 0; idx < input_current.size(); ++idx) {
    const float up = cfg.tau * state.u[idx] + input_current[idx];
    r.pre_u[idx] = up;
    r.spikes[idx] = std::clamp(up, 0.0f, 1.0f);
    r.state.u[idx] = up;
  }
  return r;
}

LifBackward clamp_backward_step(const Tensor& saved_pre_u, const Tensor& saved_out, const SpikeCoefficients& a,
                                const Tensor& grad_scaled_out, const Tensor& grad_u_next, const NeuronConfig& cfg) {
  return backward_common(saved_pre_u, saved_out, a, grad_scaled_out, grad_u_next, cfg, /*mask_reset=*/false);
}

}  // namespace spikefold
