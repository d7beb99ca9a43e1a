#pragma once

#include <string>

#include "spikefold/tensor.hpp"

namespace spikefold {

struct NeuronConfig {
  float tau = 0.5f;     // decay factor per timestep, 0 < tau <= 1
  float v_th = 0.5f;    // firing threshold
  float u_rest = 0.0f;  // reset potential

  void validate() const;
};

enum class Granularity { None, Layer, Channel, Element };

const char* granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

// Learnable output-scaling coefficients of a spiking layer. Values are shaped
// [1,1,1] (layer), [C,1,1] (channel) or [C,H,H] (element); one value set is
// shared across all timesteps and batch items. Granularity None means no
// coefficients at all (plain binary output).
struct SpikeCoefficients {
  Granularity granularity = Granularity::None;
  Tensor values;

  static SpikeCoefficients ones(Granularity g, int channels, int height);
  // Throws DimensionError unless values' shape matches the granularity for a
  // [C,H,H] layer of the given dims.
  void check_matches(int channels, int height) const;
};

// Membrane potentials carried across timesteps, stored [H, W, C] like the
// feature maps they integrate.
struct NeuronState {
  Tensor u;
};

struct LifResult {
  Tensor spikes;      // exactly 0.0 or 1.0 everywhere
  Tensor pre_u;       // u' = tau*u + I, before reset (backward needs it)
  NeuronState state;  // u_rest where fired, u' elsewhere
};

// u' = tau*u + I; fire where u' >= v_th; fired positions reset to u_rest.
LifResult lif_step(const NeuronState& state, const Tensor& input_current, const NeuronConfig& cfg);

// Rectangular pseudo-derivative: 1 where 0 <= u <= 1 (inclusive), else 0.
Tensor surrogate_grad(const Tensor& u);

// Scaled output: coefficient times spike, with layer/channel values broadcast
// over the remaining dims. Granularity None returns the spikes unchanged.
Tensor scale_spikes(const Tensor& spikes, const SpikeCoefficients& a);

// Sums g over the dims the coefficients broadcast along, producing a tensor
// shaped like a.values. Granularity None yields an empty tensor.
Tensor reduce_like(const Tensor& g, const SpikeCoefficients& a);

struct LifBackward {
  Tensor grad_input_current;
  Tensor grad_u_prev;     // feed as grad_u_next to the previous timestep
  Tensor grad_a_partial;  // shaped like a.values; empty for granularity None
};

// One BPTT step. grad_u_next is this quantity from timestep t+1 (zeros at
// t = T). The reset path is detached: grad_u_next is zeroed at fired
// positions, and the decay factor tau is applied, inside this step.
LifBackward lif_backward_step(const Tensor& saved_pre_u, const Tensor& saved_spikes, const SpikeCoefficients& a,
                              const Tensor& grad_scaled_out, const Tensor& grad_u_next, const NeuronConfig& cfg);

// Differentiable stand-in used for gradient verification: the firing rule is
// replaced by clamp(u', 0, 1) and the state never resets. Its exact
// derivative is the rectangle above, almost everywhere.
LifResult clamp_step(const NeuronState& state, const Tensor& input_current, const NeuronConfig& cfg);

LifBackward clamp_backward_step(const Tensor& saved_pre_u, const Tensor& saved_out, const SpikeCoefficients& a,
                                const Tensor& grad_scaled_out, const Tensor& grad_u_next, const NeuronConfig& cfg);

}  // namespace spikefold
