#pragma once

#include <variant>

#include "spikefold/network.hpp"

namespace spikefold {

// Folds a spiking layer's output coefficients into the consumer kernel that
// reads them. Layer- and channel-wise coefficients rescale the shared kernel;
// element-wise coefficients require one kernel per output position, so the
// result becomes locally connected. Kernel entries whose input index falls in
// the zero-padding keep their unscaled value (their contribution is zero
// either way).
std::variant<ConvKernel, LocalKernel> fold_pair(const SpikeCoefficients& a, const ConvKernel& kernel, int in_size);

// Same folding applied to a linear consumer: weight row p is scaled by the
// coefficient of the map position that flattens to p.
Tensor fold_linear(const SpikeCoefficients& a, const Tensor& weights, int channels, int height);

// Applies fold_pair/fold_linear to every (spike layer, consumer) pair, strips
// all coefficients (binary output everywhere) and marks the result folded.
// First-layer weights are untouched: its input is raw pixels, not spikes.
Network fold_network(const Network& net);

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  double argmax_agreement = 1.0;  // fraction of inputs with identical argmax
  int inputs_checked = 0;
};

// Runs both networks on every input and compares logits. Disagreement is
// data, not an error.
EquivalenceReport verify_equivalence(const Network& source, const Network& folded, std::span<const Tensor> inputs,
                                     int timesteps, int threads = 0);

struct LayerCost {
  std::string kind;
  long long params_before = 0;       // stored weight values (kernel/matrix)
  long long params_after = 0;
  long long coeff_params_before = 0; // coefficients absorbed by folding
  long long bias_params = 0;         // unchanged by folding
  long long synapses = 0;            // one-to-one mapping: sum of per-output fan-in
  long long mults_before = 0;        // multiplies per timestep (real-valued inputs)
  long long mults_after = 0;         // binary inputs need additions only
};

struct CostReport {
  std::vector<LayerCost> layers;
  long long total_params_before = 0;
  long long total_params_after = 0;
  long long total_synapses = 0;
  long long total_mults_before = 0;
  long long total_mults_after = 0;

  std::string to_text() const;
  std::string to_json() const;
};

// Parameter, synapse and multiply counts before/after folding. The synapse
// count is identical on both sides: folding changes connection values, never
// the topology.
CostReport cost_report(const Network& source, const Network& folded);

}  // namespace spikefold
