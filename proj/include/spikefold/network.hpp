#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spikefold/conv.hpp"
#include "spikefold/data_io.hpp"
#include "spikefold/neuron.hpp"

namespace spikefold {

enum class NeuronMode { Fire, Clamp };

struct ConvLayer {
  ConvKernel kernel;
  Tensor bias;  // [N], added per output channel
};

struct LocalConvLayer {
  LocalKernel kernel;
  Tensor bias;  // [N]
};

struct LinearLayer {
  Tensor weights;  // [P, Q]
  Tensor bias;     // [Q]
};

struct SpikeLayer {
  NeuronConfig cfg;
  SpikeCoefficients coeffs;
  NeuronMode mode = NeuronMode::Fire;
  int channels = 0;  // map shape this layer operates on
  int height = 0;
};

using Layer = std::variant<ConvLayer, LocalConvLayer, LinearLayer, SpikeLayer>;

// A linear chain of layers plus its parameters. The chain invariant: every
// SpikeLayer is immediately followed by a Conv/LocalConv/Linear layer, so
// coefficient folding is always possible.
struct Network {
  std::string arch;
  int input_height = 0;
  int input_channels = 0;
  std::vector<Layer> layers;
  bool folded = false;

  void validate() const;
  int num_classes() const;
  std::vector<int> spike_layer_indices() const;
  int parameter_count() const;  // trainable floats (weights, biases, coefficients)
};

// Registered architectures: "mnist-small" (2 conv + 1 linear, 28x28x1 input)
// and "tiny-grad" (a <500-parameter net for gradient checking, 5x5x1 input).
Network make_arch(const std::string& name, Granularity granularity, const NeuronConfig& cfg, uint64_t seed);
std::vector<std::string> arch_names();

// Everything the backward pass and the analysis instrumentation need from a
// forward run: per spike layer L and timestep t, the pre-reset potential,
// the (binary or clamped) output and the scaled output; per weighted layer,
// its input at each timestep.
struct ForwardTrace {
  Tensor logits;
  std::vector<std::vector<Tensor>> pre_u;    // [spike layer][t]
  std::vector<std::vector<Tensor>> out;      // [spike layer][t]
  std::vector<std::vector<Tensor>> scaled;   // [spike layer][t]
  std::vector<std::vector<Tensor>> inputs;   // [weighted layer][t]
};

// Direct coding: the input map is presented unchanged at every timestep; the
// output layer's pre-activations are accumulated over T and divided by T.
Tensor forward(const Network& net, const Tensor& input, int timesteps);
ForwardTrace forward_traced(const Network& net, const Tensor& input, int timesteps);

// Per-layer gradients aligned with Network::layers (empty tensors where a
// layer has no such parameter).
struct LayerGrads {
  Tensor weights;
  Tensor bias;
  Tensor coeffs;
};

struct BatchGrads {
  std::vector<LayerGrads> layers;
  double loss = 0.0;
  std::vector<double> spike_rates;  // mean firing rate per spike layer

  void scale(float factor);
};

BatchGrads zero_grads(const Network& net);

// Softmax cross-entropy on mean logits, averaged over the batch; gradients
// are exact adjoints of the implemented forward (with detached resets).
BatchGrads loss_and_grad(const Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                         int timesteps);

// Per-sample work spread over threads; gradients are still combined in sample
// order, so the result is independent of the thread count.
BatchGrads loss_and_grad_threaded(const Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                                  int timesteps, int threads);

enum class Optimizer { Adam, SgdMomentum };

struct TrainConfig {
  int timesteps = 4;
  int epochs = 1;
  int batch_size = 32;
  float lr = 1e-3f;
  Optimizer optimizer = Optimizer::Adam;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> spike_rates;
  double wall_seconds = 0.0;  // excluded from equality: timing is not a metric
};

struct RunReport {
  std::vector<EpochStats> epochs;

  // Compares metrics only (loss, accuracy, spike rates), never wall time.
  bool same_metrics(const RunReport& other) const;
  std::string to_jsonl() const;
};

// Deterministic given (datasets, cfg): fixed shuffling, fixed reduction
// orders, per-sample gradients combined in index order. Throws
// DivergenceError naming the epoch/batch if the loss becomes non-finite.
// Throws InputError when net.folded (folded models cannot be trained).
RunReport train(Network& net, const IdxDataset& train_set, const IdxDataset& test_set, const TrainConfig& cfg,
                std::ostream* log = nullptr);

// Fraction of samples whose argmax logit equals the label.
double evaluate(const Network& net, const IdxDataset& dataset, int timesteps, int threads = 0);

// Deterministic uniform in [lo, hi) from 24 bits of a mixed counter.
float uniform_float(uint64_t& state, float lo, float hi);

}  // namespace spikefold
