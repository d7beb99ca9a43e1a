#include "spikefold/network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace spikefold {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(begin, end) over [0, count) split across threads. Results must be
// combined by the caller in a fixed order; the split itself carries no state.
void parallel_ranges(int count, int threads, const std::function<void(int, int)>& fn) {
  threads = std::min(threads, count);
  if (threads <= 1 || count <= 1) {
    if (count > 0) fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

float uniform_float(uint64_t& state, float lo, float hi) {
  state = mix64(state);
  const float unit = static_cast<float>((state >> 40) & 0xFFFFFFULL) * (1.0f / 16777216.0f);
  return lo + (hi - lo) * unit;
}

void Network::validate() const {
  if (layers.empty()) throw InputError("network has no layers");
  int h = input_height, c = input_channels;
  bool flattened = false;
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (std::holds_alternative<LinearLayer>(layer)) {
      if (i + 1 != layers.size()) throw InputError("linear layer must be the final layer");
      const auto& lin = std::get<LinearLayer>(layer);
      if (lin.weights.extent(0) != h * h * c)
        throw DimensionError("linear input " + std::to_string(h * h * c) + " vs weights " +
                             shape_str(lin.weights.shape()));
      flattened = true;
    } else if (std::holds_alternative<ConvLayer>(layer)) {
      const auto& cv = std::get<ConvLayer>(layer);
      if (cv.kernel.in_channels() != c)
        throw DimensionError("conv layer " + std::to_string(i) + ": expects " +
                             std::to_string(cv.kernel.in_channels()) + " channels, gets " + std::to_string(c));
      h = conv_output_size(h, cv.kernel.kernel_size(), cv.kernel.stride, cv.kernel.padding);
      c = cv.kernel.out_channels();
    } else if (std::holds_alternative<LocalConvLayer>(layer)) {
      const auto& cv = std::get<LocalConvLayer>(layer);
      if (cv.kernel.in_channels() != c)
        throw DimensionError("local conv layer " + std::to_string(i) + ": channel mismatch");
      h = conv_output_size(h, cv.kernel.kernel_size(), cv.kernel.stride, cv.kernel.padding);
      if (h != cv.kernel.out_size())
        throw DimensionError("local conv layer " + std::to_string(i) + ": kernel built for output size " +
                             std::to_string(cv.kernel.out_size()) + ", chain gives " + std::to_string(h));
      c = cv.kernel.out_channels();
    } else {
      const auto& sp = std::get<SpikeLayer>(layer);
      sp.cfg.validate();
      if (sp.channels != c || sp.height != h)
        throw DimensionError("spike layer " + std::to_string(i) + ": configured for " +
                             std::to_string(sp.channels) + "x" + std::to_string(sp.height) +
                             ", chain gives " + std::to_string(c) + "x" + std::to_string(h));
      sp.coeffs.check_matches(c, h);
      // Exact folding needs a weighted consumer right after every spike layer.
      if (i + 1 == layers.size() || std::holds_alternative<SpikeLayer>(layers[i + 1]))
        throw TopologyError("spike layer " + std::to_string(i) +
                            " is not followed by a conv/linear layer (folding precondition violated)");
    }
  }
  if (!flattened) throw InputError("network must end in a linear layer");
}

int Network::num_classes() const {
  const auto& lin = std::get<LinearLayer>(layers.back());
  return lin.weights.extent(1);
}

std::vector<int> Network::spike_layer_indices() const {
  std::vector<int> idx;
  for (size_t i = 0; i < layers.size(); ++i)
    if (std::holds_alternative<SpikeLayer>(layers[i])) idx.push_back(static_cast<int>(i));
  return idx;
}

int Network::parameter_count() const {
  int n = 0;
  for (const Layer& layer : layers) {
    if (const auto* cv = std::get_if<ConvLayer>(&layer))
      n += cv->kernel.weights.size() + cv->bias.size();
    else if (const auto* lc = std::get_if<LocalConvLayer>(&layer))
      n += lc->kernel.weights.size() + lc->bias.size();
    else if (const auto* lin = std::get_if<LinearLayer>(&layer))
      n += lin->weights.size() + lin->bias.size();
    else
      n += std::get<SpikeLayer>(layer).coeffs.values.size();
  }
  return n;
}

namespace {

Tensor init_uniform(std::vector<int> shape, int fan_in, uint64_t& state) {
  Tensor t(std::move(shape));
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  for (int i = 0; i < t.size(); ++i) t[i] = uniform_float(state, -bound, bound);
  return t;
}

ConvLayer make_conv(int in_ch, int out_ch, int k, int stride, int pad, uint64_t& state) {
  ConvLayer layer;
  layer.kernel.weights = init_uniform({k, k, in_ch, out_ch}, k * k * in_ch, state);
  layer.kernel.stride = stride;
  layer.kernel.padding = pad;
  layer.bias = Tensor({out_ch});
  return layer;
}

SpikeLayer make_spike(int channels, int height, Granularity g, const NeuronConfig& cfg) {
  SpikeLayer layer;
  layer.cfg = cfg;
  layer.coeffs = SpikeCoefficients::ones(g, channels, height);
  layer.channels = channels;
  layer.height = height;
  return layer;
}

LinearLayer make_linear(int in_dim, int out_dim, uint64_t& state) {
  LinearLayer layer;
  layer.weights = init_uniform({in_dim, out_dim}, in_dim, state);
  layer.bias = Tensor({out_dim});
  return layer;
}

}  // namespace

Network make_arch(const std::string& name, Granularity granularity, const NeuronConfig& cfg, uint64_t seed) {
  uint64_t state = mix64(seed ^ 0xA5F152EDB0C57ULL);
  Network net;
  net.arch = name;
  if (name == "mnist-small") {
    net.input_height = 28;
    net.input_channels = 1;
    net.layers.push_back(make_conv(1, 8, 5, 2, 2, state));    // 28 -> 14
    net.layers.push_back(make_spike(8, 14, granularity, cfg));
    net.layers.push_back(make_conv(8, 16, 5, 2, 2, state));   // 14 -> 7
    net.layers.push_back(make_spike(16, 7, granularity, cfg));
    net.layers.push_back(make_linear(7 * 7 * 16, 10, state));
  } else if (name == "tiny-grad") {
    net.input_height = 5;
    net.input_channels = 1;
    net.layers.push_back(make_conv(1, 2, 3, 1, 1, state));    // 5 -> 5
    net.layers.push_back(make_spike(2, 5, granularity, cfg));
    net.layers.push_back(make_conv(2, 2, 3, 2, 1, state));    // 5 -> 3
    net.layers.push_back(make_spike(2, 3, granularity, cfg));
    net.layers.push_back(make_linear(3 * 3 * 2, 3, state));
  } else {
    throw InputError("unknown architecture '" + name + "'");
  }
  net.validate();
  return net;
}

std::vector<std::string> arch_names() { return {"mnist-small", "tiny-grad"}; }

namespace {

// Shared by forward() and forward_traced(); trace may be null.
Tensor run_forward(const Network& net, const Tensor& input, int timesteps, ForwardTrace* trace) {
  if (timesteps < 1) throw InputError("timesteps must be >= 1");
  if (input.rank() != 3 || input.extent(0) != net.input_height || input.extent(2) != net.input_channels)
    throw DimensionError("forward: input " + shape_str(input.shape()) + " vs expected " +
                         shape_str({net.input_height, net.input_height, net.input_channels}));

  const auto spike_idx = net.spike_layer_indices();
  std::vector<int> spike_slot(net.layers.size(), -1), weighted_slot(net.layers.size(), -1);
  int n_weighted = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (std::holds_alternative<SpikeLayer>(net.layers[i]))
      spike_slot[i] = static_cast<int>(std::find(spike_idx.begin(), spike_idx.end(), static_cast<int>(i)) -
                                       spike_idx.begin());
    else
      weighted_slot[i] = n_weighted++;
  }
  if (trace) {
    trace->pre_u.assign(spike_idx.size(), {});
    trace->out.assign(spike_idx.size(), {});
    trace->scaled.assign(spike_idx.size(), {});
    trace->inputs.assign(static_cast<size_t>(n_weighted), {});
  }

  std::vector<NeuronState> states;
  for (int idx : spike_idx) {
    const auto& sp = std::get<SpikeLayer>(net.layers[static_cast<size_t>(idx)]);
    states.push_back(NeuronState{Tensor({sp.height, sp.height, sp.channels})});
  }

  std::vector<double> logit_acc;
  for (int t = 0; t < timesteps; ++t) {
    Tensor x = input;
    for (size_t i = 0; i < net.layers.size(); ++i) {
      const Layer& layer = net.layers[i];
      if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
        if (trace) trace->inputs[static_cast<size_t>(weighted_slot[i])].push_back(x);
        x = conv2d_forward(x, cv->kernel);
        const int n_ch = cv->bias.size();
        for (int pos = 0; pos < x.size(); pos += n_ch)
          for (int n = 0; n < n_ch; ++n) x[pos + n] += cv->bias[n];
      } else if (const auto* lc = std::get_if<LocalConvLayer>(&layer)) {
        if (trace) trace->inputs[static_cast<size_t>(weighted_slot[i])].push_back(x);
        x = local_conv_forward(x, lc->kernel);
        const int n_ch = lc->bias.size();
        for (int pos = 0; pos < x.size(); pos += n_ch)
          for (int n = 0; n < n_ch; ++n) x[pos + n] += lc->bias[n];
      } else if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
        Tensor flat({x.size()});
        for (int idx = 0; idx < x.size(); ++idx) flat[idx] = x[idx];
        if (trace) trace->inputs[static_cast<size_t>(weighted_slot[i])].push_back(flat);
        x = linear_forward(flat, lin->weights, lin->bias);
      } else {
        const auto& sp = std::get<SpikeLayer>(layer);
        const int slot = spike_slot[i];
        LifResult r = sp.mode == NeuronMode::Fire ? lif_step(states[static_cast<size_t>(slot)], x, sp.cfg)
                                                  : clamp_step(states[static_cast<size_t>(slot)], x, sp.cfg);
        states[static_cast<size_t>(slot)] = r.state;
        Tensor scaled = scale_spikes(r.spikes, sp.coeffs);
        if (trace) {
          trace->pre_u[static_cast<size_t>(slot)].push_back(std::move(r.pre_u));
          trace->out[static_cast<size_t>(slot)].push_back(std::move(r.spikes));
          trace->scaled[static_cast<size_t>(slot)].push_back(scaled);
        }
        x = std::move(scaled);
      }
    }
    if (logit_acc.empty()) logit_acc.assign(static_cast<size_t>(x.size()), 0.0);
    for (int q = 0; q < x.size(); ++q) logit_acc[static_cast<size_t>(q)] += x[q];
  }

  Tensor logits({static_cast<int>(logit_acc.size())});
  for (size_t q = 0; q < logit_acc.size(); ++q)
    logits[static_cast<int>(q)] = static_cast<float>(logit_acc[q] / timesteps);
  if (trace) trace->logits = logits;
  return logits;
}

struct SampleGrads {
  std::vector<LayerGrads> layers;
  double loss = 0.0;
  std::vector<double> spike_rates;
};

SampleGrads backward_sample(const Network& net, const Tensor& input, int label, int timesteps) {
  ForwardTrace trace;
  run_forward(net, input, timesteps, &trace);

  const int classes = trace.logits.size();
  if (label < 0 || label >= classes)
    throw InputError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) + " classes");

  // Softmax cross-entropy on the mean logits, in double.
  double maxv = trace.logits[0];
  for (int q = 1; q < classes; ++q) maxv = std::max(maxv, static_cast<double>(trace.logits[q]));
  std::vector<double> p(static_cast<size_t>(classes));
  double z = 0.0;
  for (int q = 0; q < classes; ++q) {
    p[static_cast<size_t>(q)] = std::exp(static_cast<double>(trace.logits[q]) - maxv);
    z += p[static_cast<size_t>(q)];
  }
  for (auto& v : p) v /= z;

  SampleGrads sg;
  sg.loss = -std::log(std::max(p[static_cast<size_t>(label)], 1e-300));
  sg.layers.resize(net.layers.size());

  Tensor dlogits({classes});
  for (int q = 0; q < classes; ++q)
    dlogits[q] = static_cast<float>((p[static_cast<size_t>(q)] - (q == label ? 1.0 : 0.0)) / timesteps);

  const auto spike_idx = net.spike_layer_indices();
  std::vector<Tensor> grad_u_next;
  for (int idx : spike_idx) {
    const auto& sp = std::get<SpikeLayer>(net.layers[static_cast<size_t>(idx)]);
    grad_u_next.push_back(Tensor({sp.height, sp.height, sp.channels}));
  }

  std::vector<int> spike_slot(net.layers.size(), -1), weighted_slot(net.layers.size(), -1);
  int n_weighted = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (std::holds_alternative<SpikeLayer>(net.layers[i]))
      spike_slot[i] = static_cast<int>(std::find(spike_idx.begin(), spike_idx.end(), static_cast<int>(i)) -
                                       spike_idx.begin());
    else
      weighted_slot[i] = n_weighted++;
  }

  for (int t = timesteps - 1; t >= 0; --t) {
    Tensor g = dlogits;
    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
      const Layer& layer = net.layers[static_cast<size_t>(i)];
      if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
        const Tensor& x = trace.inputs[static_cast<size_t>(weighted_slot[static_cast<size_t>(i)])][static_cast<size_t>(t)];
        LinearGrads lg = linear_backward(x, lin->weights, g);
        LayerGrads& acc = sg.layers[static_cast<size_t>(i)];
        if (acc.weights.empty()) {
          acc.weights = std::move(lg.grad_weights);
          acc.bias = std::move(lg.grad_bias);
        } else {
          for (int idx = 0; idx < acc.weights.size(); ++idx) acc.weights[idx] += lg.grad_weights[idx];
          for (int idx = 0; idx < acc.bias.size(); ++idx) acc.bias[idx] += lg.grad_bias[idx];
        }
        // Un-flatten back to the map the previous layer produced.
        const int prev = i - 1;
        if (prev >= 0 && std::holds_alternative<SpikeLayer>(net.layers[static_cast<size_t>(prev)])) {
          const auto& sp = std::get<SpikeLayer>(net.layers[static_cast<size_t>(prev)]);
          g = Tensor({sp.height, sp.height, sp.channels});
          for (int idx = 0; idx < g.size(); ++idx) g[idx] = lg.grad_input[idx];
        } else {
          g = std::move(lg.grad_input);
        }
      } else if (std::holds_alternative<LocalConvLayer>(layer)) {
        throw InputError("folded (locally-connected) layers cannot be trained");
      } else if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
        const Tensor& x = trace.inputs[static_cast<size_t>(weighted_slot[static_cast<size_t>(i)])][static_cast<size_t>(t)];
        ConvGrads cg = conv2d_backward(x, cv->kernel, g);
        LayerGrads& acc = sg.layers[static_cast<size_t>(i)];
        if (acc.weights.empty()) {
          acc.weights = std::move(cg.grad_weights);
          acc.bias = Tensor({cv->bias.size()});
        } else {
          for (int idx = 0; idx < acc.weights.size(); ++idx) acc.weights[idx] += cg.grad_weights[idx];
        }
        const int n_ch = cv->bias.size();
        for (int pos = 0; pos < g.size(); pos += n_ch)
          for (int n = 0; n < n_ch; ++n) acc.bias[n] += g[pos + n];
        g = std::move(cg.grad_input);
      } else {
        const auto& sp = std::get<SpikeLayer>(layer);
        const int slot = spike_slot[static_cast<size_t>(i)];
        const Tensor& pre_u = trace.pre_u[static_cast<size_t>(slot)][static_cast<size_t>(t)];
        const Tensor& out = trace.out[static_cast<size_t>(slot)][static_cast<size_t>(t)];
        LifBackward lb = sp.mode == NeuronMode::Fire
                             ? lif_backward_step(pre_u, out, sp.coeffs, g, grad_u_next[static_cast<size_t>(slot)], sp.cfg)
                             : clamp_backward_step(pre_u, out, sp.coeffs, g, grad_u_next[static_cast<size_t>(slot)], sp.cfg);
        if (sp.coeffs.granularity != Granularity::None) {
          LayerGrads& acc = sg.layers[static_cast<size_t>(i)];
          if (acc.coeffs.empty())
            acc.coeffs = std::move(lb.grad_a_partial);
          else
            for (int idx = 0; idx < acc.coeffs.size(); ++idx) acc.coeffs[idx] += lb.grad_a_partial[idx];
        }
        grad_u_next[static_cast<size_t>(slot)] = std::move(lb.grad_u_prev);
        g = std::move(lb.grad_input_current);
      }
    }
  }

  // Firing-rate summary (binary layers only; the clamp proxy reports means too).
  for (size_t s = 0; s < spike_idx.size(); ++s) {
    double total = 0.0;
    long long n = 0;
    for (int t = 0; t < timesteps; ++t) {
      const Tensor& o = trace.out[s][static_cast<size_t>(t)];
      for (int idx = 0; idx < o.size(); ++idx) total += o[idx];
      n += o.size();
    }
    sg.spike_rates.push_back(n ? total / static_cast<double>(n) : 0.0);
  }
  return sg;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& input, int timesteps) {
  return run_forward(net, input, timesteps, nullptr);
}

ForwardTrace forward_traced(const Network& net, const Tensor& input, int timesteps) {
  ForwardTrace trace;
  run_forward(net, input, timesteps, &trace);
  return trace;
}

BatchGrads zero_grads(const Network& net) {
  BatchGrads bg;
  bg.layers.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
      bg.layers[i].weights = Tensor(cv->kernel.weights.shape());
      bg.layers[i].bias = Tensor(cv->bias.shape());
    } else if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      bg.layers[i].weights = Tensor(lin->weights.shape());
      bg.layers[i].bias = Tensor(lin->bias.shape());
    } else if (const auto* sp = std::get_if<SpikeLayer>(&layer)) {
      if (sp->coeffs.granularity != Granularity::None) bg.layers[i].coeffs = Tensor(sp->coeffs.values.shape());
    }
  }
  bg.spike_rates.assign(net.spike_layer_indices().size(), 0.0);
  return bg;
}

void BatchGrads::scale(float factor) {
  for (auto& lg : layers) {
    for (int idx = 0; idx < lg.weights.size(); ++idx) lg.weights[idx] *= factor;
    for (int idx = 0; idx < lg.bias.size(); ++idx) lg.bias[idx] *= factor;
    for (int idx = 0; idx < lg.coeffs.size(); ++idx) lg.coeffs[idx] *= factor;
  }
  loss *= factor;
  for (auto& r : spike_rates) r *= factor;
}

BatchGrads loss_and_grad(const Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                         int timesteps) {
  return loss_and_grad_threaded(net, inputs, labels, timesteps, 1);
}

BatchGrads loss_and_grad_threaded(const Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                                  int timesteps, int threads) {
  if (inputs.empty()) throw InputError("loss_and_grad: empty batch");
  if (inputs.size() != labels.size())
    throw InputError("loss_and_grad: " + std::to_string(inputs.size()) + " inputs vs " +
                     std::to_string(labels.size()) + " labels");

  const int b = static_cast<int>(inputs.size());
  std::vector<SampleGrads> per_sample(static_cast<size_t>(b));
  parallel_ranges(b, resolve_threads(threads), [&](int begin, int end) {
    for (int i = begin; i < end; ++i)
      per_sample[static_cast<size_t>(i)] = backward_sample(net, inputs[static_cast<size_t>(i)],
                                                           labels[static_cast<size_t>(i)], timesteps);
  });

  // Combine in sample order so results do not depend on the thread count.
  BatchGrads bg = zero_grads(net);
  for (int i = 0; i < b; ++i) {
    const SampleGrads& sg = per_sample[static_cast<size_t>(i)];
    bg.loss += sg.loss;
    for (size_t l = 0; l < bg.layers.size(); ++l) {
      for (int idx = 0; idx < sg.layers[l].weights.size(); ++idx) bg.layers[l].weights[idx] += sg.layers[l].weights[idx];
      for (int idx = 0; idx < sg.layers[l].bias.size(); ++idx) bg.layers[l].bias[idx] += sg.layers[l].bias[idx];
      for (int idx = 0; idx < sg.layers[l].coeffs.size(); ++idx) bg.layers[l].coeffs[idx] += sg.layers[l].coeffs[idx];
    }
    for (size_t s = 0; s < bg.spike_rates.size(); ++s) bg.spike_rates[s] += sg.spike_rates[s];
  }
  bg.scale(1.0f / static_cast<float>(b));
  return bg;
}

void TrainConfig::validate() const {
  if (timesteps < 1) throw InputError("TrainConfig: timesteps must be >= 1");
  if (epochs < 1) throw InputError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw InputError("TrainConfig: batch size must be >= 1");
  if (!(lr > 0.0f)) throw InputError("TrainConfig: learning rate must be positive");
}

namespace {

// Adam / SGD-momentum over the flat list of parameter tensors.
struct OptimizerState {
  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  std::vector<std::vector<double>> m, v;
  long long step = 0;

  void bind(Network& net, const BatchGrads& bg) {
    params.clear();
    grads.clear();
    for (size_t i = 0; i < net.layers.size(); ++i) {
      Layer& layer = net.layers[i];
      if (auto* cv = std::get_if<ConvLayer>(&layer)) {
        params.push_back(&cv->kernel.weights);
        grads.push_back(&bg.layers[i].weights);
        params.push_back(&cv->bias);
        grads.push_back(&bg.layers[i].bias);
      } else if (auto* lin = std::get_if<LinearLayer>(&layer)) {
        params.push_back(&lin->weights);
        grads.push_back(&bg.layers[i].weights);
        params.push_back(&lin->bias);
        grads.push_back(&bg.layers[i].bias);
      } else if (auto* sp = std::get_if<SpikeLayer>(&layer)) {
        if (sp->coeffs.granularity != Granularity::None) {
          params.push_back(&sp->coeffs.values);
          grads.push_back(&bg.layers[i].coeffs);
        }
      }
    }
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (size_t p = 0; p < params.size(); ++p) {
        m[p].assign(static_cast<size_t>(params[p]->size()), 0.0);
        v[p].assign(static_cast<size_t>(params[p]->size()), 0.0);
      }
    }
  }

  void apply(Optimizer kind, float lr) {
    ++step;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8, momentum = 0.9;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (size_t p = 0; p < params.size(); ++p) {
      Tensor& w = *params[p];
      const Tensor& g = *grads[p];
      for (int idx = 0; idx < w.size(); ++idx) {
        const double gv = g[idx];
        double delta;
        if (kind == Optimizer::Adam) {
          auto& mp = m[p][static_cast<size_t>(idx)];
          auto& vp = v[p][static_cast<size_t>(idx)];
          mp = b1 * mp + (1.0 - b1) * gv;
          vp = b2 * vp + (1.0 - b2) * gv * gv;
          delta = lr * (mp / c1) / (std::sqrt(vp / c2) + eps);
        } else {
          auto& vel = m[p][static_cast<size_t>(idx)];
          vel = momentum * vel + gv;
          delta = lr * vel;
        }
        w[idx] = static_cast<float>(static_cast<double>(w[idx]) - delta);
      }
    }
  }
};

}  // namespace

RunReport train(Network& net, const IdxDataset& train_set, const IdxDataset& test_set, const TrainConfig& cfg,
                std::ostream* log) {
  cfg.validate();
  net.validate();
  if (net.folded) throw InputError("folded models cannot be trained");
  if (train_set.count() == 0) throw InputError("train: dataset is empty");

  const int threads = resolve_threads(cfg.threads);
  Batcher batcher(train_set.count(), cfg.batch_size, cfg.seed);
  OptimizerState opt;
  RunReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    batcher.start_epoch(epoch);
    std::vector<int> indices;
    double loss_sum = 0.0;
    long long sample_sum = 0;
    std::vector<double> rate_sum(net.spike_layer_indices().size(), 0.0);
    long long batch_count = 0;

    while (batcher.next(indices)) {
      std::vector<Tensor> inputs;
      std::vector<int> labels;
      inputs.reserve(indices.size());
      for (int idx : indices) {
        inputs.push_back(train_set.image_map(idx));
        labels.push_back(train_set.labels[static_cast<size_t>(idx)]);
      }
      BatchGrads bg = loss_and_grad_threaded(net, inputs, labels, cfg.timesteps, threads);
      if (!std::isfinite(bg.loss))
        throw DivergenceError("training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(batch_count + 1));
      opt.bind(net, bg);
      opt.apply(cfg.optimizer, cfg.lr);
      loss_sum += bg.loss * static_cast<double>(indices.size());
      sample_sum += static_cast<long long>(indices.size());
      for (size_t s = 0; s < rate_sum.size(); ++s) rate_sum[s] += bg.spike_rates[s];
      ++batch_count;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(sample_sum);
    for (double r : rate_sum) stats.spike_rates.push_back(r / static_cast<double>(batch_count));
    stats.test_accuracy = test_set.count() > 0 ? evaluate(net, test_set, cfg.timesteps, threads) : 0.0;
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    if (log) {
      nlohmann::json j{{"epoch", stats.epoch},
                       {"train_loss", stats.train_loss},
                       {"test_accuracy", stats.test_accuracy},
                       {"spike_rates", stats.spike_rates},
                       {"wall_time_s", stats.wall_seconds}};
      (*log) << j.dump() << "\n" << std::flush;
    }
  }
  return report;
}

double evaluate(const Network& net, const IdxDataset& dataset, int timesteps, int threads) {
  if (dataset.count() == 0) throw InputError("evaluate: dataset is empty");
  const int n = dataset.count();
  std::vector<char> correct(static_cast<size_t>(n), 0);
  parallel_ranges(n, resolve_threads(threads), [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Tensor logits = forward(net, dataset.image_map(i), timesteps);
      int best = 0;
      for (int q = 1; q < logits.size(); ++q)
        if (logits[q] > logits[best]) best = q;
      correct[static_cast<size_t>(i)] = best == dataset.labels[static_cast<size_t>(i)] ? 1 : 0;
    }
  });
  long long hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n);
}

bool RunReport::same_metrics(const RunReport& other) const {
  if (epochs.size() != other.epochs.size()) return false;
  for (size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.test_accuracy != b.test_accuracy ||
        a.spike_rates != b.spike_rates)
      return false;
  }
  return true;
}

std::string RunReport::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"test_accuracy", e.test_accuracy},
                     {"spike_rates", e.spike_rates},
                     {"wall_time_s", e.wall_seconds}};
    out += j.dump();
    out += "\n";
  }
  return out;
}

}  // namespace spikefold
