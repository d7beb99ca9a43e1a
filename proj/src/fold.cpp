#include "spikefold/fold.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <thread>

#include "json.hpp"

namespace spikefold {

namespace {

inline int coef_flat(const Tensor& values, int c, int y, int x) {
  const int hc = values.extent(1);
  const int cc = values.extent(0);
  return ((cc == 1 ? 0 : c) * hc + (hc == 1 ? 0 : y)) * hc + (hc == 1 ? 0 : x);
}

}  // namespace

std::variant<ConvKernel, LocalKernel> fold_pair(const SpikeCoefficients& a, const ConvKernel& kernel, int in_size) {
  a.check_matches(kernel.in_channels(), in_size);
  switch (a.granularity) {
    case Granularity::None:
      return kernel;
    case Granularity::Layer: {
      ConvKernel folded = kernel;
      const double scale = a.values[0];
      for (int idx = 0; idx < folded.weights.size(); ++idx)
        folded.weights[idx] = static_cast<float>(scale * static_cast<double>(kernel.weights[idx]));
      return folded;
    }
    case Granularity::Channel: {
      ConvKernel folded = kernel;
      const int dk = kernel.kernel_size(), m_ch = kernel.in_channels(), n_ch = kernel.out_channels();
      for (int i = 0; i < dk; ++i)
        for (int j = 0; j < dk; ++j)
          for (int m = 0; m < m_ch; ++m) {
            const double scale = a.values[coef_flat(a.values, m, 0, 0)];
            float* row = folded.weights.data() + ((static_cast<size_t>(i) * dk + j) * m_ch + m) * n_ch;
            const float* src = kernel.weights.data() + ((static_cast<size_t>(i) * dk + j) * m_ch + m) * n_ch;
            for (int n = 0; n < n_ch; ++n) row[n] = static_cast<float>(scale * static_cast<double>(src[n]));
          }
      return folded;
    }
    case Granularity::Element: {
      const int dk = kernel.kernel_size(), m_ch = kernel.in_channels(), n_ch = kernel.out_channels();
      const int s = kernel.stride, p = kernel.padding;
      const int dg = conv_output_size(in_size, dk, s, p);
      LocalKernel local;
      local.stride = s;
      local.padding = p;
      local.weights = Tensor({dg, dg, dk, dk, m_ch, n_ch});
      const size_t slice = static_cast<size_t>(dk) * dk * m_ch * n_ch;
      for (int k = 0; k < dg; ++k)
        for (int l = 0; l < dg; ++l) {
          float* dst = local.weights.data() + (static_cast<size_t>(k) * dg + l) * slice;
          for (int i = 0; i < dk; ++i)
            for (int j = 0; j < dk; ++j) {
              const int y = k * s + i - p;
              const int x = l * s + j - p;
              const bool in_map = y >= 0 && y < in_size && x >= 0 && x < in_size;
              for (int m = 0; m < m_ch; ++m) {
                const double scale = in_map ? a.values[coef_flat(a.values, m, y, x)] : 1.0;
                const float* src = kernel.weights.data() + ((static_cast<size_t>(i) * dk + j) * m_ch + m) * n_ch;
                float* out = dst + ((static_cast<size_t>(i) * dk + j) * m_ch + m) * n_ch;
                for (int n = 0; n < n_ch; ++n) out[n] = static_cast<float>(scale * static_cast<double>(src[n]));
              }
            }
        }
      return local;
    }
  }
  throw InputError("fold_pair: unreachable granularity");
}

Tensor fold_linear(const SpikeCoefficients& a, const Tensor& weights, int channels, int height) {
  a.check_matches(channels, height);
  if (weights.rank() != 2 || weights.extent(0) != height * height * channels)
    throw DimensionError("fold_linear: weights " + shape_str(weights.shape()) + " vs map " +
                         std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(height));
  if (a.granularity == Granularity::None) return weights;
  Tensor folded = weights;
  const int q_dim = weights.extent(1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < height; ++x)
      for (int c = 0; c < channels; ++c) {
        const int p = (y * height + x) * channels + c;
        const double scale = a.values[coef_flat(a.values, c, y, x)];
        float* row = folded.data() + static_cast<size_t>(p) * q_dim;
        const float* src = weights.data() + static_cast<size_t>(p) * q_dim;
        for (int q = 0; q < q_dim; ++q) row[q] = static_cast<float>(scale * static_cast<double>(src[q]));
      }
  return folded;
}

Network fold_network(const Network& net) {
  net.validate();
  Network folded = net;
  for (size_t i = 0; i < folded.layers.size(); ++i) {
    auto* sp = std::get_if<SpikeLayer>(&folded.layers[i]);
    if (!sp) continue;
    if (sp->coeffs.granularity == Granularity::None) continue;
    if (i + 1 >= folded.layers.size())
      throw TopologyError("spike layer " + std::to_string(i) + " has no consumer (folding precondition violated)");
    Layer& consumer = folded.layers[i + 1];
    if (auto* cv = std::get_if<ConvLayer>(&consumer)) {
      auto result = fold_pair(sp->coeffs, cv->kernel, sp->height);
      if (std::holds_alternative<ConvKernel>(result)) {
        cv->kernel = std::get<ConvKernel>(std::move(result));
      } else {
        LocalConvLayer local;
        local.kernel = std::get<LocalKernel>(std::move(result));
        local.bias = cv->bias;
        consumer = std::move(local);
      }
    } else if (auto* lin = std::get_if<LinearLayer>(&consumer)) {
      lin->weights = fold_linear(sp->coeffs, lin->weights, sp->channels, sp->height);
    } else {
      throw TopologyError("spike layer " + std::to_string(i) +
                          " feeds a layer that cannot absorb coefficients (folding precondition violated)");
    }
    sp->coeffs = SpikeCoefficients{};  // binary output from here on
  }
  folded.folded = true;
  folded.validate();
  return folded;
}

EquivalenceReport verify_equivalence(const Network& source, const Network& folded, std::span<const Tensor> inputs,
                                     int timesteps, int threads) {
  if (inputs.empty()) throw InputError("verify_equivalence: no inputs");
  const int n = static_cast<int>(inputs.size());
  std::vector<double> diffs(static_cast<size_t>(n), 0.0);
  std::vector<char> agree(static_cast<size_t>(n), 0);

  int nthreads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::min(nthreads, n);
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const Tensor a = forward(source, inputs[static_cast<size_t>(i)], timesteps);
      const Tensor b = forward(folded, inputs[static_cast<size_t>(i)], timesteps);
      require_same_shape(a, b, "verify_equivalence");
      double worst = 0.0;
      int arga = 0, argb = 0;
      for (int q = 0; q < a.size(); ++q) {
        worst = std::max(worst, std::abs(static_cast<double>(a[q]) - static_cast<double>(b[q])));
        if (a[q] > a[arga]) arga = q;
        if (b[q] > b[argb]) argb = q;
      }
      diffs[static_cast<size_t>(i)] = worst;
      agree[static_cast<size_t>(i)] = arga == argb ? 1 : 0;
    }
  };
  if (nthreads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const int begin = t * chunk, end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  EquivalenceReport report;
  report.inputs_checked = n;
  long long hits = 0;
  for (int i = 0; i < n; ++i) {
    report.max_abs_diff = std::max(report.max_abs_diff, diffs[static_cast<size_t>(i)]);
    hits += agree[static_cast<size_t>(i)];
  }
  report.argmax_agreement = static_cast<double>(hits) / static_cast<double>(n);
  return report;
}

CostReport cost_report(const Network& source, const Network& folded) {
  CostReport report;
  int h = source.input_height;
  bool input_is_spiking = false;
  bool input_is_binary = false;  // true when the producing spike layer has no coefficients

  for (size_t i = 0; i < source.layers.size(); ++i) {
    const Layer& src = source.layers[i];
    const Layer* fld = i < folded.layers.size() ? &folded.layers[i] : nullptr;
    LayerCost row;
    if (const auto* cv = std::get_if<ConvLayer>(&src)) {
      const int dk = cv->kernel.kernel_size(), m = cv->kernel.in_channels(), n = cv->kernel.out_channels();
      const int dg = conv_output_size(h, dk, cv->kernel.stride, cv->kernel.padding);
      row.kind = "conv";
      row.params_before = static_cast<long long>(dk) * dk * m * n;
      row.bias_params = n;
      row.synapses = static_cast<long long>(dg) * dg * n * dk * dk * m;
      row.mults_before = input_is_spiking && input_is_binary ? 0 : row.synapses;
      if (fld && std::holds_alternative<LocalConvLayer>(*fld))
        row.params_after = std::get<LocalConvLayer>(*fld).kernel.weights.size();
      else
        row.params_after = row.params_before;
      row.mults_after = input_is_spiking ? 0 : row.synapses;  // folded spikes are binary
      h = dg;
      input_is_spiking = false;
    } else if (const auto* lin = std::get_if<LinearLayer>(&src)) {
      row.kind = "linear";
      row.params_before = lin->weights.size();
      row.params_after = row.params_before;
      row.bias_params = lin->bias.size();
      row.synapses = lin->weights.size();
      row.mults_before = input_is_spiking && input_is_binary ? 0 : row.synapses;
      row.mults_after = input_is_spiking ? 0 : row.synapses;
      input_is_spiking = false;
    } else if (const auto* sp = std::get_if<SpikeLayer>(&src)) {
      row.kind = std::string("spike(") + granularity_name(sp->coeffs.granularity) + ")";
      row.coeff_params_before = sp->coeffs.values.size();
      input_is_spiking = true;
      input_is_binary = sp->coeffs.granularity == Granularity::None;
    } else {
      const auto& lc = std::get<LocalConvLayer>(src);
      row.kind = "local-conv";
      row.params_before = lc.kernel.weights.size();
      row.params_after = row.params_before;
      row.bias_params = lc.bias.size();
      const int dg = lc.kernel.out_size();
      row.synapses = static_cast<long long>(dg) * dg * lc.kernel.out_channels() * lc.kernel.kernel_size() *
                     lc.kernel.kernel_size() * lc.kernel.in_channels();
      row.mults_before = input_is_spiking && input_is_binary ? 0 : row.synapses;
      row.mults_after = input_is_spiking ? 0 : row.synapses;
      h = dg;
      input_is_spiking = false;
    }
    report.layers.push_back(row);
  }

  for (const auto& row : report.layers) {
    report.total_params_before += row.params_before + row.coeff_params_before + row.bias_params;
    report.total_params_after += row.params_after + row.bias_params;
    report.total_synapses += row.synapses;
    report.total_mults_before += row.mults_before;
    report.total_mults_after += row.mults_after;
  }
  return report;
}

std::string CostReport::to_text() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %14s %14s %10s %14s %14s %14s\n", "layer", "params-before", "params-after",
                "bias", "synapses", "mults-before", "mults-after");
  out += line;
  for (const auto& row : layers) {
    std::snprintf(line, sizeof line, "%-16s %14lld %14lld %10lld %14lld %14lld %14lld\n", row.kind.c_str(),
                  row.params_before + row.coeff_params_before, row.params_after, row.bias_params, row.synapses,
                  row.mults_before, row.mults_after);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-16s %14lld %14lld %10s %14lld %14lld %14lld\n", "total", total_params_before,
                total_params_after, "", total_synapses, total_mults_before, total_mults_after);
  out += line;
  return out;
}

std::string CostReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : layers)
    rows.push_back({{"kind", row.kind},
                    {"params_before", row.params_before},
                    {"params_after", row.params_after},
                    {"coeff_params_before", row.coeff_params_before},
                    {"bias_params", row.bias_params},
                    {"synapses", row.synapses},
                    {"mults_before", row.mults_before},
                    {"mults_after", row.mults_after}});
  nlohmann::json j{{"layers", rows},
                   {"total_params_before", total_params_before},
                   {"total_params_after", total_params_after},
                   {"total_synapses", total_synapses},
                   {"total_mults_before", total_mults_before},
                   {"total_mults_after", total_mults_after}};
  return j.dump(2);
}

}  // namespace spikefold
