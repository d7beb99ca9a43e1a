#include "spikefold/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace spikefold {

std::vector<double> ValueHistogram::probabilities() const {
  std::vector<double> p;
  p.reserve(counts.size());
  for (long long c : counts) p.push_back(static_cast<double>(c) / static_cast<double>(total));
  return p;
}

ValueHistogram histogram(std::span<const float> samples, int bins) {
  if (samples.empty()) throw InputError("histogram: no samples");
  if (bins < 1) throw InputError("histogram: bins must be >= 1");
  float lo = samples[0], hi = samples[0];
  for (float v : samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ValueHistogram h;
  h.total = static_cast<long long>(samples.size());
  if (lo == hi) {
    h.edges = {lo, hi};
    h.counts = {h.total};
    return h;
  }
  h.edges.resize(static_cast<size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    h.edges[static_cast<size_t>(b)] = lo + (static_cast<double>(hi) - lo) * b / bins;
  h.counts.assign(static_cast<size_t>(bins), 0);
  const double width = (static_cast<double>(hi) - lo) / bins;
  for (float v : samples) {
    int b = static_cast<int>((static_cast<double>(v) - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<size_t>(b)];
  }
  return h;
}

ValueHistogram histogram_exact(std::span<const float> samples) {
  if (samples.empty()) throw InputError("histogram: no samples");
  std::map<float, long long> buckets;
  for (float v : samples) ++buckets[v];
  ValueHistogram h;
  h.exact = true;
  h.total = static_cast<long long>(samples.size());
  for (const auto& [v, c] : buckets) {
    h.values.push_back(v);
    h.counts.push_back(c);
  }
  return h;
}

double entropy_bits(const ValueHistogram& hist) {
  if (hist.total <= 0) throw InputError("entropy: empty histogram");
  double h = 0.0;
  for (long long c : hist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(hist.total);
    h -= p * std::log2(p);
  }
  return h;
}

double empirical_entropy(std::span<const float> samples, int bins) { return entropy_bits(histogram(samples, bins)); }

double empirical_entropy_exact(std::span<const float> samples) { return entropy_bits(histogram_exact(samples)); }

int capacity_bound(int bit_width) {
  if (bit_width < 1) throw InputError("capacity_bound: bit width must be >= 1, got " + std::to_string(bit_width));
  return bit_width;
}

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_double(uint64_t& state) {
  state = mix64(state);
  return static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

bool uniformity_maximizes(int n, int trials, uint64_t seed) {
  if (n < 2) throw InputError("uniformity_maximizes: n must be >= 2");
  const double h_uniform = std::log2(static_cast<double>(n));
  uint64_t state = mix64(seed ^ 0x5F12EDULL);
  std::vector<double> p(static_cast<size_t>(n));
  for (int t = 0; t < trials; ++t) {
    // Normalized exponentials: uniform on the probability simplex.
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      p[static_cast<size_t>(i)] = -std::log(std::max(unit_double(state), 1e-300));
      sum += p[static_cast<size_t>(i)];
    }
    double h = 0.0;
    for (int i = 0; i < n; ++i) {
      const double q = p[static_cast<size_t>(i)] / sum;
      if (q > 0.0) h -= q * std::log2(q);
    }
    if (h > h_uniform + 1e-12) return false;
  }
  return true;
}

SpikeStats spike_stats(const Network& net, const ForwardTrace& trace) {
  SpikeStats stats;
  const auto spike_idx = net.spike_layer_indices();
  for (size_t s = 0; s < spike_idx.size(); ++s) {
    SpikeLayerStats row;
    double total = 0.0;
    long long n = 0;
    for (const Tensor& o : trace.out[s]) {
      for (int idx = 0; idx < o.size(); ++idx) total += o[idx];
      n += o.size();
    }
    row.firing_rate = n ? total / static_cast<double>(n) : 0.0;
    const auto& sp = std::get<SpikeLayer>(net.layers[static_cast<size_t>(spike_idx[s])]);
    row.coeff_count = sp.coeffs.values.size();
    if (row.coeff_count > 0) {
      double abs_sum = 0.0;
      long long neg = 0;
      for (int idx = 0; idx < sp.coeffs.values.size(); ++idx) {
        abs_sum += std::abs(sp.coeffs.values[idx]);
        if (sp.coeffs.values[idx] < 0.0f) ++neg;
      }
      row.mean_abs_coeff = abs_sum / static_cast<double>(row.coeff_count);
      row.frac_negative_coeff = static_cast<double>(neg) / static_cast<double>(row.coeff_count);
    }
    stats.layers.push_back(row);
  }
  return stats;
}

std::vector<std::string> dump_channel_maps_csv(const Network& net, const ForwardTrace& trace,
                                               const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  const auto spike_idx = net.spike_layer_indices();
  for (size_t s = 0; s < spike_idx.size(); ++s) {
    const auto& sp = std::get<SpikeLayer>(net.layers[static_cast<size_t>(spike_idx[s])]);
    const int h = sp.height, c_ch = sp.channels;
    const int timesteps = static_cast<int>(trace.scaled[s].size());
    std::string path = out_dir + "/spike" + std::to_string(s) + "_scaled.csv";
    std::ofstream out(path);
    out << "position";
    for (int c = 0; c < c_ch; ++c) out << ",ch" << c;
    out << "\n";
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) {
        out << (y * h + x);
        for (int c = 0; c < c_ch; ++c) {
          double mean = 0.0;
          for (int t = 0; t < timesteps; ++t) mean += trace.scaled[s][static_cast<size_t>(t)][(y * h + x) * c_ch + c];
          out << "," << (timesteps ? mean / timesteps : 0.0);
        }
        out << "\n";
      }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace spikefold
