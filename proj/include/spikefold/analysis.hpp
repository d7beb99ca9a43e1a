#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikefold/network.hpp"

namespace spikefold {

struct ValueHistogram {
  std::vector<double> edges;   // bin edges for width-binned mode (size bins+1)
  std::vector<float> values;   // distinct values for exact mode
  std::vector<long long> counts;
  long long total = 0;
  bool exact = false;

  std::vector<double> probabilities() const;
};

// Equal-width bins over the observed range; a degenerate range collapses to
// one bin. Values exactly on the top edge land in the last bin.
ValueHistogram histogram(std::span<const float> samples, int bins);

// One bin per distinct value (for binary or small discrete dumps).
ValueHistogram histogram_exact(std::span<const float> samples);

// H = -sum p log2 p over nonempty bins, with 0*log0 = 0. Throws InputError on
// empty input.
double entropy_bits(const ValueHistogram& hist);
double empirical_entropy(std::span<const float> samples, int bins);  // width-binned
double empirical_entropy_exact(std::span<const float> samples);

// Maximum entropy of a b-bit code, attained at the uniform distribution.
int capacity_bound(int bit_width);

// Draws `trials` random distributions on n outcomes and checks that none
// beats the uniform distribution's entropy.
bool uniformity_maximizes(int n, int trials, uint64_t seed);

struct SpikeLayerStats {
  double firing_rate = 0.0;  // mean of the binary outputs over positions and timesteps
  double mean_abs_coeff = 0.0;
  double frac_negative_coeff = 0.0;
  long long coeff_count = 0;
};

struct SpikeStats {
  std::vector<SpikeLayerStats> layers;
};

// Summary of a recorded forward trace against the network that produced it.
SpikeStats spike_stats(const Network& net, const ForwardTrace& trace);

// Writes one CSV per spike layer: row = spatial position, column = channel,
// value = scaled output averaged over timesteps. Returns the paths written.
std::vector<std::string> dump_channel_maps_csv(const Network& net, const ForwardTrace& trace,
                                               const std::string& out_dir);

}  // namespace spikefold
