#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikefold/tensor.hpp"

namespace spikefold {

// Images rescaled to [0,1], one label per image.
struct IdxDataset {
  Tensor images;  // [N, H, W]
  std::vector<int> labels;

  int count() const { return images.rank() == 3 ? images.extent(0) : 0; }
  int height() const { return images.rank() == 3 ? images.extent(1) : 0; }
  int width() const { return images.rank() == 3 ? images.extent(2) : 0; }

  // Copies image i out as an [H, W, 1] map.
  Tensor image_map(int i) const;
};

// IDX magic numbers, big-endian: 0x00000803 for images, 0x00000801 for labels.
IdxDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes the dataset back out in IDX format (bytes = round(pixel * 255)).
void save_idx(const IdxDataset& ds, const std::string& images_path, const std::string& labels_path);

// Deterministic shuffled index stream. The permutation of an epoch depends
// only on (seed, epoch).
class Batcher {
 public:
  Batcher(int count, int batch_size, uint64_t seed);

  void start_epoch(int epoch);
  // Fills `indices` with the next batch; returns false when the epoch is done.
  bool next(std::vector<int>& indices);
  int batches_per_epoch() const;

 private:
  int count_;
  int batch_size_;
  uint64_t seed_;
  std::vector<int> order_;
  int cursor_ = 0;
};

}  // namespace spikefold
