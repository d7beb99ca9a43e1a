#include "spikefold/data_io.hpp"

#include <cmath>
#include <fstream>

namespace spikefold {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError(path + ": truncated header (expected 4 more bytes)");
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::vector<unsigned char> read_payload(std::istream& in, size_t expected, const std::string& path) {
  std::vector<unsigned char> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected));
  const size_t got = static_cast<size_t>(in.gcount());
  if (got != expected)
    throw FormatError(path + ": truncated payload, expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(got));
  return buf;
}

}  // namespace

Tensor IdxDataset::image_map(int i) const {
  const int h = height(), w = width();
  Tensor map({h, w, 1});
  const float* src = images.data() + static_cast<size_t>(i) * h * w;
  for (int idx = 0; idx < h * w; ++idx) map[idx] = src[idx];
  return map;
}

IdxDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgf(images_path, std::ios::binary);
  if (!imgf) throw FormatError(images_path + ": cannot open");
  const uint32_t img_magic = read_be32(imgf, images_path);
  if (img_magic != kImagesMagic)
    throw FormatError(images_path + ": bad images magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", img_magic);
      return std::string(buf);
    }() + " (expected 0x00000803)");
  const uint32_t n = read_be32(imgf, images_path);
  const uint32_t h = read_be32(imgf, images_path);
  const uint32_t w = read_be32(imgf, images_path);
  const auto pixels = read_payload(imgf, size_t(n) * h * w, images_path);

  std::ifstream labf(labels_path, std::ios::binary);
  if (!labf) throw FormatError(labels_path + ": cannot open");
  const uint32_t lab_magic = read_be32(labf, labels_path);
  if (lab_magic != kLabelsMagic)
    throw FormatError(labels_path + ": bad labels magic (expected 0x00000801)");
  const uint32_t ln = read_be32(labf, labels_path);
  if (ln != n)
    throw FormatError(labels_path + ": " + std::to_string(ln) + " labels for " + std::to_string(n) + " images");
  const auto labels_raw = read_payload(labf, ln, labels_path);

  IdxDataset ds;
  ds.images = Tensor({static_cast<int>(n), static_cast<int>(h), static_cast<int>(w)});
  for (size_t i = 0; i < pixels.size(); ++i) ds.images[static_cast<int>(i)] = float(pixels[i]) / 255.0f;
  ds.labels.assign(labels_raw.begin(), labels_raw.end());
  return ds;
}

void save_idx(const IdxDataset& ds, const std::string& images_path, const std::string& labels_path) {
  std::ofstream imgf(images_path, std::ios::binary);
  if (!imgf) throw FormatError(images_path + ": cannot open for writing");
  write_be32(imgf, kImagesMagic);
  write_be32(imgf, static_cast<uint32_t>(ds.count()));
  write_be32(imgf, static_cast<uint32_t>(ds.height()));
  write_be32(imgf, static_cast<uint32_t>(ds.width()));
  for (int i = 0; i < ds.images.size(); ++i) {
    const float v = std::min(1.0f, std::max(0.0f, ds.images[i]));
    const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0f));
    imgf.write(reinterpret_cast<const char*>(&b), 1);
  }

  std::ofstream labf(labels_path, std::ios::binary);
  if (!labf) throw FormatError(labels_path + ": cannot open for writing");
  write_be32(labf, kLabelsMagic);
  write_be32(labf, static_cast<uint32_t>(ds.labels.size()));
  for (int lab : ds.labels) {
    const unsigned char b = static_cast<unsigned char>(lab);
    labf.write(reinterpret_cast<const char*>(&b), 1);
  }
}

namespace {

// splitmix64; the standard distributions are implementation-defined, these are not.
uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Batcher::Batcher(int count, int batch_size, uint64_t seed)
    : count_(count), batch_size_(std::max(1, batch_size)), seed_(seed) {
  if (count <= 0) throw InputError("Batcher: dataset is empty");
  order_.resize(static_cast<size_t>(count));
  start_epoch(0);
}

void Batcher::start_epoch(int epoch) {
  for (int i = 0; i < count_; ++i) order_[static_cast<size_t>(i)] = i;
  // Fisher-Yates keyed on (seed, epoch) only.
  uint64_t s = mix64(seed_ ^ mix64(static_cast<uint64_t>(epoch) + 1));
  for (int i = count_ - 1; i > 0; --i) {
    s = mix64(s);
    const int j = static_cast<int>(s % static_cast<uint64_t>(i + 1));
    std::swap(order_[static_cast<size_t>(i)], order_[static_cast<size_t>(j)]);
  }
  cursor_ = 0;
}

bool Batcher::next(std::vector<int>& indices) {
  if (cursor_ >= count_) return false;
  const int take = std::min(batch_size_, count_ - cursor_);
  indices.assign(order_.begin() + cursor_, order_.begin() + cursor_ + take);
  cursor_ += take;
  return true;
}

int Batcher::batches_per_epoch() const { return (count_ + batch_size_ - 1) / batch_size_; }

}  // namespace spikefold
