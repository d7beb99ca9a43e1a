#include "spikefold/synth.hpp"

#include <algorithm>
#include <array>

namespace spikefold {

namespace {

// 5x7 digit glyphs, '#' = ink.
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs{{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "},
}};

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

float unit(uint64_t& s) {
  s = mix64(s);
  return static_cast<float>((s >> 40) & 0xFFFFFFULL) * (1.0f / 16777216.0f);
}

int pick(uint64_t& s, int lo, int hi) {  // inclusive
  s = mix64(s);
  return lo + static_cast<int>(s % static_cast<uint64_t>(hi - lo + 1));
}

}  // namespace

IdxDataset make_synth_digits(int count, uint64_t seed) {
  if (count < 1) throw InputError("make_synth_digits: count must be >= 1");
  constexpr int kSide = 28;
  constexpr int kScale = 2;  // glyphs render at 10x14
  IdxDataset ds;
  ds.images = Tensor({count, kSide, kSide});
  ds.labels.resize(static_cast<size_t>(count));

  for (int i = 0; i < count; ++i) {
    uint64_t s = mix64(seed ^ mix64(static_cast<uint64_t>(i) + 0x51DE5ULL));
    const int digit = pick(s, 0, 9);
    ds.labels[static_cast<size_t>(i)] = digit;

    float canvas[kSide][kSide] = {};
    const int gw = 5 * kScale, gh = 7 * kScale;
    const int x0 = (kSide - gw) / 2 + pick(s, -5, 5);
    const int y0 = (kSide - gh) / 2 + pick(s, -5, 5);
    const float intensity = 0.55f + 0.45f * unit(s);
    const bool thick = unit(s) < 0.5f;
    const float dropout = 0.12f;

    for (int gy = 0; gy < 7; ++gy)
      for (int gx = 0; gx < 5; ++gx) {
        if (kGlyphs[static_cast<size_t>(digit)][static_cast<size_t>(gy)][gx] != '#') continue;
        if (unit(s) < dropout) continue;
        const float ink = intensity * (0.85f + 0.15f * unit(s));
        for (int dy = 0; dy < kScale; ++dy)
          for (int dx = 0; dx < kScale; ++dx) {
            const int y = y0 + gy * kScale + dy;
            const int x = x0 + gx * kScale + dx;
            if (y >= 0 && y < kSide && x >= 0 && x < kSide) canvas[y][x] = std::max(canvas[y][x], ink);
            if (thick && x + 1 >= 0 && x + 1 < kSide && y >= 0 && y < kSide)
              canvas[y][x + 1] = std::max(canvas[y][x + 1], ink * 0.8f);
          }
      }

    float* dst = ds.images.data() + static_cast<size_t>(i) * kSide * kSide;
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        const float noise = (unit(s) - 0.5f) * 0.16f;
        dst[y * kSide + x] = std::clamp(canvas[y][x] + noise, 0.0f, 1.0f);
      }
  }
  return ds;
}

}  // namespace spikefold
