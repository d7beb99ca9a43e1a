#pragma once

#include <cstdint>

#include "spikefold/data_io.hpp"

namespace spikefold {

// Deterministic 28x28 ten-class digit set for offline work: glyphs jittered
// in position, intensity and thickness, with pixel dropout and noise. Same
// (count, seed) always yields the same bytes.
IdxDataset make_synth_digits(int count, uint64_t seed);

}  // namespace spikefold
