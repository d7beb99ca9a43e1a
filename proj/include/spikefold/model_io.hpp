#pragma once

#include <optional>
#include <string>

#include "spikefold/network.hpp"

namespace spikefold {

// RSPK container, fixed so independent implementations interoperate:
//   magic "RSPK" | version u32 LE | descriptor length u32 LE |
//   descriptor (JSON text: architecture, granularities, folded flag, tensor
//   manifest) | raw tensor payloads, float32 LE, in declaration order |
//   CRC-32 (IEEE) u32 LE over all preceding bytes.
constexpr uint32_t kContainerVersion = 1;

void save_model(const Network& net, const std::string& path, std::optional<int> default_timesteps = std::nullopt);

struct LoadedModel {
  Network net;
  std::optional<int> default_timesteps;
};

// Throws FormatError on bad magic or version mismatch (naming both versions),
// CorruptionError on truncation or checksum failure.
LoadedModel load_model(const std::string& path);

uint32_t crc32_ieee(const unsigned char* data, size_t len);

}  // namespace spikefold
