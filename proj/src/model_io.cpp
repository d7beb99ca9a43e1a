#include "spikefold/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace spikefold {

using nlohmann::json;

uint32_t crc32_ieee(const unsigned char* data, size_t len) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

uint32_t get_u32(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void put_tensor(std::vector<unsigned char>& out, const Tensor& t) {
  for (int i = 0; i < t.size(); ++i) put_u32(out, std::bit_cast<uint32_t>(t[i]));
}

Tensor get_tensor(const unsigned char* p, const std::vector<int>& shape) {
  Tensor t(shape);
  for (int i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get_u32(p + static_cast<size_t>(i) * 4));
  return t;
}

// Tensors appear in layer order: weights then bias for weighted layers,
// coefficient values for spike layers with coefficients.
void collect_tensors(const Network& net, json& manifest, std::vector<const Tensor*>& tensors) {
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    const Layer& layer = net.layers[i];
    auto add = [&](const std::string& name, const Tensor& t) {
      manifest.push_back({{"name", prefix + "." + name}, {"shape", t.shape()}});
      tensors.push_back(&t);
    };
    if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
      add("weights", cv->kernel.weights);
      add("bias", cv->bias);
    } else if (const auto* lc = std::get_if<LocalConvLayer>(&layer)) {
      add("weights", lc->kernel.weights);
      add("bias", lc->bias);
    } else if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      add("weights", lin->weights);
      add("bias", lin->bias);
    } else {
      const auto& sp = std::get<SpikeLayer>(layer);
      if (sp.coeffs.granularity != Granularity::None) add("coefficients", sp.coeffs.values);
    }
  }
}

json describe_layers(const Network& net) {
  json layers = json::array();
  for (const Layer& layer : net.layers) {
    if (const auto* cv = std::get_if<ConvLayer>(&layer)) {
      layers.push_back({{"kind", "conv"},
                        {"kernel", cv->kernel.kernel_size()},
                        {"stride", cv->kernel.stride},
                        {"padding", cv->kernel.padding},
                        {"in_channels", cv->kernel.in_channels()},
                        {"out_channels", cv->kernel.out_channels()}});
    } else if (const auto* lc = std::get_if<LocalConvLayer>(&layer)) {
      layers.push_back({{"kind", "local-conv"},
                        {"kernel", lc->kernel.kernel_size()},
                        {"stride", lc->kernel.stride},
                        {"padding", lc->kernel.padding},
                        {"in_channels", lc->kernel.in_channels()},
                        {"out_channels", lc->kernel.out_channels()},
                        {"out_size", lc->kernel.out_size()}});
    } else if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      layers.push_back({{"kind", "linear"}, {"in", lin->weights.extent(0)}, {"out", lin->weights.extent(1)}});
    } else {
      const auto& sp = std::get<SpikeLayer>(layer);
      layers.push_back({{"kind", "spike"},
                        {"granularity", granularity_name(sp.coeffs.granularity)},
                        {"tau", sp.cfg.tau},
                        {"v_th", sp.cfg.v_th},
                        {"u_rest", sp.cfg.u_rest},
                        {"mode", sp.mode == NeuronMode::Fire ? "fire" : "clamp"},
                        {"channels", sp.channels},
                        {"height", sp.height}});
    }
  }
  return layers;
}

}  // namespace

void save_model(const Network& net, const std::string& path, std::optional<int> default_timesteps) {
  json manifest = json::array();
  std::vector<const Tensor*> tensors;
  collect_tensors(net, manifest, tensors);

  json desc{{"format", "rspk"},
            {"arch", net.arch},
            {"folded", net.folded},
            {"input_height", net.input_height},
            {"input_channels", net.input_channels},
            {"layers", describe_layers(net)},
            {"tensors", manifest}};
  if (default_timesteps) desc["timesteps"] = *default_timesteps;
  const std::string desc_text = desc.dump();

  std::vector<unsigned char> out;
  out.push_back('R');
  out.push_back('S');
  out.push_back('P');
  out.push_back('K');
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<uint32_t>(desc_text.size()));
  out.insert(out.end(), desc_text.begin(), desc_text.end());
  for (const Tensor* t : tensors) put_tensor(out, *t);
  put_u32(out, crc32_ieee(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(path + ": cannot open for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError(path + ": write failed");
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path + ": cannot open");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 12) throw CorruptionError(path + ": truncated container (" + std::to_string(buf.size()) + " bytes)");
  if (std::memcmp(buf.data(), "RSPK", 4) != 0) throw FormatError(path + ": bad magic (expected RSPK)");
  const uint32_t version = get_u32(buf.data() + 4);
  if (version != kContainerVersion)
    throw FormatError(path + ": container version " + std::to_string(version) + ", this build reads version " +
                      std::to_string(kContainerVersion));
  const uint32_t desc_len = get_u32(buf.data() + 8);
  if (12 + static_cast<size_t>(desc_len) + 4 > buf.size())
    throw CorruptionError(path + ": descriptor extends past end of file");

  json desc;
  try {
    desc = json::parse(buf.begin() + 12, buf.begin() + 12 + desc_len);
  } catch (const json::exception& e) {
    throw CorruptionError(path + ": descriptor is not valid JSON (" + e.what() + ")");
  }

  size_t payload = 0;
  for (const auto& entry : desc.at("tensors")) {
    size_t n = 1;
    for (int e : entry.at("shape").get<std::vector<int>>()) n *= static_cast<size_t>(e);
    payload += n * 4;
  }
  const size_t expected = 12 + desc_len + payload + 4;
  if (buf.size() != expected)
    throw CorruptionError(path + ": expected " + std::to_string(expected) + " bytes, file has " +
                          std::to_string(buf.size()));
  const uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
  const uint32_t actual_crc = crc32_ieee(buf.data(), buf.size() - 4);
  if (stored_crc != actual_crc) throw CorruptionError(path + ": checksum mismatch");

  LoadedModel loaded;
  Network& net = loaded.net;
  net.arch = desc.value("arch", "");
  net.folded = desc.value("folded", false);
  net.input_height = desc.at("input_height").get<int>();
  net.input_channels = desc.at("input_channels").get<int>();
  if (desc.contains("timesteps")) loaded.default_timesteps = desc["timesteps"].get<int>();

  const unsigned char* cursor = buf.data() + 12 + desc_len;
  size_t tensor_index = 0;
  auto next_tensor = [&]() -> Tensor {
    const auto& entry = desc.at("tensors").at(tensor_index++);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    Tensor t = get_tensor(cursor, shape);
    cursor += static_cast<size_t>(t.size()) * 4;
    return t;
  };

  for (const auto& jl : desc.at("layers")) {
    const std::string kind = jl.at("kind").get<std::string>();
    if (kind == "conv") {
      ConvLayer layer;
      layer.kernel.stride = jl.at("stride").get<int>();
      layer.kernel.padding = jl.at("padding").get<int>();
      layer.kernel.weights = next_tensor();
      layer.bias = next_tensor();
      net.layers.emplace_back(std::move(layer));
    } else if (kind == "local-conv") {
      LocalConvLayer layer;
      layer.kernel.stride = jl.at("stride").get<int>();
      layer.kernel.padding = jl.at("padding").get<int>();
      layer.kernel.weights = next_tensor();
      layer.bias = next_tensor();
      net.layers.emplace_back(std::move(layer));
    } else if (kind == "linear") {
      LinearLayer layer;
      layer.weights = next_tensor();
      layer.bias = next_tensor();
      net.layers.emplace_back(std::move(layer));
    } else if (kind == "spike") {
      SpikeLayer layer;
      layer.cfg.tau = jl.at("tau").get<float>();
      layer.cfg.v_th = jl.at("v_th").get<float>();
      layer.cfg.u_rest = jl.at("u_rest").get<float>();
      layer.mode = jl.value("mode", "fire") == "clamp" ? NeuronMode::Clamp : NeuronMode::Fire;
      layer.channels = jl.at("channels").get<int>();
      layer.height = jl.at("height").get<int>();
      layer.coeffs.granularity = granularity_from_name(jl.at("granularity").get<std::string>());
      if (layer.coeffs.granularity != Granularity::None) layer.coeffs.values = next_tensor();
      net.layers.emplace_back(std::move(layer));
    } else {
      throw FormatError(path + ": unknown layer kind '" + kind + "'");
    }
  }
  net.validate();
  return loaded;
}

}  // namespace spikefold
