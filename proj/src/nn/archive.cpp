#include "spectrai/nn/archive.hpp"

#include <bit>
#include <cstring>
#include <set>

#include "spectrai/io/envi.hpp"
#include "spectrai/io/json_fields.hpp"

namespace spectrai::nn {

namespace fs = std::filesystem;
using nlohmann::json;
using io::get_bool;
using io::get_number;
using io::reject_unknown;

namespace {

constexpr int kFormatVersion = 1;

std::string blob_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.bin", i);
  return buf;
}

}  // namespace

void write_float_blob(const Tensor<float>& t, const fs::path& path) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(t.size()) * 4);
  for (Index i = 0; i < t.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(t[i]);
    for (int k = 0; k < 4; ++k) bytes[static_cast<std::size_t>(i * 4 + k)] = static_cast<std::uint8_t>(u >> (8 * k));
  }
  io::write_file_bytes(path, bytes);
}

std::vector<float> read_float_blob(const fs::path& path, Index count) {
  const auto bytes = io::read_file_bytes(path);
  if (bytes.size() != static_cast<std::size_t>(count) * 4)
    throw IoError("weight blob " + path.string() + ": expected " + std::to_string(count * 4) + " bytes, got " +
                  std::to_string(bytes.size()));
  std::vector<float> out(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int k = 0; k < 4; ++k) u |= std::uint32_t{bytes[static_cast<std::size_t>(i * 4 + k)]} << (8 * k);
    out[static_cast<std::size_t>(i)] = std::bit_cast<float>(u);
  }
  return out;
}

json to_json(const NetworkConfig& c) {
  json j;
  j["family"] = std::string(to_string(c.family));
  j["in_channels"] = c.in_channels;
  j["out_channels"] = c.out_channels;
  j["depth"] = c.depth;
  j["base_channels"] = c.base_channels;
  j["kernel"] = c.kernel;
  j["pad_input"] = c.pad_input;
  j["rcan_groups"] = c.rcan.groups;
  j["rcan_blocks"] = c.rcan.blocks_per_group;
  j["rcan_features"] = c.rcan.features;
  j["rcan_reduction"] = c.rcan.reduction;
  j["scale"] = c.rcan.scale;
  return j;
}

NetworkConfig network_config_from_json(const json& j, const std::string& path) {
  reject_unknown(j,
                 {"family", "in_channels", "out_channels", "depth", "base_channels", "kernel", "pad_input",
                  "rcan_groups", "rcan_blocks", "rcan_features", "rcan_reduction", "scale"},
                 path);
  if (!j.contains("family")) throw ConfigError(path + ".family: required");
  NetworkFamily family;
  try {
    family = parse_family(j.at("family").get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(path + ".family: " + e.what());
  }
  NetworkConfig c = default_network_config(family, 1, 1);
  c.in_channels = get_number<Index>(j, "in_channels", c.in_channels, path);
  c.out_channels = get_number<Index>(j, "out_channels", c.out_channels, path);
  c.depth = get_number<int>(j, "depth", c.depth, path);
  c.base_channels = get_number<int>(j, "base_channels", c.base_channels, path);
  c.kernel = get_number<int>(j, "kernel", c.kernel, path);
  c.pad_input = get_bool(j, "pad_input", c.pad_input, path);
  c.rcan.groups = get_number<int>(j, "rcan_groups", c.rcan.groups, path);
  c.rcan.blocks_per_group = get_number<int>(j, "rcan_blocks", c.rcan.blocks_per_group, path);
  c.rcan.features = get_number<int>(j, "rcan_features", c.rcan.features, path);
  c.rcan.reduction = get_number<int>(j, "rcan_reduction", c.rcan.reduction, path);
  c.rcan.scale = get_number<int>(j, "scale", c.rcan.scale, path);
  return c;
}

template <typename T>
void save_weights(Network<T>& net, const fs::path& dir) {
  fs::create_directories(dir);
  json tensors = json::array();
  std::size_t i = 0;
  for (auto& [name, p] : net.parameters()) {
    const std::string file = blob_name(i++);
    write_float_blob(p->value.template cast<float>(), dir / file);
    tensors.push_back({{"name", name}, {"shape", p->value.shape()}, {"dtype", "float32"}, {"file", file},
                       {"trainable", p->trainable}});
  }
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["task"] = std::string(to_string(net.task()));
  meta["family"] = std::string(to_string(net.config().family));
  meta["config"] = to_json(net.config());
  meta["tensors"] = std::move(tensors);
  io::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

template <typename T>
void load_weights(Network<T>& net, const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(io::read_text_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("weight archive meta.json: ") + e.what());
  }
  if (meta.value("format_version", 0) != kFormatVersion) throw ParseError("unsupported weight archive version");
  auto params = net.parameters();
  const auto& tensors = meta.at("tensors");
  if (tensors.size() != params.size())
    throw ShapeError("weight archive holds " + std::to_string(tensors.size()) + " tensors, network has " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != name)
      throw ShapeError("weight archive tensor " + std::to_string(i) + " is " + t.at("name").get<std::string>() +
                       ", expected " + name);
    if (t.at("shape").get<Shape>() != p->value.shape())
      throw ShapeError("weight archive tensor " + name + " has shape " + shape_string(t.at("shape").get<Shape>()) +
                       ", expected " + shape_string(p->value.shape()));
    const auto values = read_float_blob(dir / t.at("file").get<std::string>(), p->value.size());
    for (Index k = 0; k < p->value.size(); ++k) p->value[k] = static_cast<T>(values[static_cast<std::size_t>(k)]);
  }
}

template <typename T>
Network<T> load_network(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(io::read_text_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("weight archive meta.json: ") + e.what());
  }
  const TaskKind task = parse_task(meta.at("task").get<std::string>());
  Network<T> net = build_network<T>(task, network_config_from_json(meta.at("config")), 0);
  load_weights(net, dir);
  return net;
}

template <typename T>
std::uint64_t weight_hash(Network<T>& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& [name, p] : net.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p->value.size()) * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

template void save_weights<float>(Network<float>&, const fs::path&);
template void save_weights<double>(Network<double>&, const fs::path&);
template void load_weights<float>(Network<float>&, const fs::path&);
template void load_weights<double>(Network<double>&, const fs::path&);
template Network<float> load_network<float>(const fs::path&);
template Network<double> load_network<double>(const fs::path&);
template std::uint64_t weight_hash<float>(Network<float>&);
template std::uint64_t weight_hash<double>(Network<double>&);

}  // namespace spectrai::nn
