#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "spectrai/nn/networks.hpp"

namespace spectrai::nn {

nlohmann::json to_json(const NetworkConfig& config);
/// Missing keys take the family defaults; unknown keys are rejected.
NetworkConfig network_config_from_json(const nlohmann::json& j, const std::string& path = "network");

/// Weight archive: `meta.json` plus one little-endian float32 blob per tensor
/// (row-major), named by tensor index. Buffers are archived with the weights.
template <typename T>
void save_weights(Network<T>& net, const std::filesystem::path& dir);

/// Loads into an existing network; names and shapes must match exactly.
template <typename T>
void load_weights(Network<T>& net, const std::filesystem::path& dir);

/// Builds the archived network and loads its weights.
template <typename T>
Network<T> load_network(const std::filesystem::path& dir);

/// Raw little-endian float32 blob helpers shared with optimizer checkpoints.
void write_float_blob(const Tensor<float>& t, const std::filesystem::path& path);
std::vector<float> read_float_blob(const std::filesystem::path& path, Index count);

/// FNV-1a over all parameter and buffer bytes.
template <typename T>
std::uint64_t weight_hash(Network<T>& net);

}  // namespace spectrai::nn
