#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectrai/nn/networks.hpp"
#include "spectrai/pipeline/augment.hpp"
#include "spectrai/pipeline/dataset.hpp"
#include "spectrai/pipeline/filters.hpp"
#include "spectrai/train/hyper.hpp"

namespace spectrai::train {

struct DataConfig {
  std::string manifest;
  std::string output_dir = "runs/experiment";
  /// "none" or a NormalizeMode. Regression tasks accept only none and minmax,
  /// and scale the target with the input's statistics.
  std::string normalize = "none";

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  std::string name;
  TaskKind task = TaskKind::Segmentation;
  nn::NetworkConfig network;
  Hyperparameters hyper;
  AugmentationPolicy augmentation;
  SplitSpec split;
  DataConfig data;

  /// Every violation found, gate violations first. Empty means valid.
  std::vector<std::string> violations() const;
  /// Throws GateError for gate violations, ConfigError otherwise.
  void validate() const;
};

/// Normalization options a task accepts ("none" first).
std::vector<std::string> permitted_normalize(TaskKind task);

nlohmann::json to_json(const Hyperparameters& hyper);

/// Task defaults: first permitted family, task hyperparameters, no
/// augmentation, 85:10:5 split.
ExperimentConfig default_experiment_config(TaskKind task);

/// Fully materialized document with sections task, network, hyper,
/// augmentation, split, data.
nlohmann::json to_json(const ExperimentConfig& config);
/// Unknown keys are rejected with their key path; missing keys default.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Sectioned key = value text; `add = <spec>` may repeat under [augmentation].
ExperimentConfig parse_config_ini(std::string_view text);
std::string format_config_ini(const ExperimentConfig& config);

/// JSON when the file starts with '{', INI otherwise. Relative manifest
/// paths resolve against SPECTRAI_DATA_DIR when it is set.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Relative paths resolve against SPECTRAI_DATA_DIR when it is set.
std::filesystem::path resolve_data_path(const std::string& path);

/// Hex FNV-1a of the canonical JSON form.
std::string config_hash(const ExperimentConfig& config);

std::optional<NormalizeMode> parse_normalize_option(const std::string& text);

}  // namespace spectrai::train
