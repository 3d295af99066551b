#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectrai/pipeline/filters.hpp"
#include "spectrai/train/inference.hpp"

namespace spectrai::train {

struct BaselineSpec {
  enum class Kind { None, SavGol, Bicubic };
  Kind kind = Kind::None;
  SavGolParams savgol;
};

/// "none", "bicubic", "savgol" or "savgol:w=9,p=3". Throws ConfigError for
/// anything else.
BaselineSpec parse_baseline(const std::string& text);
std::string format_baseline(const BaselineSpec& spec);

struct EvaluateOptions {
  std::string split_name = "test";
  BaselineSpec baseline;
  InferenceOptions inference;
  std::optional<double> max_value;  // PSNR peak; reference max by default
  std::string checkpoint;
};

/// Runs the model over `samples` and builds the report for the task's metric
/// family, with the baseline's metrics alongside. Throws ConfigError when the
/// baseline does not apply to the task.
nlohmann::json evaluate(Model& model, const std::vector<SamplePair>& samples, const EvaluateOptions& options);

}  // namespace spectrai::train
