#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spectrai/nn/networks.hpp"
#include "spectrai/train/config.hpp"
#include "spectrai/train/data.hpp"
#include "spectrai/train/events.hpp"

namespace spectrai::train {

struct TrainOptions {
  /// Checkpoint directory (usually <output>/latest) to continue from.
  std::optional<std::filesystem::path> resume;
  /// Raised externally; honored before the next optimizer step.
  const std::atomic<bool>* stop = nullptr;
  bool write_checkpoints = true;
};

enum class Outcome { Finished, Stopped, Error };

struct TrainingResult {
  Outcome outcome = Outcome::Finished;
  std::string message;
  bool io_failure = false;  // the error outcome came from the file system
  int epochs_completed = 0;
  long steps = 0;
  std::vector<double> step_losses;
  std::vector<double> val_losses;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::filesystem::path latest;
  std::filesystem::path best;
};

/// Checks that the network matches the data (band counts, scale, classes).
void check_data_compatibility(const ExperimentConfig& config, const PartitionedData& data);

/// Runs the epoch loop. Throws ConfigError before the first step for an
/// invalid config or an empty train split; failures after that point become
/// an error event and Outcome::Error.
TrainingResult run_training(const ExperimentConfig& config, const PartitionedData& data, EventLog& log,
                            const TrainOptions& options = {});

/// Mean loss over samples in inference mode, plus accuracy for label tasks.
struct EvalLoss {
  double loss = 0.0;
  std::optional<double> accuracy;
};
EvalLoss evaluate_loss(nn::Network<float>& net, const ExperimentConfig& config,
                       const std::vector<SamplePair>& samples);

/// Checkpoint layout: meta.json, weights/, optimizer/, history.jsonl.
struct CheckpointMeta {
  int epoch = 0;
  long step = 0;
  std::optional<double> val_loss;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  bool partial = false;  // written by a stop request mid-epoch
  ExperimentConfig config;
  std::vector<std::string> class_names;
  std::optional<Index> spectrum_length;  // spectrum networks: training input length
};

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

bool is_regression(TaskKind task);

}  // namespace spectrai::train
