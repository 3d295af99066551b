#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace spectrai::cli {

struct PrepareArgs {
  std::string manifest, out;
  long patch_size = 64;
  long stride = 0;  // 0: same as the patch size
  std::string split = "85:10:5";
  std::uint64_t seed = 0;
  bool group_aware = false;
};

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string output;
  bool deterministic = false;
  std::vector<std::string> overrides;
};

struct EvaluateArgs {
  std::string checkpoint, manifest, output;
  std::string split = "test";
  std::string baseline = "none";
  long tile = 0;
  long overlap = 16;
  double max_value = 0.0;
};

struct InferArgs {
  std::string checkpoint, input, output;
  long tile = 0;
  long overlap = 16;
};

struct ServeArgs {
  int port = 8517;
  std::string host = "127.0.0.1";
  std::string root = "runs/service";
};

struct SynthArgs {
  std::string kind, out;
  long count = 0;  // 0: the kind's default
  long size = 0;
  long height = 0, width = 0;
  long bands = 0;
  long length = 512;
  int scale = 2;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

struct Invocation {
  PrepareArgs prepare;
  TrainArgs train;
  EvaluateArgs evaluate;
  InferArgs infer;
  ServeArgs serve;
  SynthArgs synth;
};

/// The full parser table; every option carries a description.
std::unique_ptr<CLI::App> build_parser(Invocation& inv);

}  // namespace spectrai::cli
