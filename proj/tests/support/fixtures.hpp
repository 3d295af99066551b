#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "spectrai/cli/cli.hpp"
#include "spectrai/train/config.hpp"

namespace spectrai::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("spectrai-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Noisy/clean spectra tables plus manifest; returns the manifest path.
inline fs::path synth_denoising(const fs::path& dir, int count = 64, int length = 64, int seed = 1) {
  const auto r = run_cli({"synth", "denoising", "--out", dir.string(), "--count", std::to_string(count),
                          "--length", std::to_string(length), "--seed", std::to_string(seed)});
  if (r.code != 0) throw std::runtime_error("synth failed: " + r.err);
  return dir / "manifest.json";
}

/// Small, fast spectrum denoising experiment.
inline train::ExperimentConfig tiny_denoising_config(const fs::path& manifest, const fs::path& output, int epochs = 3) {
  auto c = train::default_experiment_config(TaskKind::SpectrumDenoising);
  c.name = "tiny-denoise";
  c.network.depth = 2;
  c.network.base_channels = 4;
  c.hyper.epochs = epochs;
  c.hyper.batch_size = 16;
  c.hyper.learning_rate = 3e-3;
  c.hyper.log_every = 1;
  c.data.manifest = manifest.string();
  c.data.output_dir = output.string();
  return c;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace spectrai::testing
