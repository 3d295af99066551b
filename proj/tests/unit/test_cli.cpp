#include "doctest.h"

#include <cstdlib>
#include <thread>

#include "spectrai/cli/cli.hpp"
#include "spectrai/cli/parser.hpp"
#include "spectrai/io/envi.hpp"
#include "spectrai/io/tables.hpp"
#include "spectrai/train/trainer.hpp"
#include "../support/fixtures.hpp"

using namespace spectrai;
using spectrai::testing::run_cli;
using spectrai::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void write_config(const fs::path& path, const train::ExperimentConfig& c) {
  io::write_text_file(path, train::format_config_ini(c));
}

fs::path synth(const fs::path& dir, std::vector<std::string> extra) {
  std::vector<std::string> args{"synth"};
  args.insert(args.end(), extra.begin(), extra.end());
  args.insert(args.end(), {"--out", dir.string()});
  const auto r = run_cli(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return dir / "manifest.json";
}

train::ExperimentConfig tiny_segmentation(const fs::path& manifest, const fs::path& out, Index bands) {
  auto c = train::default_experiment_config(TaskKind::Segmentation);
  c.network.in_channels = bands;
  c.network.out_channels = 6;
  c.network.depth = 2;
  c.network.base_channels = 4;
  c.hyper.epochs = 1;
  c.hyper.batch_size = 4;
  c.data.manifest = manifest.string();
  c.data.output_dir = out.string();
  return c;
}

train::ExperimentConfig tiny_superres(const fs::path& manifest, const fs::path& out, Index bands, int scale) {
  auto c = train::default_experiment_config(TaskKind::SuperResolution);
  c.network.in_channels = bands;
  c.network.out_channels = bands;
  c.network.rcan = {1, 1, 8, 2, scale};
  c.hyper.epochs = 1;
  c.hyper.batch_size = 4;
  c.data.manifest = manifest.string();
  c.data.output_dir = out.string();
  c.data.normalize = "minmax";
  return c;
}

struct EnvGuard {
  EnvGuard(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name_); }
  const char* name_;
};

}  // namespace

TEST_CASE("help lists every option with a description") {
  cli::Invocation inv;
  const auto app = cli::build_parser(inv);
  const auto top = run_cli({"--help"});
  CHECK(top.code == 0);
  const auto subs = app->get_subcommands([](const CLI::App*) { return true; });
  CHECK(subs.size() == 6);
  for (const CLI::App* sub : subs) {
    CHECK(top.out.find(sub->get_name()) != std::string::npos);
    CHECK_FALSE(sub->get_description().empty());
    const auto help = run_cli({sub->get_name(), "--help"});
    CHECK(help.code == 0);
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string name = opt->get_name(false, true);
      CAPTURE(name);
      CHECK_FALSE(opt->get_description().empty());
      const std::string shown = opt->get_lnames().empty() ? opt->get_name() : "--" + opt->get_lnames().front();
      CHECK(help.out.find(shown) != std::string::npos);
    }
  }
  CHECK(top.out.find("SPECTRAI_DATA_DIR") != std::string::npos);
  CHECK(top.out.find("SPECTRAI_DEVICE") != std::string::npos);
  CHECK(run_cli({"train", "--no-such-flag", "x.cfg"}).code == cli::kConfigError);
  CHECK(run_cli({"frobnicate"}).code == cli::kConfigError);
}

TEST_CASE("exit codes") {
  auto code = [](auto e) { return cli::exit_code_for(std::make_exception_ptr(e)); };
  CHECK(code(ConfigError("x")) == 2);
  CHECK(code(GateError("x")) == 2);
  CHECK(code(ParseError("x")) == 2);
  CHECK(code(ShapeError("x")) == 2);
  CHECK(code(RangeError("x")) == 2);
  CHECK(code(LabelError("x")) == 2);
  CHECK(code(IoError("x")) == 3);
  CHECK(code(fs::filesystem_error("x", std::error_code())) == 3);
  CHECK(code(NumericError("x")) == 4);
  CHECK(code(std::runtime_error("x")) == 4);
  CHECK(code(Interrupted("x")) == 130);
}

TEST_CASE("prepare") {
  TempDir dir("prepare");
  const auto manifest = synth(dir / "raw", {"segmentation", "--count", "2", "--size", "16", "--bands", "4"});
  const auto r = run_cli({"prepare", manifest.string(), "--out", (dir / "p").string(), "--patch-size", "16",
                          "--split", "50:50:0"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("2 patches: 1/1/0") != std::string::npos);
  const auto patched = io::read_manifest(dir / "p" / "manifest.json");
  CHECK(patched.records.size() == 2);
  const std::string first = io::read_text_file(dir / "p" / "manifest.json");

  // re-running gives the same manifest
  CHECK(run_cli({"prepare", manifest.string(), "--out", (dir / "p").string(), "--patch-size", "16", "--split",
                 "50:50:0"})
            .code == 0);
  CHECK(io::read_text_file(dir / "p" / "manifest.json") == first);

  const auto bad = run_cli({"prepare", manifest.string(), "--out", (dir / "q").string(), "--split", "85:10:6"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("ratios must sum to 1") != std::string::npos);
  CHECK(run_cli({"prepare", (dir / "missing.json").string(), "--out", (dir / "q").string()}).code == 3);

  // 8 patches of 8x8 per 16x16 cube with stride 8
  const auto cut = run_cli({"prepare", manifest.string(), "--out", (dir / "c").string(), "--patch-size", "8"});
  CHECK(cut.out.find("8 patches") != std::string::npos);
}

TEST_CASE("train: gates, devices and interrupts") {
  TempDir dir("cli-train");
  const auto manifest = spectrai::testing::synth_denoising(dir / "data", 48, 32);
  auto c = spectrai::testing::tiny_denoising_config(manifest, dir / "run", 2);

  auto gated = c;
  gated.network.family = NetworkFamily::UNet2D;
  write_config(dir / "gated.cfg", gated);
  const auto g = run_cli({"train", (dir / "gated.cfg").string()});
  CHECK(g.code == 2);
  CHECK(g.err.find("network not suitable for task") != std::string::npos);

  write_config(dir / "ok.cfg", c);
  {
    EnvGuard env("SPECTRAI_DEVICE", "gpu");
    CHECK(run_cli({"train", (dir / "ok.cfg").string()}).code == 2);
  }
  {
    EnvGuard env("SPECTRAI_DEVICE", "cpu");
    const auto ok = run_cli({"train", (dir / "ok.cfg").string(), "--deterministic"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("epoch 1/2") != std::string::npos);
    CHECK(ok.out.find("epoch 2/2") != std::string::npos);
  }
  CHECK(run_cli({"train", (dir / "nope.cfg").string()}).code == 3);
  CHECK(run_cli({"train", (dir / "ok.cfg").string(), "--set", "hyper.bogus=1"}).code == 2);

  // interrupt once the first checkpoint lands
  auto slow = c;
  slow.hyper.epochs = 500;
  slow.data.output_dir = (dir / "slow").string();
  write_config(dir / "slow.cfg", slow);
  std::thread watcher([&] {
    for (int i = 0; i < 6000 && !fs::exists(dir / "slow" / "latest" / "meta.json"); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    cli::interrupt_flag() = true;
  });
  const auto r = run_cli({"train", (dir / "slow.cfg").string()});
  watcher.join();
  CHECK(r.code == 130);
  CHECK(fs::exists(dir / "slow" / "latest" / "meta.json"));
  const auto history = train::read_history(dir / "slow" / "history.jsonl");
  REQUIRE_FALSE(history.empty());
  CHECK(history.back().kind == train::EventKind::Stopped);
  cli::interrupt_flag() = false;

  // and resume from it
  const auto resumed = run_cli({"train", (dir / "slow.cfg").string(), "--resume", (dir / "slow" / "latest").string(),
                                "--set", "hyper.epochs=2"});
  CHECK(resumed.code == 0);
  CHECK(resumed.out.find("resuming after epoch 1") != std::string::npos);
  CHECK(resumed.out.find("epoch 2/2") != std::string::npos);
  CHECK(train::read_history(dir / "slow" / "history.jsonl").back().kind == train::EventKind::Finished);
}

TEST_CASE("evaluate and infer for denoising") {
  TempDir dir("cli-denoise");
  const auto manifest = spectrai::testing::synth_denoising(dir / "data", 48, 32);
  write_config(dir / "c.cfg", spectrai::testing::tiny_denoising_config(manifest, dir / "run", 1));
  REQUIRE(run_cli({"train", (dir / "c.cfg").string()}).code == 0);
  const std::string ckpt = (dir / "run" / "best").string();

  const auto e = run_cli({"evaluate", ckpt, "--baseline", "savgol:w=9,p=3"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto report = nlohmann::json::parse(io::read_text_file(dir / "run" / "best" / "report.json"));
  CHECK(report.at("model").contains("mse"));
  CHECK(report.at("baseline").at("metrics").contains("mse"));
  CHECK(report.at("baseline").at("kind") == "savgol:w=9,p=3");
  CHECK(report.contains("config_hash"));
  CHECK(report.at("split").at("name") == "test");

  CHECK(run_cli({"evaluate", ckpt, "--baseline", "fourier"}).code == 2);
  CHECK(run_cli({"evaluate", ckpt, "--baseline", "bicubic"}).code == 2);

  io::SpectraTable one;
  const auto table = io::read_spectra_table(dir / "data" / "noisy.csv");
  one.axis = table.axis;
  one.spectra = {table.spectra.front()};
  io::write_spectra_table(one, dir / "one.csv");
  const auto i = run_cli({"infer", ckpt, (dir / "one.csv").string(), (dir / "out.csv").string()});
  REQUIRE_MESSAGE(i.code == 0, i.err);
  const auto out = io::read_spectra_table(dir / "out.csv");
  REQUIRE(out.spectra.size() == 1);
  CHECK(out.spectra[0].size() == 32);
  CHECK(run_cli({"infer", ckpt, (dir / "missing.csv").string(), (dir / "x.csv").string()}).code == 3);
}

TEST_CASE("segmentation recipe on synthetic data") {
  TempDir dir("cli-recipe");
  const auto manifest = synth(dir / "aerorit", {"segmentation", "--count", "8", "--size", "16", "--bands", "51"});
  REQUIRE(run_cli({"prepare", manifest.string(), "--out", (dir / "aerorit" / "patches").string(), "--patch-size",
                   "16"})
              .code == 0);
  EnvGuard env("SPECTRAI_DATA_DIR", dir.path().string());
  const auto r = run_cli({"train", SPECTRAI_SOURCE_DIR "/recipes/segmentation_aerorit.cfg", "--output",
                          (dir / "run").string(), "--set", "hyper.epochs=2", "--set", "network.depth=2", "--set",
                          "network.base_channels=4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto history = train::read_history(dir / "run" / "history.jsonl");
  REQUIRE_FALSE(history.empty());
  CHECK(history.back().kind == train::EventKind::Finished);

  const auto cube = dir / "aerorit" / "cubes" / "scene_p00000.hdr";
  const auto i = run_cli({"infer", (dir / "run" / "best").string(), cube.string(), (dir / "mask.hdr").string()});
  REQUIRE_MESSAGE(i.code == 0, i.err);
  const auto mask = io::read_mask(dir / "mask.hdr");
  CHECK(mask.height() == 16);
  CHECK(mask.labels().maxCoeff() < 6);
  CHECK(mask.labels().minCoeff() >= 0);
  const auto e = run_cli({"evaluate", (dir / "run" / "best").string(), "--split", "train"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out.find("accuracy=") != std::string::npos);

  for (const char* recipe : {"denoising_raman.cfg", "superres_helicoid.cfg", "segmentation_aerorit.cfg"})
    CHECK(train::load_config(fs::path(SPECTRAI_SOURCE_DIR) / "recipes" / recipe).violations().empty());
}

TEST_CASE("super-resolution evaluate and infer") {
  TempDir dir("cli-sr");
  const auto m2 = synth(dir / "x2", {"superres", "--count", "8", "--size", "16", "--bands", "4", "--scale", "2"});
  write_config(dir / "x2.cfg", tiny_superres(m2, dir / "run2", 4, 2));
  REQUIRE(run_cli({"train", (dir / "x2.cfg").string()}).code == 0);
  const auto e = run_cli({"evaluate", (dir / "run2" / "best").string(), "--split", "train", "--baseline", "bicubic"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto report = nlohmann::json::parse(io::read_text_file(dir / "run2" / "best" / "report.json"));
  CHECK(report.at("model").contains("psnr"));
  CHECK(report.at("baseline").at("metrics").contains("psnr"));
  CHECK(run_cli({"evaluate", (dir / "run2" / "best").string(), "--baseline", "savgol"}).code == 2);

  const auto m8 = synth(dir / "x8", {"superres", "--count", "4", "--size", "32", "--bands", "4", "--scale", "8"});
  write_config(dir / "x8.cfg", tiny_superres(m8, dir / "run8", 4, 8));
  REQUIRE(run_cli({"train", (dir / "x8.cfg").string()}).code == 0);
  const auto lr = dir / "x8" / "cubes" / "cube_p00000_lr.hdr";
  CHECK(io::read_envi(lr).height() == 4);
  const auto i = run_cli({"infer", (dir / "run8" / "best").string(), lr.string(), (dir / "hr.hdr").string()});
  REQUIRE_MESSAGE(i.code == 0, i.err);
  const auto hr = io::read_envi(dir / "hr.hdr");
  CHECK(hr.height() == 32);
  CHECK(hr.width() == 32);
  CHECK(hr.bands() == 4);
}
