#include "spectrai/cli/parser.hpp"

namespace spectrai::cli {

std::unique_ptr<CLI::App> build_parser(Invocation& inv) {
  auto app = std::make_unique<CLI::App>("Deep learning for spectra and hyperspectral cubes", "spectrai");
  app->require_subcommand(1);
  app->footer(
      "Environment: SPECTRAI_DATA_DIR (root for relative manifest paths), "
      "SPECTRAI_DEVICE (auto|cpu, default auto).\n"
      "Exit codes: 0 ok, 2 config/validation, 3 I/O, 4 training aborted, 130 interrupted.");

  auto* prep = app->add_subcommand("prepare", "Cut cubes into patches and assign train/val/test splits");
  prep->add_option("manifest", inv.prepare.manifest, "Input dataset manifest")->required();
  prep->add_option("--out", inv.prepare.out, "Output directory for patches and manifest.json")->required();
  prep->add_option("--patch-size", inv.prepare.patch_size, "Patch edge length in pixels")->capture_default_str();
  prep->add_option("--stride", inv.prepare.stride, "Patch stride in pixels (default: patch size)");
  prep->add_option("--split", inv.prepare.split, "Ratios train:val:test, percentages or fractions")
      ->capture_default_str();
  prep->add_option("--seed", inv.prepare.seed, "Split seed")->capture_default_str();
  prep->add_flag("--group-aware", inv.prepare.group_aware, "Keep records sharing a group key in one split");

  auto* train = app->add_subcommand("train", "Train a network from a config file");
  train->add_option("config", inv.train.config, "Config file (sectioned key = value, or JSON)")->required();
  train->add_option("--resume", inv.train.resume, "Checkpoint directory to continue from");
  train->add_option("--output", inv.train.output, "Override data.output_dir");
  train->add_flag("--deterministic", inv.train.deterministic, "Require the deterministic backend");
  train->add_option("--set", inv.train.overrides, "Override a config value, e.g. hyper.epochs=5 (repeatable)");

  auto* eval = app->add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  eval->add_option("checkpoint", inv.evaluate.checkpoint, "Checkpoint directory")->required();
  eval->add_option("--manifest", inv.evaluate.manifest, "Dataset manifest (default: the training manifest)");
  eval->add_option("--split", inv.evaluate.split, "Split to score: train, val or test")->capture_default_str();
  eval->add_option("--baseline", inv.evaluate.baseline, "none, bicubic, savgol or savgol:w=9,p=3")
      ->capture_default_str();
  eval->add_option("--output", inv.evaluate.output, "Report path (default: <checkpoint>/report.json)");
  eval->add_option("--tile", inv.evaluate.tile, "Tile size for cube inference (0: whole input)")
      ->capture_default_str();
  eval->add_option("--overlap", inv.evaluate.overlap, "Tile overlap in pixels")->capture_default_str();
  eval->add_option("--max-value", inv.evaluate.max_value, "PSNR peak value (default: reference maximum)");

  auto* infer = app->add_subcommand("infer", "Run a checkpoint on one input file");
  infer->add_option("checkpoint", inv.infer.checkpoint, "Checkpoint directory")->required();
  infer->add_option("input", inv.infer.input, "Input cube (.hdr) or spectra table (.csv)")->required();
  infer->add_option("output", inv.infer.output, "Output path")->required();
  infer->add_option("--tile", inv.infer.tile, "Tile size for cube inference (0: whole input)")->capture_default_str();
  infer->add_option("--overlap", inv.infer.overlap, "Tile overlap in pixels")->capture_default_str();

  auto* serve = app->add_subcommand("serve", "Run the HTTP experiment service");
  serve->add_option("--port", inv.serve.port, "Listen port")->capture_default_str();
  serve->add_option("--host", inv.serve.host, "Listen address")->capture_default_str();
  serve->add_option("--root", inv.serve.root, "Directory for experiment records and runs")->capture_default_str();

  auto* synth = app->add_subcommand("synth", "Write a synthetic stand-in dataset with its manifest");
  synth->add_option("kind", inv.synth.kind, "denoising, superres, segmentation or scene")
      ->required()
      ->check(CLI::IsMember({"denoising", "superres", "segmentation", "scene"}));
  synth->add_option("--out", inv.synth.out, "Output directory")->required();
  synth->add_option("--count", inv.synth.count, "Number of samples (default per kind)");
  synth->add_option("--size", inv.synth.size, "Cube edge length; the high-resolution edge for superres");
  synth->add_option("--height", inv.synth.height, "Scene height (scene kind)");
  synth->add_option("--width", inv.synth.width, "Scene width (scene kind)");
  synth->add_option("--bands", inv.synth.bands, "Band count for cubes");
  synth->add_option("--length", inv.synth.length, "Spectrum length (denoising)")->capture_default_str();
  synth->add_option("--scale", inv.synth.scale, "Super-resolution factor")->capture_default_str();
  synth->add_option("--noise", inv.synth.noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--seed", inv.synth.seed, "Random seed")->capture_default_str();
  return app;
}

}  // namespace spectrai::cli
