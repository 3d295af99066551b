#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spectrai/cli/cli.hpp"
#include "spectrai/cli/parser.hpp"
#include "spectrai/io/envi.hpp"
#include "spectrai/io/tables.hpp"
#include "spectrai/metrics/metrics.hpp"
#include "spectrai/pipeline/dataset.hpp"
#include "spectrai/service/service.hpp"
#include "spectrai/synth/synth.hpp"
#include "spectrai/train/data.hpp"
#include "spectrai/train/evaluate.hpp"
#include "spectrai/train/inference.hpp"
#include "spectrai/train/trainer.hpp"

namespace spectrai::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const Interrupted&) {
    return kInterrupted;
  } catch (const NumericError&) {
    return kTrainingAborted;
  } catch (const IoError&) {
    return kIoError;
  } catch (const fs::filesystem_error&) {
    return kIoError;
  } catch (const Error&) {
    return kConfigError;
  } catch (const CLI::Error&) {
    return kConfigError;
  } catch (const json::exception&) {
    return kConfigError;
  } catch (...) {
    return kTrainingAborted;
  }
}

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void check_device() {
  const char* dev = std::getenv("SPECTRAI_DEVICE");
  const std::string d = dev && *dev ? dev : "auto";
  if (d != "auto" && d != "cpu") throw ConfigError("SPECTRAI_DEVICE=" + d + " is not available (auto, cpu)");
}

std::string patch_name(const std::string& id, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_p%05zu", k);
  std::string safe = id;
  for (char& c : safe)
    if (c == '/' || c == '\\' || c == '#' || c == ' ') c = '_';
  return safe + buf;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  SplitSpec spec = parse_split_ratios(a.split);
  spec.seed = a.seed;
  spec.group_aware = a.group_aware;
  spec.validate();
  const Index size = a.patch_size, stride = a.stride > 0 ? a.stride : a.patch_size;
  if (size < 1) throw ConfigError("--patch-size must be >= 1");

  const io::DatasetManifest in = io::read_manifest(train::resolve_data_path(a.manifest));
  const fs::path out_dir = a.out, patch_dir = out_dir / "patches";
  fs::create_directories(patch_dir);
  io::DatasetManifest result;
  result.base_dir = out_dir;
  bool patched = false;

  for (const auto& r : in.records) {
    const bool cube = r.pair_kind == PairKind::CubeToMask || r.pair_kind == PairKind::CubeToCube ||
                      r.pair_kind == PairKind::CubeToLabel;
    if (!cube) {
      io::ManifestRecord copy = r;
      copy.input_path = fs::absolute(in.resolve(r.input_path)).string();
      if (r.target_path) copy.target_path = fs::absolute(in.resolve(*r.target_path)).string();
      copy.split = io::Split::Unassigned;
      result.records.push_back(std::move(copy));
      continue;
    }
    patched = true;
    const Hypercube input = io::read_envi(in.resolve(r.input_path));
    std::optional<SegmentationMask> mask;
    std::optional<Hypercube> target;
    Index scale = 1;
    if (r.pair_kind == PairKind::CubeToMask) mask = io::read_mask(in.resolve(r.target_path.value()));
    if (r.pair_kind == PairKind::CubeToCube) {
      target = io::read_envi(in.resolve(r.target_path.value()));
      scale = target->height() / input.height();
      if (scale < 1 || target->height() != input.height() * scale || target->width() != input.width() * scale)
        throw ShapeError("record " + r.id + ": target must be the input dims times an integer scale");
    }
    std::size_t k = 0;
    for_each_patch(input, mask ? &*mask : nullptr, size, stride, [&](const Patch& p) {
      const std::string name = patch_name(r.id, k++);
      io::ManifestRecord rec;
      rec.id = name;
      rec.pair_kind = r.pair_kind;
      rec.group_key = r.group_key;
      rec.label = r.label;
      rec.input_path = "patches/" + name + ".hdr";
      io::save_envi(p.cube, out_dir / rec.input_path);
      if (p.mask) {
        rec.target_path = "patches/" + name + "_mask.hdr";
        io::save_mask(*p.mask, out_dir / *rec.target_path);
      }
      if (target) {
        rec.target_path = "patches/" + name + "_target.hdr";
        io::save_envi(crop(*target, p.origin.y * scale, p.origin.x * scale, size * scale, size * scale),
                      out_dir / *rec.target_path);
      }
      result.records.push_back(std::move(rec));
    });
  }
  if (result.records.empty()) throw ConfigError("manifest has no records");

  std::vector<std::optional<std::string>> keys;
  for (const auto& r : result.records) keys.push_back(r.group_key);
  const SplitResult s = split_dataset(static_cast<Index>(result.records.size()), spec, keys);
  for (Index i : s.train) result.records[static_cast<std::size_t>(i)].split = io::Split::Train;
  for (Index i : s.val) result.records[static_cast<std::size_t>(i)].split = io::Split::Val;
  for (Index i : s.test) result.records[static_cast<std::size_t>(i)].split = io::Split::Test;
  for (const auto& w : s.warnings) err << "warning: " << w << "\n";
  io::write_manifest(result, out_dir / "manifest.json");
  out << result.records.size() << (patched ? " patches: " : " items: ") << s.train.size() << "/" << s.val.size()
      << "/" << s.test.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

json override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

train::ExperimentConfig apply_overrides(train::ExperimentConfig c, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return c;
  json j = train::to_json(c);
  for (const auto& o : overrides) {
    const auto eq = o.find('='), dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("--set expects section.key=value, got '" + o + "'");
    const std::string section = o.substr(0, dot), key = o.substr(dot + 1, eq - dot - 1);
    const json value = override_value(o.substr(eq + 1));
    if (section == "augmentation" && key == "add") {
      j[section][key].push_back(value.is_string() ? value : json(o.substr(eq + 1)));
    } else {
      j[section][key] = value;
    }
  }
  return train::experiment_config_from_json(j);
}

train::PartitionedData load_partitioned(const train::ExperimentConfig& c, const std::string& manifest_override = {}) {
  const std::string path = manifest_override.empty() ? c.data.manifest : manifest_override;
  if (path.empty()) throw ConfigError("data.manifest is not set");
  const auto manifest = io::read_manifest(train::resolve_data_path(path));
  return train::partition(train::load_dataset(manifest, c.task), c.split);
}

std::string epoch_line(const train::TrainingEvent& e, int epochs) {
  std::string line = "epoch " + std::to_string(e.epoch) + "/" + std::to_string(epochs);
  for (const char* key : {"train_loss", "val_loss", "val_accuracy"}) {
    const auto it = e.metrics.find(key);
    if (it != e.metrics.end()) line += std::string(" ") + key + "=" + fmt("%.6g", it->second);
  }
  line += " lr=" + fmt("%.3e", e.lr);
  return line;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  check_device();
  train::ExperimentConfig c = apply_overrides(train::load_config(a.config), a.overrides);
  if (!a.output.empty()) c.data.output_dir = a.output;
  if (a.deterministic) c.hyper.deterministic = true;
  c.validate();
  const train::PartitionedData data = load_partitioned(c);
  for (const auto& w : data.warnings) err << "warning: " << w << "\n";
  out << "training " << c.name << " (" << to_string(c.task) << ", " << to_string(c.network.family) << ") on "
      << data.train.size() << " train / " << data.val.size() << " val samples\n"
      << std::flush;

  train::TrainOptions opts;
  int resumed_epoch = 0;
  if (!a.resume.empty()) {
    opts.resume = a.resume;
    resumed_epoch = train::read_checkpoint_meta(a.resume).epoch;
    out << "resuming after epoch " << resumed_epoch << "\n";
  }
  train::EventLog log;
  log.set_listener([&](const train::TrainingEvent& e) {
    if (e.kind == train::EventKind::EpochEnd && e.epoch > resumed_epoch)
      out << epoch_line(e, c.hyper.epochs) << "\n" << std::flush;
  });
  interrupt_flag() = false;
  opts.stop = &interrupt_flag();
  const train::TrainingResult r = train::run_training(c, data, log, opts);
  switch (r.outcome) {
    case train::Outcome::Finished:
      out << "finished " << r.epochs_completed << " epochs; best epoch " << r.best_epoch << " loss "
          << fmt("%.6g", r.best_val_loss) << "; checkpoint " << r.best.string() << "\n";
      return kOk;
    case train::Outcome::Stopped:
      err << "interrupted; checkpoint " << r.latest.string() << "\n";
      return kInterrupted;
    case train::Outcome::Error:
      err << "training aborted: " << r.message << "\n";
      return r.io_failure ? kIoError : kTrainingAborted;
  }
  return kTrainingAborted;
}

// ---------------------------------------------------------------------------

const std::vector<SamplePair>& pick_split(const train::PartitionedData& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "val") return d.val;
  if (name == "test") return d.test;
  throw ConfigError("--split must be train, val or test");
}

void print_metrics(std::ostream& out, const std::string& label, const json& m) {
  out << label << ":";
  for (const char* key : {"accuracy", "mean_iou", "mean_iou_without_0", "mse", "psnr", "sam_degrees"})
    if (m.contains(key) && !m.at(key).is_object()) out << " " << key << "=" << m.at(key).dump();
  out << "\n";
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  train::EvaluateOptions opts;
  opts.baseline = train::parse_baseline(a.baseline);
  opts.split_name = a.split;
  opts.inference = {a.tile, a.overlap};
  if (a.max_value > 0) opts.max_value = a.max_value;
  opts.checkpoint = a.checkpoint;
  train::Model model = train::load_model(a.checkpoint);
  const train::PartitionedData data = load_partitioned(model.config, a.manifest);
  const auto& samples = pick_split(data, a.split);
  if (samples.empty()) throw ConfigError("split " + a.split + " is empty");
  const json report = train::evaluate(model, samples, opts);
  const fs::path path = a.output.empty() ? fs::path(a.checkpoint) / "report.json" : fs::path(a.output);
  io::write_text_file(path, report.dump(2) + "\n");
  out << a.split << " split: " << samples.size() << " samples\n";
  print_metrics(out, "model", report.at("model"));
  if (report.contains("baseline") && report.at("baseline").contains("metrics"))
    print_metrics(out, "baseline " + report.at("baseline").at("kind").get<std::string>(),
                  report.at("baseline").at("metrics"));
  out << "wrote " << path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream&) {
  train::Model model = train::load_model(a.checkpoint);
  const train::InferenceOptions opts{a.tile, a.overlap};
  const fs::path input = a.input;
  fs::path output = a.output;
  const std::string ext = input.extension().string();
  if (ext == ".hdr") {
    const Hypercube cube = io::read_envi(input);
    const auto p = train::predict(model, cube, opts);
    if (p.cube) {
      if (output.extension() != ".hdr") output += ".hdr";
      io::save_envi(*p.cube, output);
      out << "wrote " << output.string() << " (" << p.cube->height() << "x" << p.cube->width() << "x"
          << p.cube->bands() << ")\n";
    } else if (p.mask) {
      if (output.extension() != ".hdr") output += ".hdr";
      io::save_mask(*p.mask, output);
      out << "wrote " << output.string() << " (" << p.mask->height() << "x" << p.mask->width() << " mask, "
          << p.mask->class_count() << " classes)\n";
    } else {
      const json j{{"label", p.label->name}, {"index", p.label->index}};
      io::write_text_file(output, j.dump(2) + "\n");
      out << "wrote " << output.string() << " (label " << p.label->name << ")\n";
    }
    return kOk;
  }
  if (ext == ".csv" || ext == ".txt") {
    const io::SpectraTable table = io::read_spectra_table(input);
    io::SpectraTable result;
    result.axis = table.axis;
    std::vector<std::string> labels;
    for (const auto& s : table.spectra) {
      const auto p = train::predict(model, s, opts);
      if (p.spectrum) result.spectra.push_back(*p.spectrum);
      else labels.push_back(p.label->name);
    }
    if (!labels.empty()) {
      result.spectra = table.spectra;
      result.labels = labels;
    }
    io::write_spectra_table(result, output);
    out << "wrote " << output.string() << " (" << table.spectra.size() << " spectra)\n";
    return kOk;
  }
  throw ConfigError("input must be an ENVI header (.hdr) or a spectra table (.csv)");
}

// ---------------------------------------------------------------------------

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream&) {
  service::Service svc({a.root});
  interrupt_flag() = false;
  service::serve(svc, a.host, a.port, interrupt_flag(), [&](int port) {
    out << "serving on http://" << a.host << ":" << port << "/api\n" << std::flush;
  });
  return kOk;
}

// ---------------------------------------------------------------------------

Index or_default(long v, Index d) { return v > 0 ? v : d; }

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const fs::path dir = a.out;
  fs::create_directories(dir);
  Rng rng(a.seed);
  io::DatasetManifest m;
  m.base_dir = dir;
  if (a.kind == "denoising") {
    synth::PeakSpectraOptions o;
    o.length = a.length;
    o.noise_sigma = a.noise;
    const auto pairs = synth::gaussian_peak_spectra(or_default(a.count, 2000), o, rng);
    io::write_spectra_table({pairs.noisy.front().axis(), pairs.noisy, std::nullopt}, dir / "noisy.csv");
    io::write_spectra_table({pairs.clean.front().axis(), pairs.clean, std::nullopt}, dir / "clean.csv");
    m.records.push_back({"spectra", "noisy.csv", "clean.csv", std::nullopt, PairKind::SpectrumToSpectrum,
                         io::Split::Unassigned, std::nullopt});
  } else if (a.kind == "superres") {
    const Index n = or_default(a.count, 64), size = or_default(a.size, 32), bands = or_default(a.bands, 16);
    fs::create_directories(dir / "cubes");
    for (Index i = 0; i < n; ++i) {
      const Hypercube hr = synth::smooth_cube(size, size, bands, rng);
      const std::string id = patch_name("cube", static_cast<std::size_t>(i));
      io::save_envi(hr, dir / "cubes" / (id + "_hr.hdr"));
      io::save_envi(synth::downsample(hr, a.scale), dir / "cubes" / (id + "_lr.hdr"));
      m.records.push_back({id, "cubes/" + id + "_lr.hdr", "cubes/" + id + "_hr.hdr", std::nullopt,
                           PairKind::CubeToCube, io::Split::Unassigned, std::nullopt});
    }
  } else if (a.kind == "segmentation" || a.kind == "scene") {
    const bool scene = a.kind == "scene";
    const Index n = scene ? 1 : or_default(a.count, 64);
    const Index h = scene ? or_default(a.height, 1973) : or_default(a.size, 32);
    const Index w = scene ? or_default(a.width, 3975) : or_default(a.size, 32);
    const Index bands = or_default(a.bands, scene ? 51 : 16);
    fs::create_directories(dir / "cubes");
    for (Index i = 0; i < n; ++i) {
      const auto s = synth::segmentation_scene(h, w, bands, aerorit_classes(), rng, a.noise,
                                               scene ? 400 : 12);
      const std::string id = scene ? std::string("scene") : patch_name("scene", static_cast<std::size_t>(i));
      io::save_envi(s.cube, dir / "cubes" / (id + ".hdr"));
      io::save_mask(s.mask, dir / "cubes" / (id + "_mask.hdr"));
      m.records.push_back({id, "cubes/" + id + ".hdr", "cubes/" + id + "_mask.hdr", std::nullopt,
                           PairKind::CubeToMask, io::Split::Unassigned, std::nullopt});
    }
  }
  io::write_manifest(m, dir / "manifest.json");
  out << "wrote " << m.records.size() << " records to " << (dir / "manifest.json").string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Invocation inv;
  auto app = build_parser(inv);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto* sub : app->get_subcommands())
      if (sub->parsed()) err << sub->help();
    return kConfigError;
  }
  try {
    if (app->got_subcommand("prepare")) return cmd_prepare(inv.prepare, out, err);
    if (app->got_subcommand("train")) return cmd_train(inv.train, out, err);
    if (app->got_subcommand("evaluate")) return cmd_evaluate(inv.evaluate, out, err);
    if (app->got_subcommand("infer")) return cmd_infer(inv.infer, out, err);
    if (app->got_subcommand("serve")) return cmd_serve(inv.serve, out, err);
    if (app->got_subcommand("synth")) return cmd_synth(inv.synth, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
  return kConfigError;
}

}  // namespace spectrai::cli
