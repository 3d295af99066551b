#include "spectrai/train/evaluate.hpp"

#include <charconv>

#include "spectrai/metrics/metrics.hpp"
#include "spectrai/pipeline/rng.hpp"
#include "spectrai/train/trainer.hpp"

namespace spectrai::train {

using nlohmann::json;

BaselineSpec parse_baseline(const std::string& text) {
  BaselineSpec b;
  if (text.empty() || text == "none") return b;
  if (text == "bicubic") {
    b.kind = BaselineSpec::Kind::Bicubic;
    return b;
  }
  if (text.rfind("savgol", 0) != 0) throw ConfigError("unknown baseline: " + text);
  b.kind = BaselineSpec::Kind::SavGol;
  std::string rest = text.substr(6);
  if (!rest.empty()) {
    if (rest[0] != ':') throw ConfigError("unknown baseline: " + text);
    rest = rest.substr(1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto end = std::min(rest.find(',', pos), rest.size());
      const std::string kv = rest.substr(pos, end - pos);
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("baseline option must be key=value: " + kv);
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      int v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || p != value.data() + value.size())
        throw ConfigError("baseline option " + key + ": expected an integer");
      if (key == "w") b.savgol.window = v;
      else if (key == "p") b.savgol.polyorder = v;
      else throw ConfigError("unknown baseline option: " + key);
      pos = end + 1;
    }
  }
  try {
    b.savgol.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("baseline: ") + e.what());
  }
  return b;
}

std::string format_baseline(const BaselineSpec& b) {
  switch (b.kind) {
    case BaselineSpec::Kind::None: return "none";
    case BaselineSpec::Kind::Bicubic: return "bicubic";
    case BaselineSpec::Kind::SavGol:
      return "savgol:w=" + std::to_string(b.savgol.window) + ",p=" + std::to_string(b.savgol.polyorder);
  }
  return "none";
}

namespace {

Hypercube savgol_cube(const Hypercube& c, const SavGolParams& p) {
  Hypercube::Matrix out(c.pixel_count(), c.bands());
  for (Index i = 0; i < c.pixel_count(); ++i) out.row(i) = savgol_filter(c.pixels().row(i).transpose(), p).transpose();
  return Hypercube(c.height(), c.width(), std::move(out), c.axis(), c.name());
}

std::string ids_hash(const std::vector<SamplePair>& samples) {
  std::string all;
  for (const auto& s : samples) all += s.id + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(all)));
  return buf;
}

}  // namespace

json evaluate(Model& model, const std::vector<SamplePair>& samples, const EvaluateOptions& o) {
  const TaskKind task = model.config.task;
  using K = BaselineSpec::Kind;
  if (o.baseline.kind == K::SavGol && task != TaskKind::SpectrumDenoising && task != TaskKind::ImageDenoising)
    throw ConfigError("savgol baseline applies to denoising tasks only");
  if (o.baseline.kind == K::Bicubic && task != TaskKind::SuperResolution)
    throw ConfigError("bicubic baseline applies to super-resolution only");
  if (samples.empty()) throw ConfigError("split " + o.split_name + " is empty");

  json report;
  report["task"] = std::string(to_string(task));
  report["config_hash"] = config_hash(model.config);
  report["checkpoint"] = o.checkpoint;
  report["split"] = {{"name", o.split_name}, {"count", samples.size()}, {"ids_hash", ids_hash(samples)}};

  if (is_regression(task)) {
    metrics::ReconstructionAccumulator acc, base, input_acc;
    const bool with_base = o.baseline.kind != K::None;
    for (const auto& s : samples) {
      const Prediction p = predict(model, s.input, o.inference);
      if (p.spectrum) {
        const auto& ref = std::get<Spectrum>(s.target).values();
        const auto& noisy = std::get<Spectrum>(s.input).values();
        acc.add(p.spectrum->values().transpose(), ref.transpose());
        input_acc.add(noisy.transpose(), ref.transpose());
        if (with_base) base.add(savgol_filter(noisy, o.baseline.savgol).transpose(), ref.transpose());
      } else {
        const auto& ref = std::get<Hypercube>(s.target);
        const auto& in = std::get<Hypercube>(s.input);
        acc.add(p.cube->pixels(), ref.pixels());
        if (task == TaskKind::ImageDenoising) input_acc.add(in.pixels(), ref.pixels());
        if (o.baseline.kind == K::Bicubic)
          base.add(bicubic_resize(in, ref.height(), ref.width()).pixels(), ref.pixels());
        else if (o.baseline.kind == K::SavGol)
          base.add(savgol_cube(in, o.baseline.savgol).pixels(), ref.pixels());
      }
    }
    const double peak = o.max_value ? *o.max_value : acc.reference_max();
    report["max_value"] = peak;
    const auto m = acc.finish(peak);
    report["model"] = metrics::to_json(m);
    if (task != TaskKind::SuperResolution) {
      const auto in = input_acc.finish(peak);
      report["input"] = metrics::to_json(in);
      report["model"]["snr_gain"] = metrics::json_number(m.mse == 0 ? metrics::kInfinity : 10 * std::log10(in.mse / m.mse));
    }
    if (with_base) {
      const auto b = base.finish(peak);
      report["baseline"] = {{"kind", format_baseline(o.baseline)}, {"metrics", metrics::to_json(b)}};
      if (task != TaskKind::SuperResolution) {
        const auto in = input_acc.finish(peak);
        report["baseline"]["metrics"]["snr_gain"] =
            metrics::json_number(b.mse == 0 ? metrics::kInfinity : 10 * std::log10(in.mse / b.mse));
      }
    }
    return report;
  }

  const Index C = model.net.config().out_channels;
  metrics::ConfusionMatrix cm(C);
  for (const auto& s : samples) {
    const Prediction p = predict(model, s.input, o.inference);
    if (p.mask) {
      cm.add(p.mask->labels(), std::get<SegmentationMask>(s.target).labels(), model.config.hyper.ignore_label);
    } else {
      Eigen::Matrix<std::int32_t, 1, 1> pr, rf;
      pr(0) = p.label->index;
      rf(0) = std::get<ClassLabel>(s.target).index;
      cm.add(pr, rf, model.config.hyper.ignore_label);
    }
  }
  report["model"] = metrics::to_json(metrics::scores_from(cm), model.class_names);
  return report;
}

}  // namespace spectrai::train
