#include "spectrai/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include "spectrai/io/envi.hpp"
#include "spectrai/nn/archive.hpp"
#include "spectrai/pipeline/rng.hpp"
#include "spectrai/train/batch.hpp"
#include "spectrai/train/loss.hpp"

namespace spectrai::train {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;

bool is_regression(TaskKind task) {
  return task == TaskKind::SpectrumDenoising || task == TaskKind::ImageDenoising ||
         task == TaskKind::SuperResolution;
}

namespace {

constexpr int kCheckpointVersion = 1;

std::vector<const SamplePair*> pointers(const std::vector<SamplePair>& v, const std::vector<std::size_t>& order,
                                        std::size_t first, std::size_t last) {
  std::vector<const SamplePair*> out;
  for (std::size_t i = first; i < last; ++i) out.push_back(&v[order[i]]);
  return out;
}

double accuracy_of(const Tensor<float>& logits, const std::vector<std::int32_t>& labels, std::optional<int> ignore,
                   Index& counted) {
  const Index P = logits.plane_size();
  Index hit = 0;
  counted = 0;
  for (Index n = 0; n < logits.batch(); ++n) {
    const auto z = logits.sample(n);
    for (Index p = 0; p < P; ++p) {
      const auto y = labels[static_cast<std::size_t>(n * P + p)];
      if (ignore && y == *ignore) continue;
      Index best;
      z.col(p).maxCoeff(&best);
      hit += best == y;
      ++counted;
    }
  }
  return static_cast<double>(hit);
}

void save_optimizer(Adam<float>& opt, const fs::path& dir) {
  fs::create_directories(dir);
  json tensors = json::array();
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    const std::string m = "m" + std::to_string(i) + ".bin", v = "v" + std::to_string(i) + ".bin";
    nn::write_float_blob(opt.first_moments()[i], dir / m);
    nn::write_float_blob(opt.second_moments()[i], dir / v);
    tensors.push_back({{"m", m}, {"v", v}, {"shape", opt.first_moments()[i].shape()}});
  }
  io::write_text_file(dir / "state.json", json{{"steps", opt.steps()}, {"tensors", tensors}}.dump(2) + "\n");
}

void load_optimizer(Adam<float>& opt, const fs::path& dir) {
  const json s = json::parse(io::read_text_file(dir / "state.json"));
  const auto& tensors = s.at("tensors");
  if (tensors.size() != opt.first_moments().size()) throw ShapeError("optimizer state does not match the network");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& m = opt.first_moments()[i];
    auto& v = opt.second_moments()[i];
    if (tensors[i].at("shape").get<nn::Shape>() != m.shape()) throw ShapeError("optimizer state shape mismatch");
    m = Tensor<float>(m.shape(), nn::read_float_blob(dir / tensors[i].at("m").get<std::string>(), m.size()));
    v = Tensor<float>(v.shape(), nn::read_float_blob(dir / tensors[i].at("v").get<std::string>(), v.size()));
  }
  opt.set_steps(s.at("steps").get<long>());
}

void write_checkpoint(const fs::path& dir, nn::Network<float>& net, Adam<float>& opt, const CheckpointMeta& meta,
                      const EventLog& log) {
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  nn::save_weights(net, tmp / "weights");
  save_optimizer(opt, tmp / "optimizer");
  json j;
  j["format_version"] = kCheckpointVersion;
  j["epoch"] = meta.epoch;
  j["step"] = meta.step;
  j["val_loss"] = meta.val_loss ? json(*meta.val_loss) : json(nullptr);
  j["best_val_loss"] = meta.best_val_loss;
  j["best_epoch"] = meta.best_epoch;
  j["partial"] = meta.partial;
  j["config"] = to_json(meta.config);
  j["classes"] = meta.class_names;
  j["spectrum_length"] = meta.spectrum_length ? json(*meta.spectrum_length) : json(nullptr);
  j["rng"] = {{"seed", meta.config.hyper.seed}, {"next_epoch", meta.epoch + 1}};
  io::write_text_file(tmp / "meta.json", j.dump(2) + "\n");
  std::string history;
  for (const auto& e : log.since(0)) history += to_json(e).dump() + "\n";
  io::write_text_file(tmp / "history.jsonl", history);
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  json j;
  try {
    j = json::parse(io::read_text_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw ParseError("checkpoint meta.json: " + std::string(e.what()));
  }
  if (j.value("format_version", 0) != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
  CheckpointMeta m;
  m.epoch = j.at("epoch").get<int>();
  m.step = j.at("step").get<long>();
  if (!j.at("val_loss").is_null()) m.val_loss = j.at("val_loss").get<double>();
  m.best_val_loss = j.at("best_val_loss").get<double>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.partial = j.at("partial").get<bool>();
  m.config = experiment_config_from_json(j.at("config"));
  m.class_names = j.at("classes").get<std::vector<std::string>>();
  if (j.contains("spectrum_length") && !j.at("spectrum_length").is_null())
    m.spectrum_length = j.at("spectrum_length").get<Index>();
  return m;
}

void check_data_compatibility(const ExperimentConfig& c, const PartitionedData& data) {
  const SamplePair* any = !data.train.empty() ? &data.train.front() : nullptr;
  if (!any) return;
  const auto& net = c.network;
  if (const auto* cube = std::get_if<Hypercube>(&any->input)) {
    if (cube->bands() != net.in_channels)
      throw ConfigError("network.in_channels = " + std::to_string(net.in_channels) + " but the data has " +
                        std::to_string(cube->bands()) + " bands");
    if (c.task == TaskKind::SuperResolution) {
      const auto& hr = std::get<Hypercube>(any->target);
      if (hr.height() != cube->height() * net.rcan.scale)
        throw ConfigError("network.scale = " + std::to_string(net.rcan.scale) + " but targets are " +
                          std::to_string(hr.height()) + "/" + std::to_string(cube->height()) + " of the input");
    }
  }
  if (!is_regression(c.task) && !data.class_names.empty() &&
      static_cast<Index>(data.class_names.size()) > net.out_channels)
    throw ConfigError("network.out_channels = " + std::to_string(net.out_channels) + " but the data has " +
                      std::to_string(data.class_names.size()) + " classes");
}

EvalLoss evaluate_loss(nn::Network<float>& net, const ExperimentConfig& c, const std::vector<SamplePair>& samples) {
  EvalLoss out;
  if (samples.empty()) return out;
  const bool was_training = net.training();
  net.set_training(false);
  const auto mode = parse_normalize_option(c.data.normalize);
  const bool regression = is_regression(c.task);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(c.hyper.batch_size);
  double total = 0.0, hits = 0.0;
  Index counted_all = 0;
  for (std::size_t first = 0; first < samples.size(); first += bs) {
    const std::size_t last = std::min(samples.size(), first + bs);
    const Batch b = make_batch(pointers(samples, order, first, last), mode, regression);
    const Tensor<float> pred = net.forward(b.input);
    const auto loss = compute_loss(c.hyper.loss, pred, b.target, b.labels, c.hyper.ignore_label);
    total += loss.value * static_cast<double>(last - first);
    if (!regression) {
      Index counted = 0;
      hits += accuracy_of(pred, b.labels, c.hyper.ignore_label, counted);
      counted_all += counted;
    }
  }
  net.set_training(was_training);
  out.loss = total / static_cast<double>(samples.size());
  if (!regression && counted_all > 0) out.accuracy = hits / static_cast<double>(counted_all);
  return out;
}

TrainingResult run_training(const ExperimentConfig& c, const PartitionedData& data, EventLog& log,
                            const TrainOptions& options) {
  c.validate();
  if (data.train.empty()) throw ConfigError("empty train split");
  check_data_compatibility(c, data);

  const fs::path out_dir = c.data.output_dir;
  TrainingResult result;
  result.latest = out_dir / "latest";
  result.best = out_dir / "best";

  nn::Network<float> net = nn::build_network<float>(c.task, c.network, c.hyper.seed);
  Adam<float> opt(net.parameters(), c.hyper.beta1, c.hyper.beta2, c.hyper.epsilon);

  int start_epoch = 1;
  long step = 0;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<TrainingEvent> replay;
  if (options.resume) {
    const CheckpointMeta meta = read_checkpoint_meta(*options.resume);
    if (meta.config.task != c.task || meta.config.network != c.network)
      throw GateError("checkpoint was trained for a different task or network");
    nn::load_weights(net, *options.resume / "weights");
    load_optimizer(opt, *options.resume / "optimizer");
    start_epoch = meta.epoch + 1;
    step = meta.step;
    best = meta.best_epoch > 0 ? meta.best_val_loss : best;
    best_epoch = meta.best_epoch;
    // A partial checkpoint redoes its epoch, so events from it are dropped.
    for (auto& e : read_history(*options.resume / "history.jsonl"))
      if (!is_terminal(e.kind) && e.epoch <= meta.epoch) replay.push_back(std::move(e));
  }

  if (options.write_checkpoints) {
    fs::create_directories(out_dir);
    io::write_text_file(out_dir / "config.json", to_json(c).dump(2) + "\n");
    log.set_mirror(out_dir / "history.jsonl");
  }
  for (auto& e : replay) log.append(std::move(e));

  const auto mode = parse_normalize_option(c.data.normalize);
  const bool regression = is_regression(c.task);
  const std::size_t n = data.train.size();
  const std::size_t bs = static_cast<std::size_t>(c.hyper.batch_size);
  const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = steps_per_epoch * c.hyper.epochs;
  int epoch = start_epoch - 1;
  double lr = lr_at(c.hyper.schedule, std::min(step, total_steps - 1), total_steps, c.hyper.learning_rate,
                    c.hyper.one_cycle);

  long epoch_start_step = step;
  CheckpointMeta meta;
  meta.config = c;
  meta.class_names = data.class_names;
  if (const auto* s = std::get_if<Spectrum>(&data.train.front().input)) meta.spectrum_length = s->size();
  auto checkpoint = [&](bool partial, std::optional<double> val_loss, bool is_best) {
    if (!options.write_checkpoints) return;
    meta.epoch = partial ? epoch - 1 : epoch;
    meta.step = partial ? epoch_start_step : step;
    meta.val_loss = val_loss;
    meta.best_val_loss = std::isfinite(best) ? best : 0.0;
    meta.best_epoch = best_epoch;
    meta.partial = partial;
    write_checkpoint(result.latest, net, opt, meta, log);
    if (is_best) {
      write_checkpoint(result.best, net, opt, meta, log);
    }
    TrainingEvent e{EventKind::Checkpoint, now_seconds(), epoch, step, "train", val_loss, lr, {},
                    result.latest.string()};
    log.append(e);
  };
  auto finish = [&](EventKind kind, std::string message) {
    result.epochs_completed = kind == EventKind::Stopped ? epoch - 1 : epoch;
    result.steps = step;
    result.best_val_loss = best;
    result.best_epoch = best_epoch;
    result.message = message;
    result.outcome = kind == EventKind::Finished ? Outcome::Finished
                     : kind == EventKind::Stopped ? Outcome::Stopped
                                                  : Outcome::Error;
    try {
      log.append(TrainingEvent{kind, now_seconds(), std::max(epoch, 0), step, "train", std::nullopt, lr, {},
                               std::move(message)});
    } catch (const Error&) {
      // the log itself failed; the outcome still carries the message
    }
    return result;
  };

  try {
    for (epoch = start_epoch; epoch <= c.hyper.epochs; ++epoch) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      const std::uint64_t epoch_seed = hash_combine(c.hyper.seed, static_cast<std::uint64_t>(epoch));
      Rng shuffle_rng(epoch_seed);
      shuffle_rng.shuffle(order);
      const std::uint64_t aug_seed = hash_combine(epoch_seed, 0x617567ULL);

      net.set_training(true);
      epoch_start_step = step;
      double epoch_loss = 0.0;
      for (std::size_t first = 0; first < n; first += bs) {
        if (options.stop && options.stop->load()) {
          checkpoint(true, std::nullopt, false);
          return finish(EventKind::Stopped, "stop requested");
        }
        const std::size_t last = std::min(n, first + bs);
        std::vector<SamplePair> augmented;
        std::vector<const SamplePair*> ptrs = pointers(data.train, order, first, last);
        if (!c.augmentation.specs.empty()) {
          augmented.reserve(ptrs.size());
          for (const SamplePair* p : ptrs) augmented.push_back(apply_augmentation(*p, c.augmentation, aug_seed, p->id));
          for (std::size_t i = 0; i < ptrs.size(); ++i) ptrs[i] = &augmented[i];
        }
        const Batch b = make_batch(ptrs, mode, regression);
        lr = lr_at(c.hyper.schedule, step, total_steps, c.hyper.learning_rate, c.hyper.one_cycle);
        net.zero_grad();
        const Tensor<float> pred = net.forward(b.input);
        const auto loss = compute_loss(c.hyper.loss, pred, b.target, b.labels, c.hyper.ignore_label);
        if (!std::isfinite(loss.value)) throw NumericError("non-finite loss at step " + std::to_string(step + 1));
        net.backward(loss.grad);
        opt.step(lr);
        ++step;
        epoch_loss += loss.value * static_cast<double>(last - first);
        result.step_losses.push_back(loss.value);
        if (step % c.hyper.log_every == 0)
          log.append(TrainingEvent{EventKind::Step, now_seconds(), epoch, step, "train", loss.value, lr, {}, {}});
      }
      const double train_loss = epoch_loss / static_cast<double>(n);
      std::map<std::string, double> metrics{{"train_loss", train_loss}};
      std::optional<double> val_loss;
      double selection = train_loss;
      if (!data.val.empty()) {
        const EvalLoss v = evaluate_loss(net, c, data.val);
        if (!std::isfinite(v.loss)) throw NumericError("non-finite validation loss");
        val_loss = v.loss;
        selection = v.loss;
        metrics["val_loss"] = v.loss;
        if (v.accuracy) metrics["val_accuracy"] = *v.accuracy;
        result.val_losses.push_back(v.loss);
      }
      const bool is_best = selection < best;
      if (is_best) {
        best = selection;
        best_epoch = epoch;
      }
      log.append(TrainingEvent{EventKind::EpochEnd, now_seconds(), epoch, step, val_loss ? "val" : "train",
                               val_loss ? val_loss : std::optional<double>(train_loss), lr, metrics, {}});
      checkpoint(false, val_loss, is_best);
    }
    epoch = std::max(c.hyper.epochs, start_epoch - 1);
    return finish(EventKind::Finished, {});
  } catch (const IoError& e) {
    result.io_failure = true;
    return finish(EventKind::Error, e.what());
  } catch (const fs::filesystem_error& e) {
    result.io_failure = true;
    return finish(EventKind::Error, e.what());
  } catch (const Error& e) {
    return finish(EventKind::Error, e.what());
  } catch (const std::exception& e) {
    return finish(EventKind::Error, e.what());
  }
}

}  // namespace spectrai::train
