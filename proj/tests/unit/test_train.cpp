#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "spectrai/io/envi.hpp"
#include "spectrai/nn/archive.hpp"
#include "spectrai/nn/layers.hpp"
#include "spectrai/synth/synth.hpp"
#include "spectrai/train/inference.hpp"
#include "spectrai/train/loss.hpp"
#include "spectrai/train/trainer.hpp"
#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"

using namespace spectrai;
using namespace spectrai::train;
using spectrai::nn::Shape;
using spectrai::nn::Tensor;
using spectrai::testing::TempDir;
namespace fs = std::filesystem;

namespace {

PartitionedData spectra_data(Index train, Index val, Index length, std::uint64_t seed) {
  Rng rng(seed);
  synth::PeakSpectraOptions o;
  o.length = length;
  const auto pairs = synth::gaussian_peak_spectra(train + val, o, rng);
  PartitionedData d;
  for (Index i = 0; i < train + val; ++i) {
    SamplePair p{"s" + std::to_string(i), pairs.noisy[i], pairs.clean[i], PairKind::SpectrumToSpectrum, {}};
    (i < train ? d.train : d.val).push_back(std::move(p));
  }
  return d;
}

ExperimentConfig toy_config(const fs::path& out, int epochs, int batch) {
  auto c = default_experiment_config(TaskKind::SpectrumDenoising);
  c.network.depth = 2;
  c.network.base_channels = 4;
  c.hyper.epochs = epochs;
  c.hyper.batch_size = batch;
  c.hyper.learning_rate = 3e-3;
  c.hyper.seed = 11;
  c.data.output_dir = out.string();
  return c;
}

int count_kind(const std::vector<TrainingEvent>& events, EventKind k) {
  return static_cast<int>(std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.kind == k; }));
}

std::string file_bytes(const fs::path& p) { return io::read_text_file(p); }

}  // namespace

TEST_CASE("Adam closed forms") {
  Eigen::ArrayXd theta = Eigen::ArrayXd::Zero(1), g = Eigen::ArrayXd::Constant(1, 2.0);
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(1), v = Eigen::ArrayXd::Zero(1);
  adam_update(theta, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1);
  CHECK(std::abs(theta[0] - -9.99999995e-4) < 1e-12);

  // zero gradient leaves the parameter alone
  Eigen::ArrayXd t0 = Eigen::ArrayXd::Constant(3, 0.7), z = Eigen::ArrayXd::Zero(3);
  Eigen::ArrayXd m0 = z, v0 = z;
  adam_update(t0, z, m0, v0, 1e-2, 0.9, 0.999, 1e-8, 1);
  CHECK((t0 == 0.7).all());

  // randomized recurrence against a scalar loop, and elementwise independence
  Rng rng(5);
  Eigen::ArrayXd th(2), mm = Eigen::ArrayXd::Zero(2), vv = Eigen::ArrayXd::Zero(2);
  th << rng.normal(), rng.normal();
  double s[2] = {th[0], th[1]}, sm[2] = {0, 0}, sv[2] = {0, 0};
  for (long t = 1; t <= 50; ++t) {
    Eigen::ArrayXd grad(2);
    grad << rng.normal(), rng.normal();
    adam_update(th, grad, mm, vv, 1e-2, 0.85, 0.99, 1e-8, t);
    for (int k = 0; k < 2; ++k) {
      sm[k] = 0.85 * sm[k] + 0.15 * grad[k];
      sv[k] = 0.99 * sv[k] + 0.01 * grad[k] * grad[k];
      const double mh = sm[k] / (1 - std::pow(0.85, t)), vh = sv[k] / (1 - std::pow(0.99, t));
      s[k] -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(std::abs(th[0] - s[0]) <= 1e-12);
  CHECK(std::abs(th[1] - s[1]) <= 1e-12);
}

TEST_CASE("Adam rejects non-finite gradients before updating") {
  Rng rng(1);
  nn::Conv2d<double> conv(1, 1, 1, 1, rng);
  auto params = conv.parameters();
  Adam<double> opt(params, 0.9, 0.999, 1e-8);
  const double before = params[0].second->value[0];
  params[0].second->grad[0] = 1.0;
  params.back().second->grad[0] = std::nan("");
  CHECK_THROWS_AS(opt.step(1e-3), NumericError);
  CHECK(params[0].second->value[0] == before);
  params.back().second->grad[0] = 0.5;
  opt.step(1e-3);
  CHECK(opt.steps() == 1);
  CHECK(params[0].second->value[0] == doctest::Approx(before - 1e-3).epsilon(1e-9));
}

TEST_CASE("learning rate schedules") {
  for (long t : {0L, 7L, 99L}) CHECK(lr_at(Schedule::Constant, t, 100, 1e-4) == 1e-4);
  CHECK_THROWS_AS(lr_at(Schedule::Constant, 0, 0, 1e-4), RangeError);
  CHECK_THROWS_AS(lr_at(Schedule::OneCycle, 5, 5, 1e-4), RangeError);

  for (long T : {10L, 97L, 1000L}) {
    const long peak = static_cast<long>(std::ceil(0.3 * static_cast<double>(T)));
    CHECK(std::abs(lr_at(Schedule::OneCycle, 0, T, 1e-3) - 4e-5) < 1e-9);
    CHECK(lr_at(Schedule::OneCycle, peak, T, 1e-3) == 1e-3);
    CHECK(std::abs(lr_at(Schedule::OneCycle, T - 1, T, 1e-3) - 1e-7) < 1e-9);
    int peaks = 0;
    double max_jump = 0;
    for (long t = 0; t < T; ++t) {
      const double a = lr_at(Schedule::OneCycle, t, T, 1e-3);
      if (t > 0) max_jump = std::max(max_jump, std::abs(a - lr_at(Schedule::OneCycle, t - 1, T, 1e-3)));
      const bool up = t == 0 || a > lr_at(Schedule::OneCycle, t - 1, T, 1e-3);
      const bool down = t == T - 1 || a > lr_at(Schedule::OneCycle, t + 1, T, 1e-3);
      if (up && down) ++peaks;
    }
    CHECK(peaks == 1);
    // continuity: no step bigger than the steepest cosine slope allows
    CHECK(max_jump <= 1e-3 * M_PI / (2.0 * static_cast<double>(peak)) + 1e-12);
  }
}

TEST_CASE("losses") {
  Tensor<double> logits({2, 6, 1, 1}, 0.3);
  auto ce = cross_entropy_loss(logits, {0, 5});
  CHECK(std::abs(ce.value - std::log(6.0)) < 1e-6);
  Tensor<double> sharp({1, 3}, std::vector<double>{40, -40, -40});
  CHECK(cross_entropy_loss(sharp, {0}).value < 1e-6);
  CHECK_THROWS_AS(cross_entropy_loss(sharp, {3}), LabelError);
  CHECK_THROWS_WITH(cross_entropy_loss(logits, {1, 1}, 1), doctest::Contains("empty loss support"));
  // ignored positions do not count toward the mean
  Tensor<double> two({2, 3}, std::vector<double>{1, 2, 3, 9, 0, 0});
  const auto one = cross_entropy_loss(Tensor<double>({1, 3}, std::vector<double>{1, 2, 3}), {2});
  const auto masked = cross_entropy_loss(two, {2, 4}, 4);
  CHECK(masked.value == doctest::Approx(one.value));
  CHECK(masked.grad[3] == 0);

  Tensor<double> p({1, 2}, std::vector<double>{0, 2}), t({1, 2}, std::vector<double>{0, 0});
  CHECK(mse_loss(p, t).value == 2.0);
  CHECK(l1_loss(p, p).value == 0.0);
  CHECK(l1_loss(p, t).value == 1.0);

  // gradients against central differences
  Rng rng(7);
  Tensor<double> x = spectrai::testing::random_tensor({2, 4, 2, 3}, rng);
  Tensor<double> y = spectrai::testing::random_tensor({2, 4, 2, 3}, rng);
  std::vector<std::int32_t> labels(12);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.below(4));
  for (LossKind kind : kAllLosses) {
    const auto r = compute_loss(kind, x, y, labels, std::nullopt);
    double worst = 0;
    for (Index i = 0; i < x.size(); ++i) {
      Tensor<double> a = x, b = x;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      const double fd = (compute_loss(kind, a, y, labels, std::nullopt).value -
                         compute_loss(kind, b, y, labels, std::nullopt).value) /
                        2e-6;
      worst = std::max(worst, std::abs(fd - r.grad[i]) / std::max(1.0, std::abs(fd)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("task defaults") {
  const auto seg = default_hyperparameters(TaskKind::Segmentation);
  CHECK(seg.batch_size == 16);
  CHECK(seg.epochs == 60);
  CHECK(seg.loss == LossKind::CrossEntropy);
  CHECK(seg.schedule == Schedule::Constant);
  CHECK(seg.learning_rate == 1e-4);
  const auto sr = default_hyperparameters(TaskKind::SuperResolution);
  CHECK(sr.batch_size == 2);
  CHECK(sr.epochs == 500);
  CHECK(sr.loss == LossKind::L1);
  CHECK(sr.schedule == Schedule::Constant);
  CHECK(sr.learning_rate == 1e-4);
  const auto dn = default_hyperparameters(TaskKind::SpectrumDenoising);
  CHECK(dn.loss == LossKind::L1);
  CHECK(dn.schedule == Schedule::OneCycle);
  CHECK(dn.epochs == 500);
  CHECK(dn.batch_size == 256);
  for (TaskKind t : kAllTasks) {
    const auto h = default_hyperparameters(t);
    CHECK(h.beta1 == 0.9);
    CHECK(h.beta2 == 0.999);
    CHECK(h.epsilon == 1e-8);
    CHECK(loss_permitted(t, h.loss));
    CHECK(default_experiment_config(t).violations().empty());
  }
}

TEST_CASE("config files") {
  const auto c = parse_config_ini(
      "# comment\n[task]\nkind = Segmentation\n[network]\nin_channels = 51\nout_channels = 6\n"
      "[hyper]\nepochs = 3\n[augmentation]\nadd = hflip p=0.5\nadd = vflip\n[data]\nmanifest = m.json\n");
  CHECK(c.task == TaskKind::Segmentation);
  CHECK(c.network.in_channels == 51);
  CHECK(c.hyper.epochs == 3);
  CHECK(c.hyper.batch_size == 16);
  CHECK(c.augmentation.specs.size() == 2);
  CHECK(c.split.train == doctest::Approx(0.85));

  // every default is written out, and both formats read back the same
  const std::string ini = format_config_ini(c);
  CHECK(ini.find("batch_size = 16") != std::string::npos);
  CHECK(ini.find("beta2 = 0.999") != std::string::npos);
  CHECK(to_json(parse_config_ini(ini)) == to_json(c));
  CHECK(to_json(experiment_config_from_json(to_json(c))) == to_json(c));
  CHECK(config_hash(parse_config_ini(ini)) == config_hash(c));

  CHECK_THROWS_WITH_AS(parse_config_ini("[task]\nkind = Segmentation\n[hyper]\nbogus = 1\n"),
                       doctest::Contains("hyper.bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_ini("[task]\nkind = Segmentation\n[extras]\n"), doctest::Contains("extras"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config_ini("[task]\nkind = Segmentation\n[hyper]\nepochs = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_ini("[task]\nkind = Segmentation\n[hyper]\nepochs = 1\nepochs = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_ini("[hyper]\nepochs = 1\n"), ConfigError);

  auto gated = parse_config_ini("[task]\nkind = SpectrumDenoising\n[network]\nfamily = UNet2D\n");
  CHECK_THROWS_WITH_AS(gated.validate(), doctest::Contains("network not suitable for task"), GateError);

  TempDir dir("config");
  io::write_text_file(dir / "a.cfg", ini);
  io::write_text_file(dir / "a.json", to_json(c).dump(2));
  ::setenv("SPECTRAI_DATA_DIR", dir.path().c_str(), 1);
  const auto from_ini = load_config(dir / "a.cfg");
  const auto from_json = load_config(dir / "a.json");
  ::unsetenv("SPECTRAI_DATA_DIR");
  CHECK(from_ini.data.manifest == (dir / "m.json").string());
  CHECK(to_json(from_ini) == to_json(from_json));
  CHECK(load_config(dir / "a.cfg").data.manifest == "m.json");
}

TEST_CASE("event log") {
  EventLog log;
  CHECK(log.append(TrainingEvent{EventKind::Step, 0, 1, 1}) == 0);
  log.append(TrainingEvent{EventKind::EpochEnd, 0, 1, 1});
  CHECK(log.size() == 2);
  CHECK_FALSE(log.terminated());
  CHECK(log.since(1).size() == 1);
  log.append(TrainingEvent{EventKind::Finished, 0, 1, 1});
  CHECK(log.terminated());
  CHECK(log.wait(3, std::chrono::milliseconds(10)) == 3);

  TrainingEvent e{EventKind::EpochEnd, 12.5, 2, 8, "val", 0.25, 1e-3, {{"val_loss", 0.25}}, "ok"};
  const auto back = event_from_json(to_json(e));
  CHECK(back.kind == e.kind);
  CHECK(back.epoch == 2);
  CHECK(back.step == 8);
  CHECK(back.loss == e.loss);
  CHECK(back.metrics == e.metrics);
  CHECK(back.message == "ok");
  CHECK(to_string(parse_event_kind("epoch_end")) == "epoch_end");
}

TEST_CASE("training run event stream") {
  TempDir dir("train");
  const auto data = spectra_data(4, 2, 32, 3);
  const auto c = toy_config(dir / "run", 2, 2);
  EventLog log;
  const auto r = run_training(c, data, log);
  CHECK(r.outcome == Outcome::Finished);
  const auto events = log.since(0);
  CHECK(count_kind(events, EventKind::Step) == 4);
  CHECK(count_kind(events, EventKind::EpochEnd) == 2);
  CHECK(count_kind(events, EventKind::Finished) == 1);
  CHECK(events.back().kind == EventKind::Finished);
  int terminal = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    terminal += is_terminal(events[i].kind);
    if (i > 0) {
      CHECK(events[i].epoch >= events[i - 1].epoch);
      CHECK(events[i].step >= events[i - 1].step);
    }
  }
  CHECK(terminal == 1);
  CHECK(r.step_losses.size() == 4);
  CHECK(r.val_losses.size() == 2);

  // history on disk mirrors the log
  const auto history = read_history(dir / "run" / "history.jsonl");
  CHECK(history.size() == events.size());
  for (const char* which : {"latest", "best"}) {
    const auto meta = read_checkpoint_meta(dir / "run" / which);
    CHECK_FALSE(meta.partial);
    CHECK(meta.spectrum_length == 32);
    CHECK(fs::exists(dir / "run" / which / "weights" / "meta.json"));
    CHECK(fs::exists(dir / "run" / which / "history.jsonl"));
  }
  CHECK(read_checkpoint_meta(dir / "run" / "latest").epoch == 2);

  PartitionedData empty;
  CHECK_THROWS_AS(run_training(c, empty, log), ConfigError);
}

TEST_CASE("training is deterministic") {
  TempDir dir("det");
  const auto data = spectra_data(24, 4, 32, 4);
  auto c = toy_config(dir / "a", 3, 8);
  c.augmentation.specs.push_back(parse_augmentation_spec("spectral_shift shift=2"));
  EventLog la, lb;
  const auto a = run_training(c, data, la);
  c.data.output_dir = (dir / "b").string();
  const auto b = run_training(c, data, lb);
  REQUIRE(a.step_losses.size() == 9);
  CHECK(a.step_losses == b.step_losses);
  CHECK(a.val_losses == b.val_losses);
  CHECK(file_bytes(dir / "a" / "latest" / "weights" / "0000.bin") ==
        file_bytes(dir / "b" / "latest" / "weights" / "0000.bin"));
  c.hyper.seed = 12;
  c.data.output_dir = (dir / "c").string();
  EventLog lc;
  CHECK(run_training(c, data, lc).step_losses != a.step_losses);
}

TEST_CASE("stop and resume") {
  TempDir dir("resume");
  const auto data = spectra_data(16, 4, 32, 5);
  const auto c = toy_config(dir / "full", 4, 4);
  EventLog full_log;
  const auto full = run_training(c, data, full_log);
  REQUIRE(full.step_losses.size() == 16);

  // stop requested right after epoch 2 ends
  auto half = c;
  half.data.output_dir = (dir / "half").string();
  std::atomic<bool> stop{false};
  EventLog log;
  log.set_listener([&](const TrainingEvent& e) {
    if (e.kind == EventKind::EpochEnd && e.epoch == 2) stop = true;
  });
  TrainOptions opts;
  opts.stop = &stop;
  const auto r = run_training(half, data, log, opts);
  CHECK(r.outcome == Outcome::Stopped);
  CHECK(r.epochs_completed == 2);
  CHECK(log.since(0).back().kind == EventKind::Stopped);
  const auto meta = read_checkpoint_meta(dir / "half" / "latest");
  CHECK(meta.partial);
  CHECK(meta.epoch == 2);

  EventLog resumed_log;
  TrainOptions again;
  again.resume = dir / "half" / "latest";
  const auto rest = run_training(half, data, resumed_log, again);
  CHECK(rest.outcome == Outcome::Finished);
  CHECK(rest.epochs_completed == 4);
  const std::vector<double> tail(full.step_losses.begin() + 8, full.step_losses.end());
  CHECK(rest.step_losses == tail);
  CHECK(file_bytes(dir / "full" / "latest" / "weights" / "0000.bin") ==
        file_bytes(dir / "half" / "latest" / "weights" / "0000.bin"));
  // the resumed history holds the first two epochs once
  const auto events = resumed_log.since(0);
  CHECK(count_kind(events, EventKind::EpochEnd) == 4);
  CHECK(count_kind(events, EventKind::Stopped) == 0);
}

TEST_CASE("validation and checkpoints leave weights intact") {
  TempDir dir("ckpt");
  const auto data = spectra_data(8, 4, 32, 6);
  const auto c = toy_config(dir / "run", 1, 4);
  EventLog log;
  run_training(c, data, log);
  auto model = load_model(dir / "run" / "latest");
  const auto hash = nn::weight_hash(model.net);
  evaluate_loss(model.net, c, data.val);
  CHECK(nn::weight_hash(model.net) == hash);

  nn::save_weights(model.net, dir / "copy1");
  auto net2 = nn::load_network<float>(dir / "copy1");
  nn::save_weights(net2, dir / "copy2");
  for (const auto& entry : fs::directory_iterator(dir / "copy1"))
    CHECK(file_bytes(entry.path()) == file_bytes(dir / "copy2" / entry.path().filename()));

  CHECK_THROWS_AS(load_model(dir / "run" / "latest", TaskKind::Segmentation), GateError);
  // a single spectrum through the model keeps its length
  const auto p = predict(model, data.val.front().input);
  REQUIRE(p.spectrum);
  CHECK(p.spectrum->size() == 32);
  CHECK_THROWS_AS(predict(model, SampleInput(Spectrum(Eigen::VectorXf::Zero(16), WavelengthAxis::synthetic(16)))),
                  ShapeError);
}

TEST_CASE("tiled inference") {
  CHECK(tile_starts(128, 64, 16) == std::vector<Index>{0, 48, 64});
  CHECK(tile_starts(64, 64, 16) == std::vector<Index>{0});
  CHECK(tile_starts(100, 40, 0) == std::vector<Index>{0, 40, 60});

  // a pointwise linear network is exactly shift-invariant, so tiling must
  // reproduce the direct forward pass
  Rng rng(8);
  nn::NetworkConfig cfg = nn::default_network_config(NetworkFamily::UNet2D, 3, 3);
  cfg.depth = 1;
  nn::Network<float> net(TaskKind::Segmentation, cfg, std::make_unique<nn::Conv2d<float>>(3, 3, 1, 1, rng));
  Tensor<float> x({1, 3, 128, 128});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
  const auto direct = tiled_forward(net, x, 0, 0);
  const auto tiled = tiled_forward(net, x, 64, 16);
  REQUIRE(tiled.shape() == direct.shape());
  double worst = 0;
  for (Index i = 0; i < x.size(); ++i) {
    REQUIRE(std::isfinite(tiled[i]));
    worst = std::max(worst, static_cast<double>(std::abs(tiled[i] - direct[i])));
  }
  CHECK(worst < 1e-5);
  Tensor<float> small({1, 3, 64, 64}, 0.5f);
  const auto one_tile = tiled_forward(net, small, 64, 16);
  CHECK(one_tile.storage() == net.forward(small).storage());
}
