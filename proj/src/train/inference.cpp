#include "spectrai/train/inference.hpp"

#include "spectrai/nn/archive.hpp"
#include "spectrai/train/batch.hpp"
#include "spectrai/train/loss.hpp"
#include "spectrai/train/trainer.hpp"

namespace spectrai::train {

using nn::Tensor;

Model load_model(const std::filesystem::path& dir, std::optional<TaskKind> task) {
  CheckpointMeta meta = read_checkpoint_meta(dir);
  if (task && *task != meta.config.task)
    throw GateError("checkpoint was trained for " + std::string(to_string(meta.config.task)) + ", not " +
                    std::string(to_string(*task)));
  nn::Network<float> net = nn::load_network<float>(dir / "weights");
  if (net.task() != meta.config.task || net.config() != meta.config.network)
    throw GateError("checkpoint weights do not match its config");
  net.set_training(false);
  return Model{std::move(net), std::move(meta.config), std::move(meta.class_names), meta.spectrum_length};
}

std::vector<Index> tile_starts(Index size, Index tile, Index overlap) {
  if (tile >= size) return {0};
  const Index stride = std::max<Index>(1, tile - overlap);
  std::vector<Index> out;
  for (Index s = 0;; s += stride) {
    if (s + tile >= size) {
      out.push_back(size - tile);
      break;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

/// Weight of position i in a window of length n: linear ramps over the
/// overlap on interior edges, 1 elsewhere.
double ramp(Index i, Index n, Index overlap, bool ramp_start, bool ramp_end) {
  double w = 1.0;
  if (overlap > 0) {
    if (ramp_start) w = std::min(w, static_cast<double>(i + 1) / static_cast<double>(overlap + 1));
    if (ramp_end) w = std::min(w, static_cast<double>(n - i) / static_cast<double>(overlap + 1));
  }
  return w;
}

}  // namespace

Tensor<float> tiled_forward(nn::Network<float>& net, const Tensor<float>& x, Index tile, Index overlap, int scale) {
  net.set_training(false);
  if (x.rank() != 4 || tile <= 0 || (x.height() <= tile && x.width() <= tile)) return net.forward(x);
  if (overlap < 0 || overlap >= tile) throw RangeError("overlap must lie in [0, tile)");
  const Index H = x.height(), W = x.width(), C = x.channels();
  const auto ys = tile_starts(H, tile, overlap), xs = tile_starts(W, tile, overlap);
  Tensor<double> acc, weight({1, 1, H * scale, W * scale});
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const Index y0 = ys[iy], x0 = xs[ix], th = std::min(tile, H), tw = std::min(tile, W);
      Tensor<float> win({x.batch(), C, th, tw});
      for (Index n = 0; n < x.batch(); ++n)
        for (Index c = 0; c < C; ++c)
          for (Index y = 0; y < th; ++y)
            for (Index xx = 0; xx < tw; ++xx) win.at(n, c, y, xx) = x.at(n, c, y0 + y, x0 + xx);
      const Tensor<float> out = net.forward(win);
      if (acc.empty()) acc = Tensor<double>({x.batch(), out.channels(), H * scale, W * scale});
      const Index oh = th * scale, ow = tw * scale, ov = overlap * scale;
      for (Index y = 0; y < oh; ++y) {
        const double wy = ramp(y, oh, ov, iy > 0, iy + 1 < ys.size());
        for (Index xx = 0; xx < ow; ++xx) {
          const double w = wy * ramp(xx, ow, ov, ix > 0, ix + 1 < xs.size());
          const Index gy = y0 * scale + y, gx = x0 * scale + xx;
          weight.at(0, 0, gy, gx) += w;
          for (Index n = 0; n < x.batch(); ++n)
            for (Index c = 0; c < out.channels(); ++c)
              acc.at(n, c, gy, gx) += w * static_cast<double>(out.at(n, c, y, xx));
        }
      }
    }
  }
  Tensor<float> result(acc.shape());
  for (Index n = 0; n < acc.batch(); ++n)
    for (Index c = 0; c < acc.channels(); ++c)
      for (Index y = 0; y < acc.height(); ++y)
        for (Index xx = 0; xx < acc.width(); ++xx)
          result.at(n, c, y, xx) = static_cast<float>(acc.at(n, c, y, xx) / weight.at(0, 0, y, xx));
  return result;
}

Prediction predict(Model& model, const SampleInput& input, const InferenceOptions& options) {
  const auto& c = model.config;
  const bool regression = is_regression(c.task);
  const bool spectral = c.network.family == NetworkFamily::ResUNet1D || c.network.family == NetworkFamily::SpectralCNN1D;
  if (spectral != std::holds_alternative<Spectrum>(input))
    throw ShapeError(std::string(to_string(c.task)) + " expects a " + (spectral ? "spectrum" : "cube") + " input");
  if (const auto* s = std::get_if<Spectrum>(&input); s && model.spectrum_length && s->size() != *model.spectrum_length)
    throw ShapeError("expected " + std::to_string(*model.spectrum_length) + " bands, got " + std::to_string(s->size()));
  if (const auto* cube = std::get_if<Hypercube>(&input))
    if (cube->bands() != c.network.in_channels)
      throw ShapeError("expected " + std::to_string(c.network.in_channels) + " bands, got " +
                       std::to_string(cube->bands()));

  Affine a;
  const SampleInput norm = normalize_input(input, parse_normalize_option(c.data.normalize), regression, &a);
  Tensor<float> x = std::holds_alternative<Spectrum>(norm) ? to_tensor(std::get<Spectrum>(norm))
                                                           : to_tensor(std::get<Hypercube>(norm));
  model.net.set_training(false);
  Tensor<float> y = tiled_forward(model.net, x, options.tile, options.overlap, model.net.scale());

  Prediction p;
  if (regression) {
    y.flat() = y.flat() * a.scale + a.offset;
    if (const auto* s = std::get_if<Spectrum>(&input)) {
      p.spectrum = spectrum_from(y, 0, s->axis());
    } else {
      const auto& cube = std::get<Hypercube>(input);
      p.cube = cube_from(y, 0, cube.axis(), cube.name());
    }
    return p;
  }
  p.scores = softmax_channels(y);
  std::vector<std::string> names = model.class_names;
  for (Index k = static_cast<Index>(names.size()); k < y.channels(); ++k) names.push_back("class_" + std::to_string(k));
  names.resize(static_cast<std::size_t>(y.channels()));
  if (c.task == TaskKind::Segmentation) {
    SegmentationMask::Labels labels(y.height(), y.width());
    const auto s = p.scores.sample(0);
    for (Index i = 0; i < y.plane_size(); ++i) {
      Index best;
      s.col(i).maxCoeff(&best);
      labels(i / y.width(), i % y.width()) = static_cast<std::int32_t>(best);
    }
    p.mask = SegmentationMask(std::move(labels), names);
  } else {
    Index best;
    p.scores.sample(0).col(0).maxCoeff(&best);
    p.label = ClassLabel{static_cast<std::int32_t>(best), names[static_cast<std::size_t>(best)]};
  }
  return p;
}

}  // namespace spectrai::train
