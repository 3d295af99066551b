#include "spectrai/train/batch.hpp"

namespace spectrai::train {

nn::Shape sample_shape(const SampleInput& input) {
  if (const auto* s = std::get_if<Spectrum>(&input)) return {1, s->size()};
  const auto& c = std::get<Hypercube>(input);
  return {c.bands(), c.height(), c.width()};
}

void write_input(const SampleInput& input, Tensor<float>& batch, Index n) {
  auto dst = batch.sample(n);
  if (const auto* s = std::get_if<Spectrum>(&input)) {
    dst.row(0) = s->values().transpose();
  } else {
    dst = std::get<Hypercube>(input).pixels().transpose();
  }
}

Tensor<float> to_tensor(const Spectrum& s) {
  Tensor<float> t({1, 1, s.size()});
  write_input(s, t, 0);
  return t;
}

Tensor<float> to_tensor(const Hypercube& c) {
  Tensor<float> t({1, c.bands(), c.height(), c.width()});
  write_input(c, t, 0);
  return t;
}

Spectrum spectrum_from(const Tensor<float>& t, Index n, const WavelengthAxis& axis) {
  Spectrum::Vector v = t.sample(n).row(0).transpose();
  return Spectrum(std::move(v), axis);
}

Hypercube cube_from(const Tensor<float>& t, Index n, const WavelengthAxis& axis, std::string name) {
  Hypercube::Matrix m = t.sample(n).transpose();
  return Hypercube(t.height(), t.width(), std::move(m), axis, std::move(name));
}

namespace {

Affine minmax_affine(float lo, float hi) {
  const float range = hi - lo;
  return {lo, range > 0 ? range : 1.0f};
}

}  // namespace

SampleInput normalize_input(const SampleInput& input, std::optional<NormalizeMode> mode, bool regression,
                            Affine* affine) {
  if (affine) *affine = Affine{};
  if (!mode) return input;
  if (regression) {
    if (const auto* s = std::get_if<Spectrum>(&input)) {
      const Affine a = minmax_affine(s->values().minCoeff(), s->values().maxCoeff());
      if (affine) *affine = a;
      Spectrum::Vector v = (s->values().array() - a.offset) / a.scale;
      return Spectrum(std::move(v), s->axis());
    }
    const auto& c = std::get<Hypercube>(input);
    const Affine a = minmax_affine(c.pixels().minCoeff(), c.pixels().maxCoeff());
    if (affine) *affine = a;
    Hypercube::Matrix m = (c.pixels().array() - a.offset) / a.scale;
    return Hypercube(c.height(), c.width(), std::move(m), c.axis(), c.name());
  }
  if (const auto* s = std::get_if<Spectrum>(&input)) return normalize(*s, *mode).value;
  return normalize(std::get<Hypercube>(input), *mode).value;
}

Batch make_batch(const std::vector<const SamplePair*>& samples, std::optional<NormalizeMode> mode,
                 bool regression) {
  if (samples.empty()) throw ShapeError("empty batch");
  Batch b;
  const nn::Shape first = sample_shape(samples.front()->input);
  nn::Shape shape{static_cast<Index>(samples.size())};
  shape.insert(shape.end(), first.begin(), first.end());
  b.input = Tensor<float>(shape);
  b.affine.resize(samples.size());

  const SampleTarget& t0 = samples.front()->target;
  if (const auto* s = std::get_if<Spectrum>(&t0)) {
    b.target = Tensor<float>({shape[0], 1, s->size()});
  } else if (const auto* c = std::get_if<Hypercube>(&t0)) {
    b.target = Tensor<float>({shape[0], c->bands(), c->height(), c->width()});
  }

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SamplePair& p = *samples[i];
    const Index n = static_cast<Index>(i);
    if (sample_shape(p.input) != first)
      throw ShapeError("batch mixes sample shapes " + nn::shape_string(first) + " and " +
                       nn::shape_string(sample_shape(p.input)) + " (" + p.id + ")");
    Affine a;
    write_input(normalize_input(p.input, mode, regression, &a), b.input, n);
    b.affine[i] = a;
    b.ids.push_back(p.id);
    std::visit(
        [&](const auto& target) {
          using X = std::decay_t<decltype(target)>;
          if constexpr (std::is_same_v<X, Spectrum> || std::is_same_v<X, Hypercube>) {
            const Tensor<float> one = to_tensor(target);
            if (b.target.empty() || one.sample_size() != b.target.sample_size())
              throw ShapeError("batch mixes target shapes (" + p.id + ")");
            b.target.sample(n) = (one.sample(0).array() - a.offset) / a.scale;
          } else if constexpr (std::is_same_v<X, SegmentationMask>) {
            const auto& l = target.labels();
            b.labels.insert(b.labels.end(), l.data(), l.data() + l.size());
          } else {
            b.labels.push_back(target.index);
          }
        },
        p.target);
  }
  return b;
}

}  // namespace spectrai::train
