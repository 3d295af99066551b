#include "spectrai/core/types.hpp"

#include <algorithm>

namespace spectrai {

namespace {

struct TaskName {
  TaskKind task;
  std::string_view name;
};

constexpr TaskName kTaskNames[] = {
    {TaskKind::SpectrumDenoising, "SpectrumDenoising"},
    {TaskKind::ImageDenoising, "ImageDenoising"},
    {TaskKind::SpectrumClassification, "SpectrumClassification"},
    {TaskKind::ImageClassification, "ImageClassification"},
    {TaskKind::Segmentation, "Segmentation"},
    {TaskKind::SuperResolution, "SuperResolution"},
};

struct PairName {
  PairKind kind;
  std::string_view name;
};

constexpr PairName kPairNames[] = {
    {PairKind::SpectrumToSpectrum, "spectrum->spectrum"},
    {PairKind::CubeToCube, "cube->cube"},
    {PairKind::CubeToMask, "cube->mask"},
    {PairKind::SpectrumToLabel, "spectrum->label"},
    {PairKind::CubeToLabel, "cube->label"},
};

}  // namespace

std::string_view to_string(TaskKind task) {
  for (const auto& t : kTaskNames)
    if (t.task == task) return t.name;
  return "unknown";
}

TaskKind parse_task(std::string_view text) {
  for (const auto& t : kTaskNames)
    if (t.name == text) return t.task;
  throw ParseError("unknown task '" + std::string(text) + "'");
}

bool is_image_task(TaskKind task) {
  switch (task) {
    case TaskKind::ImageDenoising:
    case TaskKind::ImageClassification:
    case TaskKind::Segmentation:
    case TaskKind::SuperResolution:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(PairKind kind) {
  for (const auto& p : kPairNames)
    if (p.kind == kind) return p.name;
  return "unknown";
}

PairKind parse_pair_kind(std::string_view text) {
  for (const auto& p : kPairNames)
    if (p.name == text) return p.kind;
  throw ParseError("unknown pair kind '" + std::string(text) + "'");
}

PairKind pair_kind_for(TaskKind task) {
  switch (task) {
    case TaskKind::SpectrumDenoising: return PairKind::SpectrumToSpectrum;
    case TaskKind::ImageDenoising: return PairKind::CubeToCube;
    case TaskKind::SpectrumClassification: return PairKind::SpectrumToLabel;
    case TaskKind::ImageClassification: return PairKind::CubeToLabel;
    case TaskKind::Segmentation: return PairKind::CubeToMask;
    case TaskKind::SuperResolution: return PairKind::CubeToCube;
  }
  return PairKind::SpectrumToSpectrum;
}

// ---------------------------------------------------------------------------

WavelengthAxis::WavelengthAxis(std::vector<double> values, std::string unit)
    : values_(std::move(values)), unit_(std::move(unit)) {
  if (values_.empty()) throw RangeError("wavelength axis must be non-empty");
  const bool index_unit = unit_ == "index";
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) || (index_unit ? v < 0 : v <= 0))
      throw RangeError("wavelength axis value " + std::to_string(v) + " at " + std::to_string(i) +
                       " must be finite and positive");
    if (i > 0 && !(v > values_[i - 1]))
      throw RangeError("wavelength axis not strictly increasing at " + std::to_string(i));
  }
}

WavelengthAxis WavelengthAxis::synthetic(Index n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(i);
  return WavelengthAxis(std::move(v), "index");
}

WavelengthAxis WavelengthAxis::linear(double first, double step, Index n, std::string unit) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = first + step * static_cast<double>(i);
  return WavelengthAxis(std::move(v), std::move(unit));
}

WavelengthAxis WavelengthAxis::reversed() const {
  // A flipped axis keeps increasing order but the band content is mirrored:
  // position i now carries the band that was at n-1-i, so the axis reads
  // as the mirror image of the original spacing.
  std::vector<double> v(values_.size());
  const double lo = values_.front();
  const double hi = values_.back();
  for (std::size_t i = 0; i < values_.size(); ++i) v[i] = lo + hi - values_[values_.size() - 1 - i];
  return WavelengthAxis(std::move(v), unit_);
}

WavelengthAxis WavelengthAxis::subset(const std::vector<Index>& keep) const {
  std::vector<double> v;
  v.reserve(keep.size());
  for (Index k : keep) v.push_back(values_.at(static_cast<std::size_t>(k)));
  return WavelengthAxis(std::move(v), unit_);
}

// ---------------------------------------------------------------------------

SegmentationMask::SegmentationMask(Labels labels, std::vector<std::string> class_table)
    : labels_(std::move(labels)), classes_(std::move(class_table)) {
  if (classes_.empty()) throw RangeError("class table must be non-empty");
  if (labels_.rows() < 1 || labels_.cols() < 1) throw ShapeError("mask dimensions must be >= 1");
  const auto c = static_cast<std::int32_t>(classes_.size());
  for (Index y = 0; y < labels_.rows(); ++y)
    for (Index x = 0; x < labels_.cols(); ++x)
      if (labels_(y, x) < 0 || labels_(y, x) >= c)
        throw LabelError("label " + std::to_string(labels_(y, x)) + " at (" + std::to_string(y) +
                         "," + std::to_string(x) + ") outside [0," + std::to_string(c) + ")");
}

const std::vector<std::string>& aerorit_classes() {
  static const std::vector<std::string> classes{"unspecified", "roads",    "buildings",
                                                "vegetation",  "cars",     "water"};
  return classes;
}

SegmentationMask crop(const SegmentationMask& mask, Index y0, Index x0, Index h, Index w) {
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > mask.height() || x0 + w > mask.width())
    throw RangeError("mask crop window outside mask");
  SegmentationMask::Labels l = mask.labels().block(y0, x0, h, w);
  return SegmentationMask(std::move(l), mask.class_table());
}

void check_pair(const SamplePair& pair, int scale) {
  auto spatial_in = [&]() -> std::optional<std::pair<Index, Index>> {
    if (const auto* c = std::get_if<Hypercube>(&pair.input)) return std::pair{c->height(), c->width()};
    return std::nullopt;
  }();
  std::optional<std::pair<Index, Index>> spatial_out;
  if (const auto* c = std::get_if<Hypercube>(&pair.target)) spatial_out = std::pair{c->height(), c->width()};
  if (const auto* m = std::get_if<SegmentationMask>(&pair.target))
    spatial_out = std::pair{m->height(), m->width()};
  if (spatial_in && spatial_out) {
    const auto [h, w] = *spatial_in;
    const auto [th, tw] = *spatial_out;
    if (th != h * scale || tw != w * scale)
      throw ShapeError("pair '" + pair.id + "': target " + std::to_string(th) + "x" +
                       std::to_string(tw) + " incompatible with input " + std::to_string(h) + "x" +
                       std::to_string(w) + " at scale " + std::to_string(scale));
  }
  if (const auto* s = std::get_if<Spectrum>(&pair.input)) {
    if (const auto* t = std::get_if<Spectrum>(&pair.target); t && t->size() != s->size())
      throw ShapeError("pair '" + pair.id + "': spectrum lengths differ");
  }
}

}  // namespace spectrai
