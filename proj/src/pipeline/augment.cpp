#include "spectrai/pipeline/augment.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "spectrai/pipeline/rng.hpp"

namespace spectrai {

namespace {

struct KindName {
  AugmentKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {AugmentKind::SpectralFlip, "spectral_flip"}, {AugmentKind::SpectralShift, "spectral_shift"},
    {AugmentKind::GaussianNoise, "gaussian_noise"}, {AugmentKind::HFlip, "hflip"},
    {AugmentKind::VFlip, "vflip"},                  {AugmentKind::Rot90, "rot90"},
    {AugmentKind::RandomCrop, "random_crop"},
};

// Remaps pixels: out(y, x) = in(src(y, x)).
template <typename Src>
Hypercube remap(const Hypercube& cube, Index out_h, Index out_w, Src src) {
  Hypercube::Matrix m(out_h * out_w, cube.bands());
  for (Index y = 0; y < out_h; ++y)
    for (Index x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src(y, x);
      m.row(y * out_w + x) = cube.pixels().row(sy * cube.width() + sx);
    }
  return Hypercube(out_h, out_w, std::move(m), cube.axis(), cube.name());
}

template <typename Src>
SegmentationMask remap(const SegmentationMask& mask, Index out_h, Index out_w, Src src) {
  SegmentationMask::Labels l(out_h, out_w);
  for (Index y = 0; y < out_h; ++y)
    for (Index x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src(y, x);
      l(y, x) = mask(sy, sx);
    }
  return SegmentationMask(std::move(l), mask.class_table());
}

template <typename Image>
Image hflip_impl(const Image& img) {
  const Index W = img.width();
  return remap(img, img.height(), W, [W](Index y, Index x) { return std::pair{y, W - 1 - x}; });
}

template <typename Image>
Image vflip_impl(const Image& img) {
  const Index H = img.height();
  return remap(img, H, img.width(), [H](Index y, Index x) { return std::pair{H - 1 - y, x}; });
}

template <typename Image>
Image rot90_impl(const Image& img) {
  const Index W = img.width();
  return remap(img, W, img.height(), [W](Index y, Index x) { return std::pair{x, W - 1 - y}; });
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ParseError("augmentation parameter '" + std::string(key) + "' expects a number");
  return out;
}

// Spectral / spatial / noise transforms on the variant members.
struct Transform {
  AugmentKind kind;
  int shift = 0;

  Spectrum operator()(const Spectrum& s) const {
    if (kind == AugmentKind::SpectralFlip) return spectral_flip(s);
    if (kind == AugmentKind::SpectralShift) return spectral_shift(s, shift);
    return s;
  }
  Hypercube operator()(const Hypercube& c) const {
    switch (kind) {
      case AugmentKind::SpectralFlip: return spectral_flip(c);
      case AugmentKind::SpectralShift: return spectral_shift(c, shift);
      case AugmentKind::HFlip: return hflip(c);
      case AugmentKind::VFlip: return vflip(c);
      case AugmentKind::Rot90: return rot90(c);
      default: return c;
    }
  }
  SegmentationMask operator()(const SegmentationMask& m) const {
    switch (kind) {
      case AugmentKind::HFlip: return hflip(m);
      case AugmentKind::VFlip: return vflip(m);
      case AugmentKind::Rot90: return rot90(m);
      default: return m;  // spectral transforms leave labels alone
    }
  }
  ClassLabel operator()(const ClassLabel& l) const { return l; }
};

bool is_spatial(AugmentKind k) {
  return k == AugmentKind::HFlip || k == AugmentKind::VFlip || k == AugmentKind::Rot90 ||
         k == AugmentKind::RandomCrop;
}

Index spatial_height(const SampleTarget& t) {
  if (const auto* c = std::get_if<Hypercube>(&t)) return c->height();
  if (const auto* m = std::get_if<SegmentationMask>(&t)) return m->height();
  return 0;
}

}  // namespace

std::string_view to_string(AugmentKind kind) {
  for (const auto& k : kKindNames)
    if (k.kind == kind) return k.name;
  return "unknown";
}

AugmentKind parse_augment_kind(std::string_view text) {
  for (const auto& k : kKindNames)
    if (k.name == text) return k.kind;
  throw ParseError("unknown augmentation '" + std::string(text) + "'");
}

bool augmentation_permitted(TaskKind task, AugmentKind kind) {
  if (!is_spatial(kind)) return true;
  return is_image_task(task);
}

std::vector<AugmentKind> permitted_augmentations(TaskKind task) {
  std::vector<AugmentKind> out;
  for (auto k : kAllAugmentations)
    if (augmentation_permitted(task, k)) out.push_back(k);
  return out;
}

void AugmentationSpec::validate() const {
  if (!(probability >= 0 && probability <= 1)) throw ConfigError("augmentation probability must be in [0,1]");
  if (!(sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
  if (crop_h < 1 || crop_w < 1) throw ConfigError("crop size must be >= 1");
}

AugmentationSpec parse_augmentation_spec(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string name;
  if (!(in >> name)) throw ParseError("empty augmentation spec");
  AugmentationSpec spec;
  spec.kind = parse_augment_kind(name);
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("augmentation parameter '" + kv + "' needs key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (key == "p") spec.probability = parse_double(key, value);
    else if (key == "shift") spec.shift = static_cast<int>(parse_double(key, value));
    else if (key == "sigma") spec.sigma = parse_double(key, value);
    else if (key == "size") {
      const auto x = value.find('x');
      spec.crop_h = static_cast<Index>(parse_double(key, value.substr(0, x)));
      spec.crop_w = x == std::string::npos ? spec.crop_h
                                           : static_cast<Index>(parse_double(key, value.substr(x + 1)));
    } else
      throw ParseError("unknown augmentation parameter '" + key + "' for " + name);
  }
  spec.validate();
  return spec;
}

std::string format_augmentation_spec(const AugmentationSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(spec.kind) << " p=" << spec.probability;
  if (spec.kind == AugmentKind::SpectralShift) os << " shift=" << spec.shift;
  if (spec.kind == AugmentKind::GaussianNoise) os << " sigma=" << spec.sigma;
  if (spec.kind == AugmentKind::RandomCrop) os << " size=" << spec.crop_h << "x" << spec.crop_w;
  return os.str();
}

void AugmentationPolicy::validate() const {
  for (const auto& s : specs) {
    s.validate();
    if (!augmentation_permitted(task, s.kind))
      throw GateError("augmentation " + std::string(to_string(s.kind)) + " not suitable for task " +
                      std::string(to_string(task)));
  }
}

// ---------------------------------------------------------------------------

Hypercube spectral_flip(const Hypercube& cube) {
  Hypercube::Matrix m = cube.pixels().rowwise().reverse();
  return Hypercube(cube.height(), cube.width(), std::move(m), cube.axis().reversed(), cube.name());
}

Hypercube spectral_shift(const Hypercube& cube, int shift) {
  const Index n = cube.bands();
  if (std::abs(shift) >= n) throw RangeError("shift exceeds band count");
  Hypercube::Matrix m = Hypercube::Matrix::Zero(cube.pixel_count(), n);
  const Index len = n - std::abs(shift);
  if (shift >= 0) m.rightCols(len) = cube.pixels().leftCols(len);
  else m.leftCols(len) = cube.pixels().rightCols(len);
  return Hypercube(cube.height(), cube.width(), std::move(m), cube.axis(), cube.name());
}

Hypercube hflip(const Hypercube& cube) { return hflip_impl(cube); }
Hypercube vflip(const Hypercube& cube) { return vflip_impl(cube); }
Hypercube rot90(const Hypercube& cube) { return rot90_impl(cube); }
SegmentationMask hflip(const SegmentationMask& mask) { return hflip_impl(mask); }
SegmentationMask vflip(const SegmentationMask& mask) { return vflip_impl(mask); }
SegmentationMask rot90(const SegmentationMask& mask) { return rot90_impl(mask); }

SamplePair apply_augmentation(const SamplePair& sample, const AugmentationPolicy& policy,
                              std::uint64_t seed, std::string_view sample_id) {
  policy.validate();
  SamplePair out = sample;
  for (std::size_t k = 0; k < policy.specs.size(); ++k) {
    const auto& spec = policy.specs[k];
    Rng rng(derive_seed(seed, sample_id, k));
    if (!(rng.uniform() < spec.probability)) continue;

    switch (spec.kind) {
      case AugmentKind::SpectralFlip:
      case AugmentKind::SpectralShift:
      case AugmentKind::HFlip:
      case AugmentKind::VFlip:
      case AugmentKind::Rot90: {
        if (is_spatial(spec.kind) && !std::holds_alternative<Hypercube>(out.input))
          throw GateError("spatial augmentation requires a hypercube input");
        const Transform t{spec.kind, spec.shift};
        out.input = std::visit([&](const auto& v) -> SampleInput { return t(v); }, out.input);
        out.target = std::visit([&](const auto& v) -> SampleTarget { return t(v); }, out.target);
        break;
      }
      case AugmentKind::GaussianNoise: {
        if (const auto* s = std::get_if<Spectrum>(&out.input)) {
          Spectrum::Vector v = s->values();
          for (Index i = 0; i < v.size(); ++i) v[i] += static_cast<float>(spec.sigma * rng.normal());
          out.input = Spectrum(std::move(v), s->axis());
        } else {
          const auto& c = std::get<Hypercube>(out.input);
          Hypercube::Matrix m = c.pixels();
          for (Index r = 0; r < m.rows(); ++r)
            for (Index b = 0; b < m.cols(); ++b) m(r, b) += static_cast<float>(spec.sigma * rng.normal());
          out.input = Hypercube(c.height(), c.width(), std::move(m), c.axis(), c.name());
        }
        break;
      }
      case AugmentKind::RandomCrop: {
        const auto* c = std::get_if<Hypercube>(&out.input);
        if (!c) throw GateError("random_crop requires a hypercube input");
        if (spec.crop_h > c->height() || spec.crop_w > c->width())
          throw RangeError("crop " + std::to_string(spec.crop_h) + "x" + std::to_string(spec.crop_w) +
                           " larger than sample " + std::to_string(c->height()) + "x" +
                           std::to_string(c->width()));
        const Index th = spatial_height(out.target);
        const Index scale = th > 0 ? th / c->height() : 1;
        const auto y0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c->height() - spec.crop_h + 1)));
        const auto x0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c->width() - spec.crop_w + 1)));
        Hypercube cropped = crop(*c, y0, x0, spec.crop_h, spec.crop_w);
        if (auto* tc = std::get_if<Hypercube>(&out.target))
          out.target = crop(*tc, y0 * scale, x0 * scale, spec.crop_h * scale, spec.crop_w * scale);
        else if (auto* tm = std::get_if<SegmentationMask>(&out.target))
          out.target = crop(*tm, y0 * scale, x0 * scale, spec.crop_h * scale, spec.crop_w * scale);
        out.input = std::move(cropped);
        break;
      }
    }
  }
  return out;
}

}  // namespace spectrai
