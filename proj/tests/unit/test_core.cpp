#include "doctest.h"

#include <limits>

#include "spectrai/core/gating.hpp"
#include "spectrai/core/types.hpp"
#include "spectrai/pipeline/rng.hpp"

using namespace spectrai;

namespace {

Hypercube random_cube(Index h, Index w, Index b, Rng& rng) {
  Hypercube::Matrix m(h * w, b);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  return Hypercube(h, w, std::move(m), WavelengthAxis::linear(400, 10, b));
}

}  // namespace

TEST_CASE("wavelength axis invariants") {
  CHECK_NOTHROW(WavelengthAxis({500.0}));
  CHECK_THROWS_AS(WavelengthAxis(std::vector<double>{}), RangeError);
  CHECK_THROWS_AS(WavelengthAxis({500.0, 500.0}), RangeError);
  CHECK_THROWS_AS(WavelengthAxis({510.0, 500.0}), RangeError);
  CHECK_THROWS_AS(WavelengthAxis({0.0, 1.0}), RangeError);
  CHECK_THROWS_AS(WavelengthAxis({std::numeric_limits<double>::infinity()}), RangeError);
  const auto s = WavelengthAxis::synthetic(3);
  CHECK(s.unit() == "index");
  CHECK(s.values() == std::vector<double>{0, 1, 2});
  const auto a = WavelengthAxis::linear(400, 10, 51);
  CHECK(a.size() == 51);
  CHECK(a[50] == doctest::Approx(900));
}

TEST_CASE("spectrum and cube shape checks") {
  CHECK_THROWS_AS(Spectrum(Eigen::VectorXf::Zero(3), WavelengthAxis::synthetic(4)), ShapeError);
  CHECK_THROWS_AS(Hypercube(2, 2, Hypercube::Matrix::Zero(3, 1), WavelengthAxis::synthetic(1)), ShapeError);
  CHECK_THROWS_AS(Hypercube(2, 2, Hypercube::Matrix::Zero(4, 2), WavelengthAxis::synthetic(1)), ShapeError);
}

TEST_CASE("validate_hypercube") {
  Hypercube::Matrix one(1, 1);
  one << 0.0f;
  CHECK(validate_hypercube(Hypercube(1, 1, one, WavelengthAxis({500.0}))).ok());

  Hypercube::Matrix m = Hypercube::Matrix::Zero(6, 2);
  m(4, 1) = std::numeric_limits<float>::quiet_NaN();
  const auto report = validate_hypercube(Hypercube(2, 3, m, WavelengthAxis({500.0, 510.0})));
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].invariant == "finite");
  CHECK(report.violations[0].detail == "non-finite at (1,1,1)");
}

TEST_CASE("validate_hypercube on a full-size scene") {
  const auto cube = Hypercube::zeros(1973, 3975, WavelengthAxis::linear(400, 10, 51));
  CHECK(validate_hypercube(cube).ok());
  const auto patch = crop(cube, 0, 0, 64, 64);
  CHECK(patch.height() == 64);
  CHECK(patch.width() == 64);
  CHECK(patch.bands() == 51);
}

TEST_CASE("pixel_spectrum and assemble_cube") {
  Hypercube::Matrix m(1, 3);
  m << 1, 2, 3;
  const Hypercube c(1, 1, m, WavelengthAxis({500.0, 510.0, 520.0}));
  const auto s = pixel_spectrum(c, 0, 0);
  CHECK(s.values() == Eigen::Vector3f(1, 2, 3));
  CHECK(s.axis() == c.axis());
  CHECK_THROWS_AS(pixel_spectrum(c, 1, 0), IndexError);
  CHECK_THROWS_AS(pixel_spectrum(c, 0, -1), IndexError);

  Rng rng(3);
  const auto cube = random_cube(4, 5, 6, rng);
  std::vector<Spectrum> spectra;
  for (Index y = 0; y < 4; ++y)
    for (Index x = 0; x < 5; ++x) spectra.push_back(pixel_spectrum(cube, y, x));
  CHECK(assemble_cube(4, 5, spectra) == cube);
}

TEST_CASE("band_select") {
  Rng rng(4);
  const auto cube = random_cube(2, 2, 51, rng);
  const auto sel = band_select(cube, 450, 900);
  CHECK(sel.bands() == 46);
  CHECK(sel.axis()[0] == doctest::Approx(450));
  CHECK(sel(1, 1, 0) == cube(1, 1, 5));
  CHECK(band_select(cube, 400, 900) == cube);
  CHECK(band_select(sel, 450, 900) == sel);
  CHECK_THROWS_WITH_AS(band_select(cube, 2000, 3000), "no bands in range", RangeError);
  CHECK_THROWS_AS(band_select(cube, 900, 400), RangeError);
}

TEST_CASE("crop") {
  Rng rng(5);
  const auto cube = random_cube(7, 9, 3, rng);
  CHECK(crop(cube, 0, 0, 7, 9) == cube);
  CHECK_THROWS_AS(crop(cube, 0, 0, 0, 3), RangeError);
  CHECK_THROWS_AS(crop(cube, 5, 0, 3, 3), RangeError);
  const auto a = crop(cube, 1, 2, 5, 6);
  CHECK(a(0, 0, 1) == cube(1, 2, 1));
  CHECK(crop(a, 2, 1, 3, 4) == crop(cube, 3, 3, 3, 4));
}

TEST_CASE("segmentation mask invariants") {
  SegmentationMask::Labels l(1, 2);
  l << 0, 2;
  CHECK_NOTHROW(SegmentationMask(l, {"a", "b", "c"}));
  CHECK_THROWS_AS(SegmentationMask(l, {"a", "b"}), LabelError);
  CHECK_THROWS(SegmentationMask(l, {}));
  CHECK(aerorit_classes().size() == 6);
  CHECK(aerorit_classes()[0] == "unspecified");
}

TEST_CASE("sample pair checks") {
  const auto lr = Hypercube::zeros(8, 8, WavelengthAxis::synthetic(2));
  const auto hr = Hypercube::zeros(16, 16, WavelengthAxis::synthetic(2));
  SamplePair p{"a", lr, hr, PairKind::CubeToCube, {}};
  CHECK_NOTHROW(check_pair(p, 2));
  CHECK_THROWS_AS(check_pair(p, 1), ShapeError);
  CHECK_THROWS_AS(check_pair(p, 4), ShapeError);
  SamplePair same{"b", lr, lr, PairKind::CubeToCube, {}};
  CHECK_NOTHROW(check_pair(same));
}

TEST_CASE("enum strings round-trip") {
  for (TaskKind t : kAllTasks) CHECK(parse_task(to_string(t)) == t);
  CHECK(to_string(TaskKind::SpectrumDenoising) == "SpectrumDenoising");
  CHECK(to_string(TaskKind::SuperResolution) == "SuperResolution");
  CHECK_THROWS_AS(parse_task("segmentation"), ParseError);
  for (NetworkFamily f : kAllFamilies) CHECK(parse_family(to_string(f)) == f);
  for (LossKind l : kAllLosses) CHECK(parse_loss(to_string(l)) == l);
}

TEST_CASE("gating table") {
  CHECK(family_permitted(TaskKind::Segmentation, NetworkFamily::UNet2D));
  CHECK_FALSE(family_permitted(TaskKind::SpectrumDenoising, NetworkFamily::UNet2D));
  CHECK(family_permitted(TaskKind::SpectrumDenoising, NetworkFamily::ResUNet1D));
  CHECK(family_permitted(TaskKind::SuperResolution, NetworkFamily::HyperRCAN));
  CHECK(loss_permitted(TaskKind::Segmentation, LossKind::CrossEntropy));
  CHECK_FALSE(loss_permitted(TaskKind::Segmentation, LossKind::L1));
  CHECK_FALSE(loss_permitted(TaskKind::SuperResolution, LossKind::CrossEntropy));
  CHECK_THROWS_WITH_AS(require_family(TaskKind::SpectrumDenoising, NetworkFamily::UNet2D),
                       doctest::Contains("network not suitable for task"), GateError);
  for (TaskKind t : kAllTasks) {
    CHECK_FALSE(permitted_families(t).empty());
    CHECK_FALSE(permitted_losses(t).empty());
  }
}
