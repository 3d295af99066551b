#include "doctest.h"

#include <cmath>

#include "spectrai/metrics/metrics.hpp"
#include "spectrai/pipeline/rng.hpp"

using namespace spectrai;
using namespace spectrai::metrics;

namespace {

using Labels = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

Labels random_labels(Index h, Index w, Index classes, Rng& rng) {
  Labels l(h, w);
  for (Index i = 0; i < l.size(); ++i) l.data()[i] = static_cast<std::int32_t>(rng.below(classes));
  return l;
}

Hypercube random_cube(Index h, Index w, Index b, Rng& rng) {
  Hypercube::Matrix m(h * w, b);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(0, 1));
  return Hypercube(h, w, std::move(m), WavelengthAxis::linear(400, 10, b));
}

}  // namespace

TEST_CASE("confusion matrix and scores") {
  Labels ref(2, 2), pred(2, 2);
  ref << 0, 1, 1, 0;
  pred = ref;
  auto s = confusion_and_scores(pred, ref, 2);
  CHECK(s.accuracy == 1.0);
  CHECK(s.mean_iou == 1.0);
  pred << 1, 1, 0, 0;
  s = confusion_and_scores(pred, ref, 2);
  CHECK(s.accuracy == 0.5);
  CHECK(s.confusion(0, 1) == 1);
  CHECK(s.confusion(1, 0) == 1);
  REQUIRE(s.iou[0]);
  CHECK(*s.iou[0] == doctest::Approx(1.0 / 3.0));

  // classes absent from the reference do not enter the mean
  Labels r3 = Labels::Zero(1, 4), p3(1, 4);
  p3 << 0, 0, 2, 2;
  s = confusion_and_scores(p3, r3, 3);
  CHECK_FALSE(s.iou[1]);
  CHECK_FALSE(s.iou[2]);
  CHECK(s.mean_iou == doctest::Approx(0.5));
  // ignored pixels are skipped
  Labels r4(1, 3), p4(1, 3);
  r4 << 0, 5, 1;
  p4 << 0, 0, 1;
  s = confusion_and_scores(p4, r4, 2, 5);
  CHECK(s.confusion.total() == 2);
  CHECK(s.accuracy == 1.0);

  CHECK_THROWS_AS(confusion_and_scores(Labels::Zero(2, 2), Labels::Zero(2, 3), 2), ShapeError);
  CHECK_THROWS_AS(confusion_and_scores(Labels::Constant(1, 1, 4), Labels::Zero(1, 1), 2), LabelError);
}

TEST_CASE("segmentation scores match a brute-force tally") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.below(8)), w = 1 + static_cast<Index>(rng.below(8));
    const Labels ref = random_labels(h, w, 6, rng), pred = random_labels(h, w, 6, rng);
    const auto s = confusion_and_scores(pred, ref, 6);
    std::int64_t tally[6][6] = {};
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) ++tally[ref(y, x)][pred(y, x)];
    for (int r = 0; r < 6; ++r)
      for (int p = 0; p < 6; ++p) CHECK(s.confusion(r, p) == tally[r][p]);

    double correct = 0, miou = 0;
    int present = 0;
    for (int c = 0; c < 6; ++c) {
      correct += static_cast<double>(tally[c][c]);
      double row = 0, col = 0;
      for (int k = 0; k < 6; ++k) {
        row += static_cast<double>(tally[c][k]);
        col += static_cast<double>(tally[k][c]);
      }
      if (row == 0) continue;
      ++present;
      const double iou = static_cast<double>(tally[c][c]) / (row + col - static_cast<double>(tally[c][c]));
      REQUIRE(s.iou[static_cast<std::size_t>(c)]);
      CHECK(std::abs(*s.iou[static_cast<std::size_t>(c)] - iou) <= 1e-9);
      miou += iou;
    }
    CHECK(std::abs(s.accuracy - correct / static_cast<double>(h * w)) <= 1e-9);
    CHECK(std::abs(s.mean_iou - miou / present) <= 1e-9);

    // consistent relabeling leaves accuracy and mIoU unchanged
    const int perm[6] = {3, 5, 0, 1, 4, 2};
    Labels rp = ref, pp = pred;
    for (Index i = 0; i < rp.size(); ++i) {
      rp.data()[i] = perm[rp.data()[i]];
      pp.data()[i] = perm[pp.data()[i]];
    }
    const auto sp = confusion_and_scores(pp, rp, 6);
    CHECK(std::abs(sp.accuracy - s.accuracy) <= 1e-12);
    CHECK(std::abs(sp.mean_iou - s.mean_iou) <= 1e-12);
  }
}

TEST_CASE("psnr and reconstruction metrics") {
  CHECK(psnr(0.0, 1.0) == kInfinity);
  CHECK(std::abs(psnr(0.01, 1.0) - 20.0) < 1e-12);
  CHECK(psnr(0.01, 1.0) > psnr(0.02, 1.0));
  CHECK_THROWS_AS(psnr(0.1, 0.0), RangeError);

  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  CHECK(std::abs(reconstruction_metrics(a, b).sam - std::numbers::pi / 2) < 1e-12);
  const auto same = reconstruction_metrics(a, a);
  CHECK(same.mse == 0);
  CHECK(same.psnr == kInfinity);
  CHECK(same.sam == 0);

  // parallel spectra at many scales give a zero angle, not sqrt(eps)
  Rng rng(24);
  for (int i = 0; i < 100; ++i) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(1, 1 + static_cast<Index>(rng.below(6)));
    CHECK(reconstruction_metrics((x * rng.uniform(0.1, 10)).eval(), x, 1.0).sam < 1e-15);
  }

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 3);
  const auto undefined = reconstruction_metrics(z, z, 1.0);
  CHECK(undefined.sam_undefined);
  CHECK(undefined.sam_skipped == 2);
  CHECK(undefined.mse == 0);
  CHECK(undefined.psnr == kInfinity);
  CHECK_THROWS_AS(reconstruction_metrics(z, z), RangeError);

  Eigen::MatrixXd mixed(2, 2), mixed_ref(2, 2);
  mixed << 0, 0, 1, 1;
  mixed_ref << 1, 1, 1, 1;
  const auto partly = reconstruction_metrics(mixed, mixed_ref);
  CHECK_FALSE(partly.sam_undefined);
  CHECK(partly.sam_skipped == 1);
  CHECK(partly.sam_pixels == 1);
  CHECK(partly.sam == doctest::Approx(0).epsilon(1e-7));

  CHECK_THROWS_AS(reconstruction_metrics(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("reconstruction metrics match brute force") {
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.below(8)), w = 1 + static_cast<Index>(rng.below(8));
    const Index b = 1 + static_cast<Index>(rng.below(4));
    const Hypercube ref = random_cube(h, w, b, rng), pred = random_cube(h, w, b, rng), base = random_cube(h, w, b, rng);
    const auto report = reconstruction_report(pred, ref, std::nullopt, &base);

    double sq = 0, ab = 0, mx = -1e300, angle = 0;
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        double dot = 0, np = 0, nr = 0;
        for (Index k = 0; k < b; ++k) {
          const double p = pred(y, x, k), r = ref(y, x, k);
          sq += (p - r) * (p - r);
          ab += std::abs(p - r);
          mx = std::max(mx, r);
          dot += p * r;
          np += p * p;
          nr += r * r;
        }
        angle += std::acos(std::clamp(dot / std::sqrt(np * nr), -1.0, 1.0));
      }
    const double n = static_cast<double>(h * w * b);
    CHECK(std::abs(report.max_value - mx) <= 1e-9);
    CHECK(std::abs(report.model.mse - sq / n) <= 1e-9);
    CHECK(std::abs(report.model.mae - ab / n) <= 1e-9);
    CHECK(std::abs(report.model.psnr - 10 * std::log10(mx * mx / (sq / n))) <= 1e-9);
    CHECK(std::abs(report.model.sam - angle / static_cast<double>(h * w)) <= 1e-9);
    CHECK(std::abs(report.model.sam_degrees - report.model.sam * 180 / std::numbers::pi) <= 1e-9);
    REQUIRE(report.baseline);

    // scale invariance of the spectral angle
    Eigen::MatrixXd p = pred.pixels().cast<double>(), r = ref.pixels().cast<double>();
    CHECK(std::abs(reconstruction_metrics((3.5 * p).eval(), r).sam - reconstruction_metrics(p, r).sam) <= 1e-9);
  }
}

TEST_CASE("snr gain") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(32));
    Eigen::VectorXd clean(n), noisy(n), den(n);
    for (Index i = 0; i < n; ++i) {
      clean[i] = rng.normal();
      noisy[i] = clean[i] + rng.normal();
      den[i] = clean[i] + 0.3 * rng.normal();
    }
    double before = 0, after = 0;
    for (Index i = 0; i < n; ++i) {
      before += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
      after += (den[i] - clean[i]) * (den[i] - clean[i]);
    }
    CHECK(std::abs(snr_gain(noisy, den, clean) - 10 * std::log10(before / after)) <= 1e-9);
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(4), x(4);
  x << 1, -1, 2, 0.5;
  CHECK(snr_gain(x, x, c) == 0.0);
  CHECK(snr_gain(x, c, c) == kInfinity);
  const Eigen::VectorXd half = x / std::sqrt(2.0);
  CHECK(std::abs(snr_gain(x, half, c) - 10 * std::log10(2.0)) < 1e-12);
  CHECK_THROWS_AS(snr_gain(x, Eigen::VectorXd::Zero(3), c), ShapeError);
}

TEST_CASE("json numbers") {
  CHECK(json_number(1.5) == 1.5);
  CHECK(json_number(kInfinity) == "+inf");
  CHECK(json_number(-kInfinity) == "-inf");
  CHECK(json_number(std::nan("")) == "nan");
  ReconstructionMetrics m;
  m.psnr = kInfinity;
  CHECK(to_json(m).at("psnr") == "+inf");
}
