#include "spectrai/metrics/metrics.hpp"

namespace spectrai::metrics {

using nlohmann::json;

SegmentationScores scores_from(const ConfusionMatrix& m) {
  SegmentationScores s;
  s.confusion = m;
  const Index C = m.classes();
  const auto& M = m.counts();
  const double total = static_cast<double>(m.total());
  s.accuracy = total > 0 ? static_cast<double>(M.trace()) / total : 0.0;
  s.iou.assign(static_cast<std::size_t>(C), std::nullopt);
  double sum = 0.0, sum_no0 = 0.0;
  Index present = 0, present_no0 = 0;
  for (Index c = 0; c < C; ++c) {
    const auto row = M.row(c).sum(), col = M.col(c).sum(), tp = M(c, c);
    if (row == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(row + col - tp);
    s.iou[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++present;
    if (c > 0) {
      sum_no0 += iou;
      ++present_no0;
    }
  }
  s.mean_iou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  if (present_no0 > 0) s.mean_iou_without_0 = sum_no0 / static_cast<double>(present_no0);
  return s;
}

SegmentationScores confusion_and_scores(const SegmentationMask& pred, const SegmentationMask& ref,
                                        std::optional<int> ignore_label) {
  return confusion_and_scores(pred.labels(), ref.labels(), std::max(pred.class_count(), ref.class_count()),
                              ignore_label);
}

ReconstructionMetrics ReconstructionAccumulator::finish(std::optional<double> max_value) const {
  if (n_ == 0) throw ShapeError("no values accumulated");
  ReconstructionMetrics m;
  m.mse = sq_ / static_cast<double>(n_);
  m.mae = abs_ / static_cast<double>(n_);
  const double peak = max_value ? *max_value : ref_max_;
  if (!(peak > 0)) throw RangeError("max_value must be > 0 (reference maximum is " + std::to_string(peak) + ")");
  m.psnr = psnr(m.mse, peak);
  m.sam_pixels = pixels_;
  m.sam_skipped = skipped_;
  m.sam_undefined = pixels_ == 0;
  m.sam = pixels_ > 0 ? angle_ / static_cast<double>(pixels_) : 0.0;
  m.sam_degrees = m.sam * 180.0 / std::numbers::pi;
  return m;
}

ReconstructionReport reconstruction_report(const Hypercube& pred, const Hypercube& ref,
                                           std::optional<double> max_value, const Hypercube* baseline) {
  ReconstructionReport r;
  r.max_value = max_value ? *max_value : static_cast<double>(ref.pixels().maxCoeff());
  r.model = reconstruction_metrics(pred.pixels(), ref.pixels(), r.max_value);
  if (baseline) r.baseline = reconstruction_metrics(baseline->pixels(), ref.pixels(), r.max_value);
  return r;
}

json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

json to_json(const ReconstructionMetrics& m) {
  json j;
  j["mse"] = json_number(m.mse);
  j["mae"] = json_number(m.mae);
  j["psnr"] = json_number(m.psnr);
  j["sam"] = m.sam_undefined ? json(nullptr) : json_number(m.sam);
  j["sam_degrees"] = m.sam_undefined ? json(nullptr) : json_number(m.sam_degrees);
  j["sam_pixels"] = m.sam_pixels;
  j["sam_skipped"] = m.sam_skipped;
  j["sam_undefined"] = m.sam_undefined;
  return j;
}

json to_json(const SegmentationScores& s, const std::vector<std::string>& names) {
  json j;
  j["accuracy"] = s.accuracy;
  j["mean_iou"] = s.mean_iou;
  j["mean_iou_without_0"] = s.mean_iou_without_0 ? json(*s.mean_iou_without_0) : json(nullptr);
  json iou = json::object();
  for (std::size_t c = 0; c < s.iou.size(); ++c) {
    const std::string key = c < names.size() ? names[c] : std::to_string(c);
    iou[key] = s.iou[c] ? json(*s.iou[c]) : json(nullptr);
  }
  j["iou"] = iou;
  json rows = json::array();
  for (Index r = 0; r < s.confusion.classes(); ++r) {
    json row = json::array();
    for (Index c = 0; c < s.confusion.classes(); ++c) row.push_back(s.confusion(r, c));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

}  // namespace spectrai::metrics
