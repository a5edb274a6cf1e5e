#include "ov3d/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ov3d {

std::vector<bool> match_detections(std::span<const DetectionResult> dets, std::span<const GroundTruthBox> gts,
                                   double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : order) {
    const auto& det = dets[d];
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].category != det.category || gts[g].scene_id != det.scene_id) continue;
      const double iou = iou3d(det.box, gts[g].box);
      if (iou >= iou_thresh && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      taken[best_g] = true;
      tp[d] = true;
    }
  }
  return tp;
}

double average_precision(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0 || ranked_tp.empty()) return 0.0;
  const std::size_t n = ranked_tp.size();
  std::vector<double> rec(n + 2), prec(n + 2);
  rec[0] = 0.0;
  prec[0] = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_tp[i] ? 1 : 0;
    rec[i + 1] = static_cast<double>(tp) / static_cast<double>(num_gt);
    prec[i + 1] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  rec[n + 1] = 1.0;
  prec[n + 1] = 0.0;
  for (std::size_t i = n + 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < n + 2; ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport aggregate(std::vector<CategoryMetrics> per_category, const std::vector<bool>& base_mask) {
  if (base_mask.size() != per_category.size())
    throw std::invalid_argument("aggregate: base mask length must equal the category count");
  MetricsReport r;
  SplitMetrics sums_ap, sums_ar, sums_f1;
  std::size_t n_all = 0;
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    const auto& m = per_category[c];
    if (m.num_gt == 0) continue;
    ++n_all;
    auto& n_split = base_mask[c] ? r.base_categories : r.novel_categories;
    ++n_split;
    auto add = [&](SplitMetrics& s, double v) {
      (base_mask[c] ? s.base : s.novel) += v;
      s.mean += v;
    };
    add(sums_ap, m.ap);
    add(sums_ar, m.ar);
    add(sums_f1, m.f1);
  }
  auto finish = [&](const SplitMetrics& s) {
    SplitMetrics out;
    out.novel = r.novel_categories ? s.novel / static_cast<double>(r.novel_categories) : 0.0;
    out.base = r.base_categories ? s.base / static_cast<double>(r.base_categories) : 0.0;
    out.mean = n_all ? s.mean / static_cast<double>(n_all) : 0.0;
    return out;
  };
  r.ap = finish(sums_ap);
  r.ar = finish(sums_ar);
  r.f1 = finish(sums_f1);
  r.per_category = std::move(per_category);
  return r;
}

MetricsReport evaluate(std::span<const DetectionResult> dets, std::span<const GroundTruthBox> gts,
                       const std::vector<bool>& base_mask, double iou_thresh) {
  const auto num_categories = base_mask.size();
  const std::vector<bool> tp = match_detections(dets, gts, iou_thresh);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<CategoryMetrics> per(num_categories);
  std::vector<std::vector<bool>> ranked(num_categories);
  for (const auto& g : gts)
    if (g.category >= 0 && static_cast<std::size_t>(g.category) < num_categories)
      ++per[static_cast<std::size_t>(g.category)].num_gt;
  for (std::size_t d : order) {
    const int c = dets[d].category;
    if (c < 0 || static_cast<std::size_t>(c) >= num_categories) continue;
    ranked[static_cast<std::size_t>(c)].push_back(tp[d]);
  }
  for (std::size_t c = 0; c < num_categories; ++c) {
    auto& m = per[c];
    const auto& flags = ranked[c];
    m.num_det = flags.size();
    m.num_tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    m.ap = average_precision(flags, m.num_gt);
    m.recall = m.num_gt ? static_cast<double>(m.num_tp) / static_cast<double>(m.num_gt) : 0.0;
    m.ar = m.recall;
    m.precision = m.num_det ? static_cast<double>(m.num_tp) / static_cast<double>(m.num_det) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
  }
  return aggregate(std::move(per), base_mask);
}

}  // namespace ov3d
