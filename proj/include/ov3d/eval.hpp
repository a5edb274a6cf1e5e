#pragma once

#include <span>
#include <string>
#include <vector>

#include "ov3d/geometry.hpp"

namespace ov3d {

inline constexpr double kEvalIouThreshold = 0.25;

struct DetectionResult {
  std::string scene_id;
  OrientedBox3D box;
  int category{0};
  double confidence{0.0};
};

struct GroundTruthBox {
  std::string scene_id;
  OrientedBox3D box;
  int category{0};
};

/// Greedy matching in descending confidence (stable on ties). A detection
/// takes the highest-IoU still-unmatched ground truth of the same scene and
/// category with IoU >= iou_thresh. Flags are returned in input order.
std::vector<bool> match_detections(std::span<const DetectionResult> dets, std::span<const GroundTruthBox> gts,
                                   double iou_thresh = kEvalIouThreshold);

/// Area under the precision-recall curve after the monotone precision
/// envelope; flags must be in rank order. 0 when num_gt == 0.
double average_precision(const std::vector<bool>& ranked_tp, std::size_t num_gt);

struct CategoryMetrics {
  double ap{0.0};
  double ar{0.0};         // recall over the full ranked list
  double precision{0.0};  // at the end of the ranked list
  double recall{0.0};
  double f1{0.0};
  std::size_t num_gt{0};
  std::size_t num_det{0};
  std::size_t num_tp{0};
};

struct SplitMetrics {
  double novel{0.0};
  double base{0.0};
  double mean{0.0};
};

struct MetricsReport {
  std::vector<CategoryMetrics> per_category;
  SplitMetrics ap;
  SplitMetrics ar;
  SplitMetrics f1;
  std::size_t novel_categories{0};  // populated (>= 1 GT) categories per split
  std::size_t base_categories{0};
};

double f1_score(double precision, double recall);

/// Split means over categories with at least one ground truth.
MetricsReport aggregate(std::vector<CategoryMetrics> per_category, const std::vector<bool>& base_mask);

/// Per-category AP/AR/F1 at `iou_thresh` followed by aggregate().
MetricsReport evaluate(std::span<const DetectionResult> dets, std::span<const GroundTruthBox> gts,
                       const std::vector<bool>& base_mask, double iou_thresh = kEvalIouThreshold);

}  // namespace ov3d
