#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "ov3d/geometry.hpp"
#include "ov3d/rng.hpp"
#include "ov3d/scene.hpp"

namespace ov3d {

using IndexPair = std::pair<int, int>;

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs, returned
/// sorted by row. Throws std::invalid_argument on non-finite costs. Ties are
/// resolved by scan order, lowest column first.
std::vector<IndexPair> hungarian_match(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const IndexPair> pairs);

struct MatchResult {
  std::vector<IndexPair> pairs;           // (proposal, target)
  std::vector<int> labels;                // target category per pair (one-hot label index)
  std::vector<int> unmatched_proposals;   // not in pairs, ascending
  std::vector<int> background_proposals;  // subset of unmatched, ascending
};

enum class MatcherKind {
  bipartite,  // Hungarian over center-L1 + (1 - IoU) costs
  iou,        // every proposal with IoU above a threshold against some target
};

struct MatcherConfig {
  MatcherKind kind = MatcherKind::bipartite;
  double lambda_center = 1.0;
  double lambda_iou = 2.0;
  double iou_threshold = 0.25;  // MatcherKind::iou only
};

Eigen::MatrixXd fg_cost_matrix(std::span<const OrientedBox3D> proposals, std::span<const ObjectAnnotation> targets,
                               const MatcherConfig& cfg = {});

/// Foreground matching of proposal boxes against base and pool labels. The
/// iou matcher may assign several proposals to one target.
MatchResult fg_match(std::span<const OrientedBox3D> proposals, std::span<const ObjectAnnotation> targets,
                     const MatcherConfig& cfg = {});

/// Proposals whose projected box has max IoU < k against every reference
/// box. Proposals with a corner behind the camera are never background.
std::vector<int> bg_match(std::span<const OrientedBox3D> proposals, const CameraModel& cam, const ImageSize& image,
                          std::span<const AABB2D> refs, double k);

/// Marks the background subset of `match.unmatched_proposals`.
void assign_background(MatchResult& match, std::span<const int> background);

/// fg-matched and background queries plus `extra` further queries drawn
/// uniformly without replacement from the rest (clipped to what remains).
std::vector<int> select_alignment_queries(const MatchResult& match, int total_queries, int extra, Rng& rng);

}  // namespace ov3d
