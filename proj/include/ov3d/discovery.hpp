#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ov3d/scene.hpp"
#include "ov3d/semantic.hpp"

namespace ov3d {

/// A class-agnostic detector output.
struct Proposal {
  OrientedBox3D box;
  double objectness{0.0};
  Embedding feature;
};

struct DiscoveryConfig {
  double theta_g = 0.3;    // objectness (geometry prior) threshold
  double theta_s = 0.3;    // semantic prior threshold
  double dedup_iou = 0.25; // base-overlap and pool de-duplication IoU
  int update_period = 50;  // epochs between label-pool refreshes

  void validate() const;
};

/// Why a proposal was or was not minted as a novel label.
enum class DiscoveryVerdict {
  discovered,
  low_objectness,
  overlaps_base,
  behind_camera,
  seen_category,
  low_semantic,
};

struct DiscoveryDecision {
  DiscoveryVerdict verdict;
  double max_base_iou{0.0};
  int category{-1};
  double semantic_prob{0.0};
};

/// Applies the joint geometry/semantic rule to every proposal and reports the
/// verdict for each (same order as `proposals`).
std::vector<DiscoveryDecision> discovery_decisions(const PointCloudScene& scene,
                                                   std::span<const Proposal> proposals,
                                                   const CategoryVocabulary& vocab,
                                                   const SemanticOracle& oracle,
                                                   const DiscoveryConfig& cfg);

/// Proposals that clear objectness > theta_g, max base IoU < dedup_iou and
/// whose top semantic category is unseen with probability > theta_s. The
/// "background" category, when present, never counts as a discovery.
std::vector<ObjectAnnotation> discover(const PointCloudScene& scene, std::span<const Proposal> proposals,
                                       const CategoryVocabulary& vocab, const SemanticOracle& oracle,
                                       const DiscoveryConfig& cfg);

/// Online novel-box label pool, keyed by scene id. No two entries of a scene
/// overlap with IoU >= dedup_iou.
class LabelPool {
 public:
  explicit LabelPool(double dedup_iou = 0.25) : dedup_iou_(dedup_iou) {}

  struct UpdateResult {
    std::vector<ObjectAnnotation> accepted;  // newly added or replacing an older entry
    std::size_t added{0};
    std::size_t replaced{0};
    std::size_t dropped{0};
  };

  /// Union with de-duplication: a new entry overlapping exactly one existing
  /// entry replaces it only if more confident; otherwise it is dropped.
  UpdateResult update(std::span<const ObjectAnnotation> discovered, const std::string& scene_id);

  const std::vector<ObjectAnnotation>& entries(const std::string& scene_id) const;
  const std::map<std::string, std::vector<ObjectAnnotation>>& scenes() const noexcept { return entries_; }
  std::size_t size() const;
  double dedup_iou() const noexcept { return dedup_iou_; }
  /// Entry count per category id (size = num_categories).
  std::vector<std::size_t> category_counts(int num_categories) const;

 private:
  double dedup_iou_;
  std::map<std::string, std::vector<ObjectAnnotation>> entries_;
};

LabelPool::UpdateResult update_label_pool(LabelPool& pool, std::span<const ObjectAnnotation> discovered,
                                          const std::string& scene_id);

/// Novel-object payloads available for enrichment.
struct DataPool {
  std::vector<NovelObjectSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Extracts each discovered object (and its image crop when the scene has a
/// usable camera) and appends it. Empty extractions are skipped. Returns the
/// number of samples appended.
std::size_t update_data_pool(DataPool& pool, const PointCloudScene& scene,
                             std::span<const ObjectAnnotation> discovered);

/// k draws with replacement, uniformly over the pool; empty when the pool is.
std::vector<NovelObjectSample> sample_enrichment(const DataPool& pool, int k, Rng& rng);

}  // namespace ov3d
