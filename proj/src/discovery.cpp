#include "ov3d/discovery.hpp"

#include <algorithm>
#include <stdexcept>

#include "ov3d/errors.hpp"

namespace ov3d {

void DiscoveryConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(theta_g) || !unit(theta_s)) throw std::invalid_argument("DiscoveryConfig: thresholds must lie in [0,1]");
  if (!(dedup_iou > 0.0 && dedup_iou < 1.0)) throw std::invalid_argument("DiscoveryConfig: dedup_iou must lie in (0,1)");
  if (update_period < 1) throw std::invalid_argument("DiscoveryConfig: update_period must be positive");
}

std::vector<DiscoveryDecision> discovery_decisions(const PointCloudScene& scene,
                                                   std::span<const Proposal> proposals,
                                                   const CategoryVocabulary& vocab,
                                                   const SemanticOracle& oracle,
                                                   const DiscoveryConfig& cfg) {
  cfg.validate();
  if (!scene.camera) throw ConfigurationError("discover: scene '" + scene.id + "' has no camera");
  const auto base = scene.base_annotations();

  std::vector<DiscoveryDecision> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) {
    DiscoveryDecision d{DiscoveryVerdict::discovered};
    for (const auto& b : base) d.max_base_iou = std::max(d.max_base_iou, iou3d(p.box, b.box));

    if (!(p.objectness > cfg.theta_g)) {
      d.verdict = DiscoveryVerdict::low_objectness;
    } else if (!(d.max_base_iou < cfg.dedup_iou)) {
      d.verdict = DiscoveryVerdict::overlaps_base;
    } else {
      try {
        const AABB2D crop = crop_region_2d(scene, p.box);
        const ClassProbabilities probs = classify(oracle.embed_region(scene.image_ref, crop), vocab);
        d.category = probs.argmax();
        d.semantic_prob = probs.probs[d.category];
        if (vocab.is_base(d.category) || vocab.is_background(d.category))
          d.verdict = DiscoveryVerdict::seen_category;
        else if (!(d.semantic_prob > cfg.theta_s))
          d.verdict = DiscoveryVerdict::low_semantic;
      } catch (const BehindCameraError&) {
        d.verdict = DiscoveryVerdict::behind_camera;
      }
    }
    out.push_back(d);
  }
  return out;
}

std::vector<ObjectAnnotation> discover(const PointCloudScene& scene, std::span<const Proposal> proposals,
                                       const CategoryVocabulary& vocab, const SemanticOracle& oracle,
                                       const DiscoveryConfig& cfg) {
  const auto decisions = discovery_decisions(scene, proposals, vocab, oracle, cfg);
  std::vector<ObjectAnnotation> out;
  for (std::size_t i = 0; i < proposals.size(); ++i)
    if (decisions[i].verdict == DiscoveryVerdict::discovered)
      out.push_back({proposals[i].box, decisions[i].category, AnnotationSource::discovered,
                     decisions[i].semantic_prob});
  return out;
}

LabelPool::UpdateResult LabelPool::update(std::span<const ObjectAnnotation> discovered, const std::string& scene_id) {
  UpdateResult result;
  auto& list = entries_[scene_id];
  for (const auto& cand : discovered) {
    std::vector<std::size_t> conflicts;
    for (std::size_t i = 0; i < list.size(); ++i)
      if (iou3d(cand.box, list[i].box) >= dedup_iou_) conflicts.push_back(i);

    ObjectAnnotation entry = cand;
    entry.source = AnnotationSource::discovered;
    if (conflicts.empty()) {
      list.push_back(entry);
      result.accepted.push_back(entry);
      ++result.added;
    } else if (conflicts.size() == 1 && cand.confidence > list[conflicts.front()].confidence) {
      list[conflicts.front()] = entry;
      result.accepted.push_back(entry);
      ++result.replaced;
    } else {
      ++result.dropped;
    }
  }
  if (list.empty()) entries_.erase(scene_id);
  return result;
}

const std::vector<ObjectAnnotation>& LabelPool::entries(const std::string& scene_id) const {
  static const std::vector<ObjectAnnotation> kEmpty;
  auto it = entries_.find(scene_id);
  return it == entries_.end() ? kEmpty : it->second;
}

std::size_t LabelPool::size() const {
  std::size_t n = 0;
  for (const auto& [id, list] : entries_) n += list.size();
  return n;
}

std::vector<std::size_t> LabelPool::category_counts(int num_categories) const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_categories, 0)), 0);
  for (const auto& [id, list] : entries_)
    for (const auto& a : list)
      if (a.category >= 0 && a.category < num_categories) ++counts[static_cast<std::size_t>(a.category)];
  return counts;
}

LabelPool::UpdateResult update_label_pool(LabelPool& pool, std::span<const ObjectAnnotation> discovered,
                                          const std::string& scene_id) {
  return pool.update(discovered, scene_id);
}

std::size_t update_data_pool(DataPool& pool, const PointCloudScene& scene,
                             std::span<const ObjectAnnotation> discovered) {
  std::size_t added = 0;
  for (const auto& a : discovered) {
    NovelObjectSample sample;
    try {
      sample = extract_object(scene, a.box);
    } catch (const EmptyObjectError&) {
      continue;
    }
    sample.category = a.category;
    sample.semantic_prob = a.confidence;
    if (scene.camera) {
      try {
        sample.crop_box = crop_region_2d(scene, a.box);
      } catch (const BehindCameraError&) {
        sample.crop_box.reset();
      }
    }
    pool.samples.push_back(std::move(sample));
    ++added;
  }
  return added;
}

std::vector<NovelObjectSample> sample_enrichment(const DataPool& pool, int k, Rng& rng) {
  if (k < 0) throw std::invalid_argument("sample_enrichment: k must be >= 0");
  std::vector<NovelObjectSample> out;
  if (pool.samples.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, pool.samples.size() - 1);
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(pool.samples[pick(rng)]);
  return out;
}

}  // namespace ov3d
