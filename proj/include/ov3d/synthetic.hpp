#pragma once

#include <span>
#include <string>
#include <vector>

#include "ov3d/config.hpp"
#include "ov3d/discovery.hpp"
#include "ov3d/scene.hpp"
#include "ov3d/semantic.hpp"

namespace ov3d {

/// A generated room: the visible scene (base annotations only) plus every
/// placed object as hidden evaluation truth.
struct SyntheticScene {
  PointCloudScene scene;
  std::vector<ObjectAnnotation> truth;
  int requested_objects{0};
  int placement_failures{0};
};

/// Indoor object names for the first categories, "category_NN" beyond them,
/// and "background" last when requested.
std::vector<std::string> category_names(int num_categories, bool include_background);

/// Base mask over category_names(): the first num_base categories.
std::vector<bool> category_base_mask(const VocabularySpec& spec);

/// Relative sampling weight per object category (uniform or 1 / (c + 1)^s).
std::vector<double> category_weights(const VocabularySpec& spec);

/// The rarer half of the novel categories (by weight, later index on ties).
std::vector<int> tail_categories(const VocabularySpec& spec);

struct SizeRange {
  Vector3d lo;
  Vector3d hi;
};

/// Seeded per-category box-size range.
SizeRange category_size_range(std::uint64_t seed, int category);

/// Camera behind the near wall (y = -extent.y / 2) looking along +y, with a
/// focal length that keeps the whole room in view.
CameraModel synthetic_camera(const SceneSpec& spec);

/// Places up to objects_per_scene objects with pairwise IoU below the
/// configured bound, samples their surfaces and interiors, and adds floor and
/// wall clutter. Objects that cannot be placed are counted, not raised.
SyntheticScene generate_scene(const SimulationConfig& cfg, const std::string& id, Rng& rng);

/// Image regions of the hidden truths, for the toy oracle.
std::vector<RegionTag> region_tags(const SyntheticScene& s);

/// Image boxes of the hidden truths, the 2D references for background matching.
std::vector<AABB2D> reference_boxes(const SyntheticScene& s);

struct ProposalSet {
  std::vector<Proposal> proposals;
  std::vector<int> source;  // index into truth, or -1 for a distractor
};

/// One jittered proposal per truth plus random distractors. A truth proposal
/// has objectness iou3d(proposal, truth) scaled by familiarity[category];
/// distractors draw objectness uniformly below distractor_max_objectness.
/// Features come from `feature_oracle` for the true category.
ProposalSet mock_proposals(const SyntheticScene& s, const SimulationConfig& cfg, const ToyOracle& feature_oracle,
                           std::span<const double> familiarity, Rng& rng);

/// familiarity = floor + (1 - floor) * (1 - exp(-exposure / scale)).
double familiarity(const ProposalSpec& spec, double exposure);

}  // namespace ov3d
