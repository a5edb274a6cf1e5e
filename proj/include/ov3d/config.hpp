#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "ov3d/alignment.hpp"
#include "ov3d/discovery.hpp"
#include "ov3d/losses.hpp"
#include "ov3d/scene.hpp"

namespace ov3d {

enum class CategoryFrequency { uniform, zipf };
enum class DiscoveryMode {
  batch,  // discover on the scenes processed in the round
  all,    // re-run discovery over every scene at each pool refresh
};

struct VocabularySpec {
  int num_categories = 20;  // object categories, base ones first
  int num_base = 5;
  int embedding_dim = 64;
  double temperature = 100.0;
  bool include_background = true;  // appends a "background" entry
  CategoryFrequency frequency = CategoryFrequency::uniform;
  double zipf_exponent = 1.0;
};

struct SceneSpec {
  Vector3d extent = Vector3d(6.0, 6.0, 3.0);  // room size; floor at z = 0
  int objects_per_scene = 10;
  int points_per_object = 1200;
  int clutter_points = 2000;
  double max_pairwise_iou = 0.05;
  int placement_retries = 100;
  ImageSize image{640.0, 480.0};
  double camera_distance = 3.0;  // from the near wall
};

struct ProposalSpec {
  double sigma_center = 0.0;
  double sigma_size = 0.0;
  double sigma_yaw = 0.0;
  int distractors = 5;
  double distractor_max_objectness = 0.25;
  double feature_noise = 0.3;
  double objectness_noise = 0.0;
  // Detector familiarity: objectness = IoU * (floor + (1 - floor) * (1 - exp(-exposure / scale))).
  // floor = 1 disables the model.
  double objectness_floor = 1.0;
  double exposure_scale = 10.0;
  double unlabeled_exposure = 0.0;  // exposure credited per unlabeled instance
  double exposure_per_round = 0.0;  // exposure every category gains per completed round
};

struct OracleSpec {
  double noise_sigma = 0.3;
  double region_match_iou = 0.5;
};

struct AlignmentSpec {
  double k_bg = 5e-3;
  double temperature = 100.0;
  MatcherConfig matcher;
  DetectorLossWeights weights;
  int queries = 128;
  int extra = 32;
  int angle_bins = 12;
};

struct SimulationConfig {
  std::uint64_t seed = 7;
  int num_scenes = 20;
  int scenes_per_round = 0;  // 0 = every scene each round
  VocabularySpec vocab;
  SceneSpec scene;
  ProposalSpec proposals;
  OracleSpec oracle;
  DiscoveryConfig discovery;
  DiscoveryMode discovery_mode = DiscoveryMode::batch;
  InsertConfig insert;
  int enrich_k = 5;
  AlignmentSpec alignment;
  int rounds = 10;
  int epochs_per_round = 50;

  void validate() const;
};

nlohmann::json to_json(const SimulationConfig& cfg);
/// Missing keys keep their defaults.
SimulationConfig config_from_json(const nlohmann::json& j);
SimulationConfig load_config(const std::filesystem::path& path);

}  // namespace ov3d
