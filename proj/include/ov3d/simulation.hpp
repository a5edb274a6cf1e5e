#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ov3d/config.hpp"
#include "ov3d/discovery.hpp"
#include "ov3d/eval.hpp"
#include "ov3d/synthetic.hpp"

namespace ov3d {

/// A scene failure inside run_round, tagged with the round and scene.
class RoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InsertionRecord {
  std::string scene_id;
  std::string origin_scene;
  int category{0};
  bool inserted{false};
  int attempts{0};
  std::optional<OrientedBox3D> box;
  std::size_t pre_count{0};
  Eigen::Index first_point{0};
  Eigen::Index num_points{0};
};

struct LossSummary {
  double distill{0.0};
  double contrastive{0.0};
  double detector{0.0};
  std::size_t distill_queries{0};
  std::size_t contrastive_queries{0};
  std::size_t detector_queries{0};
  std::size_t background_queries{0};
};

/// Label pool against the hidden novel truths that clear the base-overlap bound.
struct DiscoveryQuality {
  std::size_t targets{0};
  std::size_t pool_entries{0};
  std::size_t true_positives{0};
  double precision{0.0};
  double recall{0.0};
};

struct RoundLog {
  int round{0};
  long epoch_begin{0};
  long epoch_end{0};
  bool refreshed{false};
  std::vector<std::string> scenes;
  std::vector<std::size_t> discoveries_per_category;  // raw discoveries made this round
  std::vector<std::size_t> accepted_per_category;     // pool additions/replacements this round
  std::vector<std::size_t> pool_category_counts;
  std::size_t label_pool_size{0};
  std::size_t data_pool_size{0};
  std::vector<InsertionRecord> insertions;
  std::size_t skipped_insertions{0};
  LossSummary losses;
  MetricsReport metrics;  // label pool scored against the discovery targets
  DiscoveryQuality discovery;
  double tail_share{0.0};  // fraction of label-pool entries in tail categories
};

struct SimulationState {
  SimulationConfig cfg;
  std::vector<std::string> names;
  std::vector<int> tail;
  std::vector<SyntheticScene> scenes;
  ToyOracle oracle;          // knows every truth's image region
  ToyOracle feature_oracle;  // source of mock 3D query features
  CategoryVocabulary vocab;
  LabelPool label_pool;
  DataPool data_pool{};
  std::map<std::string, std::vector<ObjectAnnotation>> pending{};  // discoveries awaiting a refresh
  std::vector<double> prior_exposure{};
  std::vector<std::size_t> inserted_counts{};
  int round{0};
  /// Enriched copies of the scenes processed in the latest round, by id.
  std::map<std::string, PointCloudScene> last_enriched{};
};

SimulationState init_simulation(const SimulationConfig& cfg);

/// Hidden novel truths of a scene whose max IoU against its base annotations
/// is below the discovery dedup bound.
std::vector<ObjectAnnotation> discovery_targets(const SyntheticScene& s, const CategoryVocabulary& vocab,
                                                double dedup_iou);

/// Per-category familiarity for the detector state at the start of a round.
std::vector<double> current_familiarity(const SimulationState& state);

/// One round: per scene, enrichment, mock proposals, discovery and
/// alignment losses against frozen pools; pool writes happen at the end
/// when the round crosses a refresh epoch.
RoundLog run_round(SimulationState& state);

nlohmann::json to_json(const RoundLog& log, const std::vector<std::string>& names);

struct SimulationOutputs {
  bool export_scenes{false};
  bool save_data_pool{true};
};

/// Runs cfg.rounds rounds, writing round_NNN.json, metrics.csv (one row per
/// round), metrics.json / final_metrics.csv, label-pool snapshots and the data pool
/// under `out_dir`. Returns the round logs.
std::vector<RoundLog> run_simulation(const SimulationConfig& cfg, const std::filesystem::path& out_dir,
                                     const SimulationOutputs& outputs = {});

}  // namespace ov3d
