#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ov3d/alignment.hpp"
#include "ov3d/discovery.hpp"
#include "ov3d/eval.hpp"
#include "ov3d/scene.hpp"
#include "ov3d/semantic.hpp"

namespace ov3d::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

Json read_json(const fs::path& path);
/// Pretty-printed, key-sorted, trailing newline.
void write_json(const fs::path& path, const Json& j);

Json to_json(const Vector3d& v);
Vector3d vector3_from_json(const Json& j);
Json to_json(const OrientedBox3D& box);
OrientedBox3D box_from_json(const Json& j);
Json to_json(const AABB2D& box);
AABB2D aabb_from_json(const Json& j);
Json to_json(const ObjectAnnotation& a);
ObjectAnnotation annotation_from_json(const Json& j);
Json to_json(const CameraModel& cam);
CameraModel camera_from_json(const Json& j);
Json to_json(const Embedding& e);
Embedding embedding_from_json(const Json& j);

/// Scene file: {scene_id, points_file, annotations, camera: {K, R, t},
/// image_ref, image_size}. points_file is resolved relative to the JSON.
PointCloudScene load_scene(const fs::path& json_path);
/// Writes the JSON plus a binary PLY with the same stem next to it.
void save_scene(const PointCloudScene& scene, const fs::path& json_path);

/// Proposal file: [{center, size, yaw, objectness, feature: [...]}].
std::vector<Proposal> load_proposals(const fs::path& path);
void save_proposals(const fs::path& path, std::span<const Proposal> proposals);

/// Label-pool snapshot: {epoch, dedup_iou, scenes: {scene_id: [annotation]}}.
Json label_pool_snapshot(const LabelPool& pool, long epoch);
LabelPool label_pool_from_snapshot(const Json& j);

/// Data-pool archive: index.json plus one JSON + PLY pair per sample.
void save_data_pool(const DataPool& pool, const fs::path& dir);
DataPool load_data_pool(const fs::path& dir);

/// Reference-box file: one {image_ref, boxes: [[u_min, v_min, u_max, v_max]]}
/// object or a list of them.
std::map<std::string, std::vector<AABB2D>> load_reference_boxes(const fs::path& path);
void save_reference_boxes(const fs::path& path, const std::map<std::string, std::vector<AABB2D>>& refs);

/// Embedding file: {dim, names, vectors}.
struct TextEmbeddings {
  std::vector<std::string> names;
  std::vector<Embedding> vectors;
};
TextEmbeddings load_text_embeddings(const fs::path& path);
void save_text_embeddings(const fs::path& path, const TextEmbeddings& t);

/// Region cache: {dim, entries: [{image_ref, box, vector}]}.
std::vector<ReplayOracle::RegionEntry> load_region_cache(const fs::path& path);
void save_region_cache(const fs::path& path, std::span<const ReplayOracle::RegionEntry> entries);

/// Detections: [{scene_id, center, size, yaw, category, confidence}];
/// ground truths use the same layout without confidence.
std::vector<DetectionResult> load_detections(const fs::path& path);
void save_detections(const fs::path& path, std::span<const DetectionResult> dets);
std::vector<GroundTruthBox> load_ground_truths(const fs::path& path);
void save_ground_truths(const fs::path& path, std::span<const GroundTruthBox> gts);

Json to_json(const MetricsReport& m, const std::vector<std::string>& names = {});
/// One row per category followed by the aggregate rows; values x100.
std::string metrics_csv(const MetricsReport& m, const std::vector<std::string>& names = {});

/// Shortest round-trip text form of a double.
std::string format_double(double v);

}  // namespace ov3d::io
