#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ov3d/errors.hpp"
#include "ov3d/geometry.hpp"
#include "ov3d/rng.hpp"

namespace ov3d {

using Points = Eigen::Matrix3Xd;
using Colors = Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>;

enum class AnnotationSource { base, discovered };

struct ObjectAnnotation {
  OrientedBox3D box;
  int category{0};
  AnnotationSource source{AnnotationSource::base};
  double confidence{1.0};
};

/// Points (one column per point, scene frame) plus annotations and the
/// camera that defines the 2D view of the scene.
struct PointCloudScene {
  std::string id;
  Points points = Points(3, 0);
  Colors colors = Colors(3, 0);  // empty or one column per point
  std::vector<ObjectAnnotation> annotations;
  std::string image_ref;
  std::optional<CameraModel> camera;
  ImageSize image_size;

  Eigen::Index size() const noexcept { return points.cols(); }
  bool has_colors() const noexcept { return colors.cols() > 0; }
  std::vector<ObjectAnnotation> base_annotations() const;
  /// Lowest point height; 0 for an empty scene.
  double floor_level() const;
};

/// A discovered object cut out of its scene, stored in its own box frame
/// (centered, yaw removed) so it can be pasted elsewhere.
struct NovelObjectSample {
  Points points = Points(3, 0);
  Vector3d box_size = Vector3d::Ones();
  int category{0};
  double semantic_prob{0.0};
  std::string crop_ref;
  std::optional<AABB2D> crop_box;
  std::string origin_scene;

  Eigen::Index size() const noexcept { return points.cols(); }
};

/// Per-point inclusive containment mask, consistent with contains().
Eigen::Array<bool, Eigen::Dynamic, 1> points_in_box(const Points& points, const OrientedBox3D& box);

std::size_t count_points_in_box(const PointCloudScene& scene, const OrientedBox3D& box);

/// Throws EmptyObjectError if the box holds no points.
NovelObjectSample extract_object(const PointCloudScene& scene, const OrientedBox3D& box);

/// Image region of `box` in the scene's camera. Throws ConfigurationError
/// without a camera and BehindCameraError when a corner has non-positive depth.
AABB2D crop_region_2d(const PointCloudScene& scene, const OrientedBox3D& box);

struct InsertConfig {
  /// Occlusion threshold J: a placement holding more scene points is rejected.
  std::size_t occlusion_threshold = 1000;
  int max_retries = 50;
  /// Placement area (x_min, y_min, x_max, y_max); defaults to the scene's
  /// horizontal point extent.
  std::optional<Eigen::Vector4d> region;

  void validate() const;
};

struct InsertOutcome {
  bool inserted{false};
  int attempts{0};
  std::optional<OrientedBox3D> box;
  std::size_t pre_count{0};    // scene points inside the accepted box before pasting
  Eigen::Index first_point{0}; // column of the first pasted point
  Eigen::Index num_points{0};
};

/// Pastes `sample` at a random floor-aligned pose whose box holds at most J
/// existing points. After max_retries failed attempts the scene is left
/// unchanged and the outcome reports a skip.
InsertOutcome insert_object(PointCloudScene& scene, const NovelObjectSample& sample,
                            const InsertConfig& cfg, Rng& rng);

/// Pastes `sample` at a fixed pose without any occlusion check.
void place_object(PointCloudScene& scene, const NovelObjectSample& sample, const OrientedBox3D& pose,
                  double confidence);

}  // namespace ov3d
