#include "ov3d/scene.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ov3d/errors.hpp"

namespace ov3d {

std::vector<ObjectAnnotation> PointCloudScene::base_annotations() const {
  std::vector<ObjectAnnotation> out;
  for (const auto& a : annotations)
    if (a.source == AnnotationSource::base) out.push_back(a);
  return out;
}

double PointCloudScene::floor_level() const {
  return points.cols() == 0 ? 0.0 : points.row(2).minCoeff();
}

Eigen::Array<bool, Eigen::Dynamic, 1> points_in_box(const Points& points, const OrientedBox3D& box) {
  const double c = std::cos(box.yaw()), s = std::sin(box.yaw());
  const Vector3d h = box.half_size();
  const Eigen::ArrayXd dx = points.row(0).transpose().array() - box.center().x();
  const Eigen::ArrayXd dy = points.row(1).transpose().array() - box.center().y();
  const Eigen::ArrayXd dz = points.row(2).transpose().array() - box.center().z();
  const Eigen::ArrayXd lx = c * dx + s * dy;
  const Eigen::ArrayXd ly = -s * dx + c * dy;
  return (lx.abs() <= h.x() + kContainsTolerance) && (ly.abs() <= h.y() + kContainsTolerance) &&
         (dz.abs() <= h.z() + kContainsTolerance);
}

std::size_t count_points_in_box(const PointCloudScene& scene, const OrientedBox3D& box) {
  if (scene.size() == 0) return 0;
  return static_cast<std::size_t>(points_in_box(scene.points, box).count());
}

NovelObjectSample extract_object(const PointCloudScene& scene, const OrientedBox3D& box) {
  const auto mask = scene.size() ? points_in_box(scene.points, box) : Eigen::Array<bool, Eigen::Dynamic, 1>();
  const Eigen::Index m = mask.count();
  if (m == 0) throw EmptyObjectError("extract_object: no scene points inside the box");

  NovelObjectSample sample;
  sample.points.resize(3, m);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < scene.size(); ++i)
    if (mask[i]) sample.points.col(k++) = box.to_local(scene.points.col(i));
  // Keep every local point inside the zero-centered box despite rounding.
  const Vector3d h = box.half_size();
  sample.points = sample.points.cwiseMax(-h.replicate(1, m)).cwiseMin(h.replicate(1, m));
  sample.box_size = box.size();
  sample.crop_ref = scene.image_ref;
  sample.origin_scene = scene.id;
  return sample;
}

AABB2D crop_region_2d(const PointCloudScene& scene, const OrientedBox3D& box) {
  if (!scene.camera) throw ConfigurationError("crop_region_2d: scene '" + scene.id + "' has no camera");
  return project_box(box, *scene.camera, scene.image_size);
}

void InsertConfig::validate() const {
  if (occlusion_threshold == 0) throw std::invalid_argument("InsertConfig: occlusion threshold J must be > 0");
  if (max_retries < 1) throw std::invalid_argument("InsertConfig: max_retries must be >= 1");
}

void place_object(PointCloudScene& scene, const NovelObjectSample& sample, const OrientedBox3D& pose,
                  double confidence) {
  const Eigen::Index n0 = scene.size(), m = sample.size();
  const bool colored = scene.has_colors();
  scene.points.conservativeResize(3, n0 + m);
  for (Eigen::Index j = 0; j < m; ++j) scene.points.col(n0 + j) = pose.to_world(sample.points.col(j));
  if (colored) {
    scene.colors.conservativeResize(3, n0 + m);
    scene.colors.rightCols(m).setConstant(128);
  }
  scene.annotations.push_back({pose, sample.category, AnnotationSource::discovered, confidence});
}

InsertOutcome insert_object(PointCloudScene& scene, const NovelObjectSample& sample,
                            const InsertConfig& cfg, Rng& rng) {
  cfg.validate();
  if (sample.size() == 0) throw EmptyObjectError("insert_object: sample has no points");

  Eigen::Vector4d region = Eigen::Vector4d::Zero();
  if (cfg.region) {
    region = *cfg.region;
  } else if (scene.size() > 0) {
    region << scene.points.row(0).minCoeff(), scene.points.row(1).minCoeff(),
        scene.points.row(0).maxCoeff(), scene.points.row(1).maxCoeff();
  }
  const double floor = scene.floor_level();
  constexpr double pi = std::numbers::pi;

  InsertOutcome out;
  for (int attempt = 1; attempt <= cfg.max_retries; ++attempt) {
    out.attempts = attempt;
    const double x = region[0] < region[2] ? uniform(rng, region[0], region[2]) : region[0];
    const double y = region[1] < region[3] ? uniform(rng, region[1], region[3]) : region[1];
    const double yaw = uniform(rng, -pi, pi);
    const OrientedBox3D candidate(Vector3d(x, y, floor + sample.box_size.z() / 2), sample.box_size, yaw);
    const std::size_t inside = count_points_in_box(scene, candidate);
    if (inside > cfg.occlusion_threshold) continue;

    out.inserted = true;
    out.box = candidate;
    out.pre_count = inside;
    out.first_point = scene.size();
    out.num_points = sample.size();
    place_object(scene, sample, candidate, sample.semantic_prob);
    return out;
  }
  return out;
}

}  // namespace ov3d
